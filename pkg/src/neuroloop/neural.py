"""Synthetic cortex and spike detection.

Two inputs into the decoding pipeline live here: a Poisson intent encoder that
stands in for the recorded motor cortex, and threshold-crossing spike
detection for raw voltage traces (median-absolute-deviation noise estimate,
threshold at -5 estimated sigma).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .commands import Command

MAD_SCALE = 0.6745  # median(|x|) of a zero-mean unit Gaussian

DEFAULT_REFRACTORY_S = 1e-3


@dataclass(frozen=True)
class SpikeEvent:
    """One threshold crossing on one electrode channel."""

    channel: int
    timestamp: float


@dataclass(frozen=True)
class NoiseTrace:
    """Raw voltage samples (microvolts) for one channel at sampling rate fs."""

    channel: int
    samples: np.ndarray
    fs: float

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.fs <= 0:
            raise ValueError("fs must be positive")


def mad_sigma(samples: Sequence[float]) -> float:
    """Noise standard deviation estimated as median(|samples|) / 0.6745."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("mad_sigma requires at least one sample")
    return float(np.median(np.abs(arr)) / MAD_SCALE)


def detect_threshold(sigma: float) -> float:
    """Detection level: negative of five estimated noise sigmas."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    return -5.0 * sigma


def detect_spikes(
    trace: NoiseTrace,
    threshold: float,
    refractory: float = DEFAULT_REFRACTORY_S,
) -> list[SpikeEvent]:
    """Negative-going threshold crossings, deduplicated by a refractory hold-off.

    A crossing is a sample below ``threshold`` whose predecessor was at or
    above it (the first sample counts if already below). Timestamps are
    crossing-sample index / fs.
    """
    if threshold > 0:
        raise ValueError("threshold must be <= 0 for negative-going detection")
    if refractory < 0:
        raise ValueError("refractory must be non-negative")
    x = trace.samples
    if x.size == 0:
        return []
    below = x < threshold
    crossing = below.copy()
    crossing[1:] &= ~below[:-1]
    idx = np.flatnonzero(crossing)
    events: list[SpikeEvent] = []
    last_t = -np.inf
    for i in idx:
        t = i / trace.fs
        if t - last_t < refractory:
            continue
        events.append(SpikeEvent(trace.channel, t))
        last_t = t
    return events


def default_channel_map(n_channels: int) -> list[Command]:
    """Even contiguous partition of channels across the four command classes."""
    commands = list(Command)
    span = n_channels / len(commands)
    return [commands[min(int(k / span), len(commands) - 1)] for k in range(n_channels)]


@dataclass
class IntentEncoder:
    """Poisson spike generator conditioned on the subject's intended command.

    Every channel fires at ``baseline_hz``; channels whose preferred command
    matches the intent fire at ``baseline_hz + modulation_hz``. With
    ``modulation_hz = 0`` the spike statistics are identical across intents,
    so the stream carries no information. The ``deterministic`` flag replaces
    Poisson sampling with an evenly spaced spike train whose per-channel phase
    is carried across windows, so counts are exact in aggregate.
    """

    n_channels: int
    baseline_hz: float = 5.0
    modulation_hz: float = 45.0
    seed: int = 0
    deterministic: bool = False
    channel_map: list[Command] | None = None
    _rng: np.random.Generator = field(init=False, repr=False)
    _phase: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_channels < 1:
            raise ValueError("n_channels must be >= 1")
        if self.baseline_hz < 0 or self.baseline_hz + self.modulation_hz < 0:
            raise ValueError("rates must stay non-negative")
        if self.channel_map is None:
            self.channel_map = default_channel_map(self.n_channels)
        elif len(self.channel_map) != self.n_channels:
            raise ValueError("channel_map length must equal n_channels")
        self.reset()

    def reset(self) -> None:
        """Restart the generator streams (same seed, same future output)."""
        self._rng = np.random.default_rng(self.seed)
        self._phase = np.zeros(self.n_channels)

    def rates_for(self, intent: Command) -> np.ndarray:
        match = np.array([pref == intent for pref in self.channel_map])
        return self.baseline_hz + self.modulation_hz * match

    def encode(self, intent: Command, t0: float, t1: float) -> list[SpikeEvent]:
        """Spike events on all channels in the half-open window (t0, t1]."""
        if t1 <= t0:
            raise ValueError("window must have positive duration")
        duration = t1 - t0
        rates = self.rates_for(intent)
        if self.deterministic:
            return self._encode_regular(rates, t0, duration)
        counts = self._rng.poisson(rates * duration)
        total = int(counts.sum())
        if total == 0:
            return []
        offsets = self._rng.random(total) * duration
        channels = np.repeat(np.arange(self.n_channels), counts)
        times = t1 - offsets  # lands in (t0, t1]
        order = np.argsort(times, kind="stable")
        return [SpikeEvent(int(channels[i]), float(times[i])) for i in order]

    def _encode_regular(self, rates: np.ndarray, t0: float, duration: float) -> list[SpikeEvent]:
        events: list[SpikeEvent] = []
        for ch, rate in enumerate(rates):
            if rate <= 0:
                continue
            advanced = self._phase[ch] + rate * duration
            n = int(np.floor(advanced + 1e-9))
            for k in range(1, n + 1):
                # clamp: rounding must not push an event past the window edge
                ts = min(t0 + (k - self._phase[ch]) / rate, t0 + duration)
                events.append(SpikeEvent(ch, ts))
            self._phase[ch] = advanced - n
        events.sort(key=lambda e: e.timestamp)
        return events


def synth_trace(
    rng: np.random.Generator,
    duration: float,
    fs: float,
    noise_sigma: float,
    spike_times: Sequence[float] = (),
    spike_amplitude: float = -80.0,
    spike_width_s: float = 1e-3,
    channel: int = 0,
) -> NoiseTrace:
    """Gaussian noise with biphasic spike templates injected at known times.

    Exists to exercise :func:`detect_spikes` against ground truth; the closed
    loop itself consumes encoder events directly.
    """
    n = int(round(duration * fs))
    samples = rng.normal(0.0, noise_sigma, n)
    half = max(1, int(round(spike_width_s * fs / 2)))
    template = spike_amplitude * np.hanning(2 * half)
    for t in spike_times:
        i = int(round(t * fs))
        j0, j1 = i, min(i + template.size, n)
        if j0 >= n:
            continue
        samples[j0:j1] += template[: j1 - j0]
    return NoiseTrace(channel=channel, samples=samples, fs=fs)


def write_spikes_jsonl(events: Iterable[SpikeEvent], fp: IO[str]) -> None:
    """One event per line: {"ch": int, "t": seconds}."""
    for ev in events:
        fp.write(json.dumps({"ch": ev.channel, "t": ev.timestamp}) + "\n")


def read_spikes_jsonl(fp: IO[str]) -> list[SpikeEvent]:
    events = []
    for line in fp:
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        events.append(SpikeEvent(int(doc["ch"]), float(doc["t"])))
    return events
