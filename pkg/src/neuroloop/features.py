"""Sliding-window firing-rate features.

The decoder's input at tick time t is the per-channel spike count over the
trailing look-back window (t - T_w, t], refreshed every T_s = 1/d_f seconds.
Counts are reported raw (not divided by T_w), matching counter semantics; the
decoder's first layer absorbs the scale.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .neural import SpikeEvent

_GRID_TOL = 1e-9


@dataclass(frozen=True)
class FeatureConfig:
    """Channel count, look-back window and decoder update rate."""

    n_channels: int
    window_s: float = 0.5
    decoder_hz: float = 10.0

    def __post_init__(self):
        if self.n_channels < 1:
            raise ValueError("n_channels must be >= 1")
        if self.decoder_hz <= 0:
            raise ValueError("decoder_hz must be positive")
        if self.window_s < self.tick_s:
            raise ValueError("window_s must be >= one tick period")

    @property
    def tick_s(self) -> float:
        return 1.0 / self.decoder_hz


@dataclass(frozen=True)
class FeatureVector:
    """Per-channel counts over the trailing window ending at tick time t."""

    t: float
    rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rates", np.asarray(self.rates, dtype=float))


class OrderingError(ValueError):
    """An event arrived out of timestamp order on its channel."""


class RateExtractor:
    """Streaming spike buffer that emits one FeatureVector per tick.

    Single-owner state: push events, then emit at grid-aligned times. The
    buffer never retains events older than one window behind the latest emit.
    """

    def __init__(self, config: FeatureConfig):
        self.config = config
        self._buffers: list[deque[float]] = [deque() for _ in range(config.n_channels)]
        self._last_push: list[float] = [-np.inf] * config.n_channels
        self._last_emit: float | None = None

    def reset(self) -> None:
        for buf in self._buffers:
            buf.clear()
        self._last_push = [-np.inf] * self.config.n_channels
        self._last_emit = None

    def push(self, events: Iterable[SpikeEvent]) -> None:
        for ev in events:
            if not 0 <= ev.channel < self.config.n_channels:
                raise ValueError(f"channel {ev.channel} out of range")
            if ev.timestamp < self._last_push[ev.channel]:
                raise OrderingError(
                    f"event at t={ev.timestamp} precedes t={self._last_push[ev.channel]}"
                    f" on channel {ev.channel}"
                )
            self._last_push[ev.channel] = ev.timestamp
            self._buffers[ev.channel].append(ev.timestamp)

    def emit(self, t: float) -> FeatureVector:
        """Counts over (t - window, t]. t must sit on the tick grid, monotone."""
        tick = self.config.tick_s
        if abs(t / tick - round(t / tick)) > _GRID_TOL:
            raise ValueError(f"t={t} is not aligned to the {tick}s tick grid")
        if self._last_emit is not None and t < self._last_emit + tick - _GRID_TOL:
            raise ValueError(f"emit time {t} not at least one tick after {self._last_emit}")
        cutoff = t - self.config.window_s
        rates = np.empty(self.config.n_channels)
        for ch, buf in enumerate(self._buffers):
            while buf and buf[0] <= cutoff:
                buf.popleft()
            rates[ch] = sum(1 for ts in buf if ts <= t)
        self._last_emit = t
        return FeatureVector(t=t, rates=rates)


def count_in_window(
    events: Sequence[SpikeEvent], n_channels: int, t: float, window_s: float
) -> np.ndarray:
    """Naive O(N) recount of events in (t - window, t]; oracle for emit()."""
    rates = np.zeros(n_channels)
    for ev in events:
        if t - window_s < ev.timestamp <= t:
            rates[ev.channel] += 1
    return rates


def write_features_csv(vectors: Iterable[FeatureVector], fp: IO[str]) -> None:
    """tick_index, t, r_1..r_D with a mandatory header row."""
    vectors = list(vectors)
    n = vectors[0].rates.size if vectors else 0
    writer = csv.writer(fp)
    writer.writerow(["tick_index", "t"] + [f"r_{k + 1}" for k in range(n)])
    for i, vec in enumerate(vectors):
        writer.writerow([i, repr(vec.t)] + [repr(float(r)) for r in vec.rates])


def read_features_csv(fp: IO[str]) -> list[FeatureVector]:
    reader = csv.reader(fp)
    header = next(reader)
    if header[:2] != ["tick_index", "t"]:
        raise ValueError("missing feature CSV header")
    return [
        FeatureVector(t=float(row[1]), rates=np.array([float(v) for v in row[2:]]))
        for row in reader
    ]
