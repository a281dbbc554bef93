"""Evaluation quantities: chance level, hand-vs-neural benchmarking, the
unpaired two-sample t-test, and the implant bandwidth/power budget."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .commands import Command
from .task import TARGET_DIRECTIONS, TrialRecord

PROB_CLAMP = 1e-300  # probabilities below this report as 0.0
INSIGNIFICANT_P = 0.01  # p above this is reported "statistically insignificant"


class DegenerateVarianceError(ValueError):
    """Pooled variance is zero; the samples are identical up to location."""


def chance_trial_success_log10(n_classes: int, match_fraction: float, n_steps: int) -> float:
    """log10 of (1/n_classes) ** (match_fraction * n_steps)."""
    if n_classes < 2:
        raise ValueError("n_classes must be >= 2")
    if not 0.0 <= match_fraction <= 1.0:
        raise ValueError("match_fraction must be in [0, 1]")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    return -match_fraction * n_steps * math.log10(n_classes)


def chance_trial_success(n_classes: int, match_fraction: float, n_steps: int) -> float:
    """Probability that random decoding matches the per-tick criterion over a
    full trial; clamped to 0 below the underflow floor."""
    log10_p = chance_trial_success_log10(n_classes, match_fraction, n_steps)
    if log10_p < math.log10(PROB_CLAMP):
        return 0.0
    return 10.0**log10_p


def t_test_unpaired(
    sample_a: Sequence[float], sample_b: Sequence[float], welch: bool = False
) -> tuple[float, float]:
    """Two-sample t-test, pooled variance by default (Welch behind the flag).

    Returns (t, two-sided p). Raises DegenerateVarianceError when the
    variance estimate is zero; callers report such pairs as "identical".
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if welch:
        sa2, sb2 = va / a.size, vb / b.size
        denom2 = sa2 + sb2
        if denom2 == 0:
            raise DegenerateVarianceError("zero variance in both samples")
        df = denom2**2 / (sa2**2 / (a.size - 1) + sb2**2 / (b.size - 1))
        se = math.sqrt(denom2)
    else:
        df = a.size + b.size - 2
        pooled = ((a.size - 1) * va + (b.size - 1) * vb) / df
        if pooled == 0:
            raise DegenerateVarianceError("pooled variance is zero")
        se = math.sqrt(pooled * (1.0 / a.size + 1.0 / b.size))
    t = (a.mean() - b.mean()) / se
    p = 2.0 * float(special.stdtr(df, -abs(t)))
    return float(t), p


@dataclass(frozen=True)
class DirectionStats:
    """Successful-trial duration statistics for one mode and direction."""

    n_trials: int
    n_success: int
    mean_duration_s: float | None
    std_duration_s: float | None

    @property
    def success_rate(self) -> float:
        return self.n_success / self.n_trials if self.n_trials else float("nan")


@dataclass
class Comparison:
    """Hand-vs-neural duration comparison for one direction (or pooled)."""

    speed_ratio: float | None  # neural speed / hand speed = hand dur / neural dur
    t: float | None
    p: float | None
    note: str | None = None

    @property
    def significant(self) -> bool | None:
        if self.p is None:
            return None
        return self.p <= INSIGNIFICANT_P


@dataclass
class BenchmarkSummary:
    per_direction: dict[str, dict[Command, DirectionStats]] = field(default_factory=dict)
    overall: dict[str, DirectionStats] = field(default_factory=dict)
    comparisons: dict[Command, Comparison] = field(default_factory=dict)
    overall_comparison: Comparison | None = None
    success_rate_ratio: float | None = None  # neural rate / hand rate


def _direction_stats(records: Sequence[TrialRecord], tick_s: float) -> DirectionStats:
    # stats in tick space, scaled afterwards: identical integer durations
    # then report an exact zero spread
    ticks = [r.duration_ticks for r in records if r.succeeded]
    return DirectionStats(
        n_trials=len(records),
        n_success=len(ticks),
        mean_duration_s=float(np.mean(ticks)) * tick_s if ticks else None,
        std_duration_s=float(np.std(ticks, ddof=1)) * tick_s if len(ticks) > 1 else None,
    )


def _compare(hand: Sequence[float], neural: Sequence[float]) -> Comparison:
    ratio = None
    if hand and neural:
        ratio = float(np.mean(hand) / np.mean(neural))
    if len(hand) >= 2 and len(neural) >= 2:
        try:
            t, p = t_test_unpaired(hand, neural)
            return Comparison(speed_ratio=ratio, t=t, p=p)
        except DegenerateVarianceError:
            return Comparison(speed_ratio=ratio, t=None, p=None, note="identical")
    return Comparison(speed_ratio=ratio, t=None, p=None, note="insufficient data")


def summarize(
    hand_records: Sequence[TrialRecord],
    neural_records: Sequence[TrialRecord],
    decoder_hz: float = 10.0,
) -> BenchmarkSummary:
    """Per-direction and overall duration stats, speed ratios and t-tests.

    Speed is 1/duration, so the per-direction neural/hand speed ratio is the
    hand mean duration over the neural mean duration, computed on successful
    trials only. Directions with no successes carry None statistics.
    """
    if not hand_records or not neural_records:
        raise ValueError("each mode needs at least one trial")
    tick_s = 1.0 / decoder_hz
    modes = {"hand": list(hand_records), "neural": list(neural_records)}
    summary = BenchmarkSummary()
    for mode, records in modes.items():
        summary.per_direction[mode] = {
            d: _direction_stats([r for r in records if r.direction == d], tick_s)
            for d in TARGET_DIRECTIONS
        }
        summary.overall[mode] = _direction_stats(records, tick_s)
    for d in TARGET_DIRECTIONS:
        hand_dur = [r.duration_ticks * tick_s for r in modes["hand"] if r.direction == d and r.succeeded]
        neur_dur = [r.duration_ticks * tick_s for r in modes["neural"] if r.direction == d and r.succeeded]
        summary.comparisons[d] = _compare(hand_dur, neur_dur)
    summary.overall_comparison = _compare(
        [r.duration_ticks * tick_s for r in modes["hand"] if r.succeeded],
        [r.duration_ticks * tick_s for r in modes["neural"] if r.succeeded],
    )
    hand_rate = summary.overall["hand"].success_rate
    neural_rate = summary.overall["neural"].success_rate
    summary.success_rate_ratio = neural_rate / hand_rate if hand_rate else None
    return summary


def summary_to_json(summary: BenchmarkSummary) -> dict:
    def stats(s: DirectionStats) -> dict:
        return {
            "n_trials": s.n_trials,
            "n_success": s.n_success,
            "success_rate": s.success_rate,
            "mean_duration_s": s.mean_duration_s,
            "std_duration_s": s.std_duration_s,
        }

    def comp(c: Comparison | None) -> dict | None:
        if c is None:
            return None
        return {"speed_ratio": c.speed_ratio, "t": c.t, "p": c.p, "note": c.note}

    return {
        "per_direction": {
            mode: {d.wire_name: stats(s) for d, s in per.items()}
            for mode, per in summary.per_direction.items()
        },
        "overall": {mode: stats(s) for mode, s in summary.overall.items()},
        "comparisons": {d.wire_name: comp(c) for d, c in summary.comparisons.items()},
        "overall_comparison": comp(summary.overall_comparison),
        "success_rate_ratio": summary.success_rate_ratio,
    }


def summary_to_csv_rows(summary: BenchmarkSummary) -> list[list]:
    """One row per mode x direction, plus overall rows; empty cells for absent
    means (never zeros)."""
    rows = [
        [
            "mode", "direction", "n_trials", "n_success", "success_rate",
            "mean_duration_s", "std_duration_s", "speed_ratio", "t", "p",
        ]
    ]
    for mode, per in summary.per_direction.items():
        for d, s in per.items():
            c = summary.comparisons.get(d)
            rows.append(
                [
                    mode, d.wire_name, s.n_trials, s.n_success,
                    repr(s.success_rate),
                    "" if s.mean_duration_s is None else repr(s.mean_duration_s),
                    "" if s.std_duration_s is None else repr(s.std_duration_s),
                    "" if c is None or c.speed_ratio is None else repr(c.speed_ratio),
                    "" if c is None or c.t is None else repr(c.t),
                    "" if c is None or c.p is None else repr(c.p),
                ]
            )
    for mode, s in summary.overall.items():
        c = summary.overall_comparison
        rows.append(
            [
                mode, "all", s.n_trials, s.n_success,
                repr(s.success_rate),
                "" if s.mean_duration_s is None else repr(s.mean_duration_s),
                "" if s.std_duration_s is None else repr(s.std_duration_s),
                "" if c is None or c.speed_ratio is None else repr(c.speed_ratio),
                "" if c is None or c.t is None else repr(c.t),
                "" if c is None or c.p is None else repr(c.p),
            ]
        )
    return rows


@dataclass(frozen=True)
class BudgetSpec:
    """Inputs to the implant bandwidth/power arithmetic."""

    electrodes: int = 100
    sampling_hz: float = 20_000.0
    adc_bits: int = 12
    dof: int = 6
    cmd_bits: int = 10
    cmd_rate_hz: float = 50.0
    feature_nw_per_channel: float = 40.0
    decoder_uw: float = 0.71

    def __post_init__(self):
        for name in (
            "electrodes", "sampling_hz", "adc_bits", "dof",
            "cmd_bits", "cmd_rate_hz", "feature_nw_per_channel", "decoder_uw",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def budget(spec: BudgetSpec) -> dict[str, float]:
    """Raw vs decoded data rates and the added in-implant power."""
    raw_bps = spec.electrodes * spec.sampling_hz * spec.adc_bits
    decoded_bps = spec.dof * spec.cmd_bits * spec.cmd_rate_hz
    feature_uw = spec.electrodes * spec.feature_nw_per_channel / 1000.0
    return {
        "raw_bps": float(raw_bps),
        "decoded_bps": float(decoded_bps),
        "feature_uw": float(feature_uw),
        "total_added_uw": float(feature_uw + spec.decoder_uw),
    }


def match_fractions(records: Sequence[TrialRecord]) -> tuple[list[float], list[float]]:
    """(successful, failed) per-trial decoded-vs-oracle match fractions."""
    ok = [r.match_fraction() for r in records if r.succeeded]
    bad = [r.match_fraction() for r in records if not r.succeeded]
    return ok, bad
