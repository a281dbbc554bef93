import math

import mpmath
import numpy as np
import pytest

from neuroloop.commands import Command
from neuroloop.metrics import (
    BudgetSpec,
    DegenerateVarianceError,
    budget,
    chance_trial_success,
    chance_trial_success_log10,
    match_fractions,
    summarize,
    summary_to_csv_rows,
    summary_to_json,
    t_test_unpaired,
)
from neuroloop.task import Phase, TickEntry, TrialRecord


def t_cdf_oracle_p(t: float, df: float) -> float:
    """Two-sided p via the regularized incomplete beta, independent of the
    implementation's special-function route."""
    x = df / (df + t * t)
    return float(mpmath.betainc(df / 2, mpmath.mpf(1) / 2, 0, x, regularized=True))


class TestChanceLevel:
    def test_paper_configuration(self):
        log10_p = chance_trial_success_log10(4, 0.7, 130)
        assert -54.9 <= log10_p <= -54.7
        p = chance_trial_success(4, 0.7, 130)
        assert p == pytest.approx(0.25 ** (0.7 * 130), rel=1e-9)
        assert f"{p:.0%}" == "0%"  # reported as about zero percent

    def test_underflow_clamp(self):
        assert chance_trial_success(4, 1.0, 600) == 0.0  # below the 1e-300 floor

    def test_zero_exponent(self):
        assert chance_trial_success(4, 0.0, 100) == 1.0

    def test_single_step(self):
        assert chance_trial_success(4, 1.0, 1) == pytest.approx(0.25)

    def test_strictly_decreasing_in_steps_and_fraction(self):
        logs = [chance_trial_success_log10(4, 0.7, n) for n in (1, 5, 50, 130)]
        assert all(a > b for a, b in zip(logs, logs[1:]))
        logs = [chance_trial_success_log10(4, f, 130) for f in (0.1, 0.4, 0.7, 1.0)]
        assert all(a > b for a, b in zip(logs, logs[1:]))

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            chance_trial_success(1, 0.5, 10)
        with pytest.raises(ValueError):
            chance_trial_success(4, 1.5, 10)


class TestTTest:
    def test_equal_samples_give_t_zero_p_one(self):
        t, p = t_test_unpaired([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])
        assert t == 0.0
        assert p == pytest.approx(1.0)

    def test_large_shift_tiny_p(self):
        t, p = t_test_unpaired([1, 2, 3, 4, 5], [11, 12, 13, 14, 15])
        assert p < 0.001
        assert p == pytest.approx(t_cdf_oracle_p(t, 8), rel=1e-9)

    def test_matches_independent_cdf_oracle(self, rng):
        for _ in range(25):
            a = rng.normal(0, 1, rng.integers(3, 12))
            b = rng.normal(rng.normal(), 1, rng.integers(3, 12))
            t, p = t_test_unpaired(a, b)
            assert p == pytest.approx(t_cdf_oracle_p(t, len(a) + len(b) - 2), rel=1e-9)

    def test_symmetry(self, rng):
        a, b = rng.normal(0, 1, 10), rng.normal(0.5, 1, 12)
        t_ab, p_ab = t_test_unpaired(a, b)
        t_ba, p_ba = t_test_unpaired(b, a)
        assert t_ab == pytest.approx(-t_ba)
        assert p_ab == pytest.approx(p_ba)

    def test_degenerate_variance_raises(self):
        with pytest.raises(DegenerateVarianceError):
            t_test_unpaired([3.0, 3.0, 3.0], [3.0, 3.0])

    def test_tiny_samples_rejected(self):
        with pytest.raises(ValueError):
            t_test_unpaired([1.0], [1.0, 2.0])

    def test_welch_flag(self, rng):
        a, b = rng.normal(0, 1, 10), rng.normal(0, 5, 40)
        t_w, p_w = t_test_unpaired(a, b, welch=True)
        assert math.isfinite(t_w) and 0 <= p_w <= 1

    def test_null_calibration_smoke(self, rng):
        # full 1e4-draw Kolmogorov-Smirnov check lives in the acceptance suite
        ps = []
        for _ in range(500):
            ps.append(t_test_unpaired(rng.normal(0, 1, 8), rng.normal(0, 1, 8))[1])
        ps = np.sort(ps)
        ks = np.max(np.abs(ps - (np.arange(1, 501) - 0.5) / 500))
        assert ks < 0.08


def synthetic_record(direction, dur, succeeded=True, match=1.0, trial_id=0):
    entries = []
    n_match = round(match * dur)
    for k in range(1, dur + 1):
        decoded = Command.FORWARD if k <= n_match else Command.STOP
        entries.append(
            TickEntry(k, decoded, Command.FORWARD, Command.FORWARD, 0.0, float(k))
        )
    return TrialRecord(
        trial_id=trial_id,
        direction=direction,
        entries=entries,
        outcome=Phase.SUCCEEDED if succeeded else Phase.FAILED,
    )


def record_set(durations_by_dir, jitter=(0, 1, 2)):
    records = []
    for d, base in durations_by_dir.items():
        for i, j in enumerate(jitter):
            records.append(synthetic_record(d, base + j, trial_id=i))
    return records


class TestSummarize:
    def test_identical_sets_give_unit_ratios_and_zero_t(self):
        hand = record_set({Command.FORWARD: 20, Command.LEFT: 22, Command.RIGHT: 24})
        neural = record_set({Command.FORWARD: 20, Command.LEFT: 22, Command.RIGHT: 24})
        summary = summarize(hand, neural)
        for comp in summary.comparisons.values():
            assert comp.speed_ratio == pytest.approx(1.0)
            assert comp.t == pytest.approx(0.0)
        assert summary.success_rate_ratio == pytest.approx(1.0)

    def test_known_speed_ratio(self):
        # neural forward durations exactly 1/0.79 of hand: speed ratio 0.79
        hand = record_set({Command.FORWARD: 100}, jitter=(0, 2, 4))
        neural = []
        for i, r in enumerate(hand):
            neural.append(
                synthetic_record(Command.FORWARD, round(r.duration_ticks / 0.79), trial_id=i)
            )
        # lateral directions need at least one trial each
        for d in (Command.LEFT, Command.RIGHT):
            hand.append(synthetic_record(d, 20))
            neural.append(synthetic_record(d, 20))
        summary = summarize(hand, neural)
        assert summary.comparisons[Command.FORWARD].speed_ratio == pytest.approx(0.79, abs=0.005)

    def test_matches_direct_recomputation(self, rng):
        hand, neural = [], []
        tid = 0
        for d in (Command.FORWARD, Command.LEFT, Command.RIGHT):
            for _ in range(10):
                hand.append(synthetic_record(d, int(rng.integers(18, 40)), trial_id=tid))
                neural.append(
                    synthetic_record(
                        d, int(rng.integers(18, 60)), succeeded=bool(rng.random() < 0.8),
                        trial_id=tid,
                    )
                )
                tid += 1
        summary = summarize(hand, neural, decoder_hz=10.0)
        for d in (Command.FORWARD, Command.LEFT, Command.RIGHT):
            durs = [r.duration_ticks / 10.0 for r in neural if r.direction == d and r.succeeded]
            stats = summary.per_direction["neural"][d]
            if durs:
                assert stats.mean_duration_s == pytest.approx(np.mean(durs), rel=1e-12)
            assert stats.n_success == len(durs)

    def test_direction_without_success_flagged_absent(self):
        hand = record_set({Command.FORWARD: 20, Command.LEFT: 20, Command.RIGHT: 20})
        neural = record_set({Command.FORWARD: 20, Command.LEFT: 20})
        neural += [
            synthetic_record(Command.RIGHT, 130, succeeded=False, trial_id=9),
        ]
        summary = summarize(hand, neural)
        stats = summary.per_direction["neural"][Command.RIGHT]
        assert stats.mean_duration_s is None
        assert stats.n_success == 0
        rows = summary_to_csv_rows(summary)
        right_row = next(r for r in rows if r[0] == "neural" and r[1] == "Right")
        assert right_row[5] == ""  # absent, not zero

    def test_permutation_invariance(self, rng):
        hand = record_set({Command.FORWARD: 20, Command.LEFT: 25, Command.RIGHT: 30})
        neural = record_set({Command.FORWARD: 22, Command.LEFT: 28, Command.RIGHT: 33})
        base = summary_to_json(summarize(hand, neural))
        shuffled = summary_to_json(
            summarize(
                list(rng.permutation(np.array(hand, dtype=object))),
                list(rng.permutation(np.array(neural, dtype=object))),
            )
        )
        assert base == shuffled

    def test_empty_mode_rejected(self):
        with pytest.raises(ValueError):
            summarize([], [synthetic_record(Command.FORWARD, 20)])


class TestBudget:
    def test_raw_rate_reproduces_reference(self):
        assert budget(BudgetSpec())["raw_bps"] == 24_000_000.0

    def test_decoded_rate_reproduces_reference(self):
        assert budget(BudgetSpec())["decoded_bps"] == 3_000.0

    def test_power_adds_up(self):
        result = budget(BudgetSpec())
        assert result["feature_uw"] == pytest.approx(4.0)
        assert result["total_added_uw"] == pytest.approx(4.71)

    def test_linearity_in_each_argument(self):
        base = budget(BudgetSpec())
        doubled_fields = {
            "electrodes": 200,
            "sampling_hz": 40_000.0,
            "adc_bits": 24,
        }
        for name, value in doubled_fields.items():
            spec = BudgetSpec(**{name: value})
            assert budget(spec)["raw_bps"] == 2 * base["raw_bps"]

    def test_negative_field_rejected(self):
        with pytest.raises(ValueError):
            BudgetSpec(electrodes=-1)


def test_match_fractions_split():
    good = synthetic_record(Command.FORWARD, 20, succeeded=True, match=0.9)
    bad = synthetic_record(Command.FORWARD, 130, succeeded=False, match=0.3)
    ok, fail = match_fractions([good, bad])
    assert ok == [pytest.approx(0.9)]
    assert fail == [pytest.approx(0.3)]
