"""Closed-loop orchestration: encode -> extract -> decode -> act at the
decoder rate, plus the training paradigm (passive observation sessions, an
assisted session, ridge retrains) and the benchmarking session modes.

Simulated ticks are authoritative; wall-clock pacing is an optional flag so
interactive sessions feel live while tests stay clock-independent.
"""

from __future__ import annotations

import copy
import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Protocol, Sequence

import numpy as np
from sklearn.exceptions import NotFittedError

from .commands import Command
from .elm import ElmDecoder
from .features import FeatureConfig, RateExtractor
from .neural import IntentEncoder
from .seeding import child_rng, child_seed
from .task import (
    ArenaState,
    Phase,
    TrialConfig,
    TrialRecord,
    TickEntry,
    oracle_policy,
    spawn_trial,
    step,
)

log = logging.getLogger("neuroloop.engine")

DEFAULT_TRAIN_TRIALS = 20
DEFAULT_BENCH_TRIALS = 60
DEFAULT_ASSIST_P = 0.5


class SessionMode(Enum):
    PASSIVE = "passive"
    ASSISTED = "assisted"
    NEURAL = "neural"
    HAND_SCRIPTED = "hand_scripted"
    HAND_INTERACTIVE = "hand_interactive"


MODEL_DRIVEN_MODES = (SessionMode.ASSISTED, SessionMode.NEURAL)


@dataclass(frozen=True)
class EncoderParams:
    """Synthetic-subject knobs: channel count, tuning, and reaction lag."""

    n_channels: int = 64
    baseline_hz: float = 5.0
    modulation_hz: float = 45.0
    deterministic: bool = False
    reaction_lag_ticks: int = 1

    def __post_init__(self):
        if self.reaction_lag_ticks < 0:
            raise ValueError("reaction_lag_ticks must be non-negative")


@dataclass(frozen=True)
class SessionConfig:
    mode: SessionMode
    trials: int = DEFAULT_TRAIN_TRIALS
    assist_p: float = DEFAULT_ASSIST_P

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 <= self.assist_p <= 1.0:
            raise ValueError("assist_p must be in [0, 1]")


@dataclass(frozen=True)
class StateFrame:
    """One tick of telemetry, broadcast to observers; immutable snapshot."""

    session_id: str
    mode: str
    trial_index: int
    tick: int
    x: float
    y: float
    target_x: float
    target_y: float
    target_side: float
    phase: str
    hold_ticks: int
    cmd_executed: str | None
    cmd_decoded: str | None
    cmd_oracle: str | None
    successes: int

    def to_json(self) -> dict:
        return {
            "type": "state",
            "session": self.session_id,
            "mode": self.mode,
            "trial": self.trial_index,
            "tick": self.tick,
            "x": self.x,
            "y": self.y,
            "target_x": self.target_x,
            "target_y": self.target_y,
            "target_side": self.target_side,
            "phase": self.phase,
            "hold_ticks": self.hold_ticks,
            "cmd_exec": self.cmd_executed,
            "cmd_dec": self.cmd_decoded,
            "cmd_oracle": self.cmd_oracle,
            "successes": self.successes,
        }


class CommandSource(Protocol):
    """Human-input surrogate sampled once per tick (latest wins)."""

    def poll(self) -> Command: ...


class SessionControl(Protocol):
    """Run/pause/abort switch checked at tick boundaries."""

    def wait_runnable(self) -> str: ...  # "run" or "abort"


def blend_assist(
    decoded: Command, oracle: Command, p: float, rng: np.random.Generator
) -> Command:
    """Per-tick assistance: the oracle command replaces the decoded one with
    probability p. The Bernoulli draw always consumes the stream."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    return oracle if rng.random() < p else decoded


def _wire(cmd: Command | None) -> str | None:
    return None if cmd is None else cmd.wire_name


class TrialRun:
    """Single trial advanced one tick at a time by the session loop."""

    def __init__(
        self,
        *,
        trial_id: int,
        initial: ArenaState,
        mode: SessionMode,
        trial_config: TrialConfig,
        encoder: IntentEncoder,
        extractor: RateExtractor,
        model: ElmDecoder | None,
        assist_p: float,
        assist_rng: np.random.Generator | None,
        reaction_lag_ticks: int,
        command_source: CommandSource | None,
    ):
        self.mode = mode
        self.trial_config = trial_config
        self.encoder = encoder
        self.extractor = extractor
        self.model = model
        self.assist_p = assist_p
        self.assist_rng = assist_rng
        self.lag = reaction_lag_ticks
        self.command_source = command_source
        self.states: list[ArenaState] = [initial]
        self.record = TrialRecord(trial_id=trial_id, direction=initial.direction)
        self.extractor.reset()

    @property
    def state(self) -> ArenaState:
        return self.states[-1]

    @property
    def done(self) -> bool:
        return self.state.phase is not Phase.RUNNING

    def tick(self) -> Command:
        """One full pipeline pass; returns the executed command."""
        if self.done:
            raise RuntimeError("trial already finished")
        n = self.state.tick + 1
        tick_s = self.extractor.config.tick_s
        t = n * tick_s

        intent_state = self.states[max(0, n - 1 - self.lag)]
        intent = oracle_policy(intent_state, self.trial_config)
        events = self.encoder.encode(intent, (n - 1) * tick_s, t)
        self.extractor.push(events)
        features = self.extractor.emit(t)

        decoded: Command | None = None
        if self.model is not None and self.model.fitted_:
            decoded = self.model.predict_command(features.rates)

        oracle_now = oracle_policy(self.state, self.trial_config)
        if self.mode in (SessionMode.PASSIVE, SessionMode.HAND_SCRIPTED):
            executed = oracle_now
        elif self.mode is SessionMode.ASSISTED:
            assert decoded is not None and self.assist_rng is not None
            executed = blend_assist(decoded, oracle_now, self.assist_p, self.assist_rng)
        elif self.mode is SessionMode.NEURAL:
            assert decoded is not None
            executed = decoded
        else:  # HAND_INTERACTIVE
            assert self.command_source is not None
            executed = self.command_source.poll()

        new_state = step(self.state, executed, self.trial_config)
        self.states.append(new_state)
        self.record.entries.append(
            TickEntry(
                tick=new_state.tick,
                cmd_decoded=decoded,
                cmd_executed=executed,
                cmd_oracle=oracle_now,
                x=new_state.x,
                y=new_state.y,
                features=features.rates,
            )
        )
        if self.done:
            self.record.outcome = new_state.phase
        return executed


@dataclass
class TrainingPipelineState:
    """Everything the training paradigm produces."""

    session_records: list[list[TrialRecord]]
    m_int: ElmDecoder | None = None
    m_f: ElmDecoder | None = None


def training_arrays(records: Sequence[TrialRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Stack per-tick features and oracle labels from successful trials only."""
    rows, labels = [], []
    for record in records:
        if not record.succeeded:
            continue
        for entry in record.entries:
            if entry.features is None:
                raise ValueError("record lacks in-memory features; cannot train from logs")
            rows.append(entry.features)
            labels.append(int(entry.cmd_oracle))
    if not rows:
        raise ValueError("no successful trials available for training")
    return np.asarray(rows, dtype=float), np.asarray(labels, dtype=int)


class ClosedLoopEngine:
    """Owns the per-session pipeline wiring and runs trials to completion."""

    def __init__(
        self,
        *,
        encoder_params: EncoderParams = EncoderParams(),
        feature_config: FeatureConfig | None = None,
        trial_config: TrialConfig = TrialConfig(),
        master_seed: int = 0,
        realtime: bool = False,
        session_id: str = "session",
    ):
        if feature_config is None:
            feature_config = FeatureConfig(
                n_channels=encoder_params.n_channels, decoder_hz=trial_config.decoder_hz
            )
        if feature_config.n_channels != encoder_params.n_channels:
            raise ValueError("encoder and feature channel counts differ")
        if abs(feature_config.decoder_hz - trial_config.decoder_hz) > 1e-12:
            raise ValueError("feature and task decoder rates differ")
        self.encoder_params = encoder_params
        self.feature_config = feature_config
        self.trial_config = trial_config
        self.master_seed = master_seed
        self.realtime = realtime
        self.session_id = session_id
        self.successes = 0

    def _check_model(self, mode: SessionMode, model: ElmDecoder | None) -> None:
        if mode in MODEL_DRIVEN_MODES:
            if model is None:
                raise ValueError(f"{mode.value} mode requires a decoder model")
            if not model.fitted_:
                raise NotFittedError(f"{mode.value} mode requires a trained decoder")
            if model.n_inputs != self.encoder_params.n_channels:
                raise ValueError("decoder input width differs from channel count")

    def run_session(
        self,
        session: SessionConfig,
        model: ElmDecoder | None = None,
        *,
        session_name: str = "s0",
        command_source: CommandSource | None = None,
        frame_cb: Callable[[StateFrame], None] | None = None,
        control: SessionControl | None = None,
        tick_gate: Callable[[], None] | None = None,
    ) -> list[TrialRecord]:
        """Run every trial of one session; records come back in order."""
        self._check_model(session.mode, model)
        if session.mode is SessionMode.HAND_INTERACTIVE:
            ready = getattr(command_source, "is_ready", None)
            if command_source is None or (ready is not None and not ready()):
                raise RuntimeError("interactive session refused: no connected operator")

        seed = self.master_seed
        dir_rng = child_rng(seed, f"{session_name}.directions")
        assist_rng = child_rng(seed, f"{session_name}.assist")
        encoder = IntentEncoder(
            n_channels=self.encoder_params.n_channels,
            baseline_hz=self.encoder_params.baseline_hz,
            modulation_hz=self.encoder_params.modulation_hz,
            seed=child_seed(seed, f"{session_name}.encoder"),
            deterministic=self.encoder_params.deterministic,
        )
        extractor = RateExtractor(self.feature_config)

        records: list[TrialRecord] = []
        session_successes = 0
        for index in range(session.trials):
            run = TrialRun(
                trial_id=index,
                initial=spawn_trial(self.trial_config, dir_rng),
                mode=session.mode,
                trial_config=self.trial_config,
                encoder=encoder,
                extractor=extractor,
                model=model,
                assist_p=session.assist_p,
                assist_rng=assist_rng,
                reaction_lag_ticks=self.encoder_params.reaction_lag_ticks,
                command_source=command_source,
            )
            if frame_cb is not None:
                frame_cb(self._frame(session, run, index, session_successes, None))
            start = time.monotonic()
            aborted = False
            while not run.done:
                if control is not None and control.wait_runnable() == "abort":
                    aborted = True
                    break
                if tick_gate is not None:
                    tick_gate()
                try:
                    executed = run.tick()
                except FloatingPointError as exc:
                    log.warning("numeric error at tick %d: %s; trial failed", run.state.tick + 1, exc)
                    run.record.outcome = Phase.FAILED
                    break
                if frame_cb is not None:
                    frame_cb(self._frame(session, run, index, session_successes, executed))
                if self.realtime:
                    target = start + run.state.tick * self.feature_config.tick_s
                    delay = target - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
            if aborted:
                break
            if run.record.succeeded:
                session_successes += 1
                self.successes += 1
            records.append(run.record)
        return records

    def _frame(
        self,
        session: SessionConfig,
        run: TrialRun,
        trial_index: int,
        successes: int,
        executed: Command | None,
    ) -> StateFrame:
        state = run.state
        last = run.record.entries[-1] if run.record.entries else None
        tally = successes + (1 if state.phase is Phase.SUCCEEDED else 0)
        return StateFrame(
            session_id=self.session_id,
            mode=session.mode.value,
            trial_index=trial_index,
            tick=state.tick,
            x=state.x,
            y=state.y,
            target_x=state.target_x,
            target_y=state.target_y,
            target_side=state.target_side,
            phase=state.phase.value,
            hold_ticks=state.hold_ticks,
            cmd_executed=_wire(executed),
            cmd_decoded=_wire(last.cmd_decoded if last else None),
            cmd_oracle=_wire(last.cmd_oracle if last else None),
            successes=tally,
        )

    def default_training_plan(self, trials: int = DEFAULT_TRAIN_TRIALS, assist_p: float = DEFAULT_ASSIST_P) -> list[SessionConfig]:
        return [
            SessionConfig(SessionMode.PASSIVE, trials),
            SessionConfig(SessionMode.PASSIVE, trials),
            SessionConfig(SessionMode.ASSISTED, trials, assist_p),
        ]

    def train_pipeline(
        self,
        model: ElmDecoder,
        plan: Sequence[SessionConfig] | None = None,
        frame_cb: Callable[[StateFrame], None] | None = None,
    ) -> TrainingPipelineState:
        """Passive sessions -> intermediate model -> assisted session -> final
        model trained on every successful trial of every session."""
        if model.fitted_:
            raise ValueError("train_pipeline expects an untrained decoder")
        if plan is None:
            plan = self.default_training_plan()
        first_assisted = next(
            (i for i, s in enumerate(plan) if s.mode is not SessionMode.PASSIVE), len(plan)
        )
        if first_assisted == 0:
            raise ValueError("training plan must start with a passive session")
        if any(s.mode not in (SessionMode.PASSIVE, SessionMode.ASSISTED) for s in plan):
            raise ValueError("training plan may only contain passive and assisted sessions")

        state = TrainingPipelineState(session_records=[])
        for i, session in enumerate(plan[:first_assisted]):
            records = self.run_session(
                session, model=None, session_name=f"train.s{i + 1}", frame_cb=frame_cb
            )
            state.session_records.append(records)

        observed = [r for session in state.session_records for r in session]
        X, y = training_arrays(observed)
        state.m_int = copy.deepcopy(model).fit(X, y)

        for i, session in enumerate(plan[first_assisted:], start=first_assisted):
            records = self.run_session(
                session, model=state.m_int, session_name=f"train.s{i + 1}", frame_cb=frame_cb
            )
            state.session_records.append(records)

        everything = [r for session in state.session_records for r in session]
        X, y = training_arrays(everything)
        state.m_f = copy.deepcopy(model).fit(X, y)
        return state

    def run_benchmark(
        self,
        model: ElmDecoder,
        trials: int = DEFAULT_BENCH_TRIALS,
        frame_cb: Callable[[StateFrame], None] | None = None,
    ) -> tuple[list[TrialRecord], list[TrialRecord]]:
        """Scripted-hand trials and neural-control trials, in that order."""
        hand = self.run_session(
            SessionConfig(SessionMode.HAND_SCRIPTED, trials),
            model=model,
            session_name="bench.hand",
            frame_cb=frame_cb,
        )
        neural = self.run_session(
            SessionConfig(SessionMode.NEURAL, trials),
            model=model,
            session_name="bench.neural",
            frame_cb=frame_cb,
        )
        return hand, neural
