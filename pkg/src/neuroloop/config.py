"""Run configuration: one JSON document describing the whole rig.

Validation collects dotted-path diagnostics (``model.hidden: must be >= 1``)
so a bad config is rejected before any session runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .elm import AnalogConfig, ElmDecoder
from .engine import (
    DEFAULT_ASSIST_P,
    DEFAULT_BENCH_TRIALS,
    DEFAULT_TRAIN_TRIALS,
    EncoderParams,
    SessionConfig,
    SessionMode,
)
from .features import FeatureConfig
from .task import TrialConfig


class ConfigError(ValueError):
    """Invalid run configuration; message carries one diagnostic per line."""


@dataclass
class RunConfig:
    seed: int = 0
    channels: int = 64
    tick_hz: float = 10.0
    encoder: EncoderParams = field(default_factory=EncoderParams)
    features: FeatureConfig = field(default_factory=lambda: FeatureConfig(n_channels=64))
    model_hidden: int = 50
    model_ridge: float = 0.1
    analog: AnalogConfig | None = None
    task: TrialConfig = field(default_factory=TrialConfig)
    plan: list[SessionConfig] = field(default_factory=list)
    benchmark_trials: int = DEFAULT_BENCH_TRIALS
    serve_session: SessionConfig | None = None
    serve_model_path: str | None = None
    out_dir: str | None = None

    def build_decoder(self) -> ElmDecoder:
        return ElmDecoder(
            n_inputs=self.channels,
            n_hidden=self.model_hidden,
            ridge=self.model_ridge,
            analog=self.analog,
            random_state=self.seed,
        )

    def to_json(self) -> dict:
        doc = {
            "seed": self.seed,
            "channels": self.channels,
            "tick_hz": self.tick_hz,
            "encoder": {
                "baseline_hz": self.encoder.baseline_hz,
                "modulation_hz": self.encoder.modulation_hz,
                "deterministic": self.encoder.deterministic,
                "reaction_lag_ticks": self.encoder.reaction_lag_ticks,
            },
            "features": {"window_s": self.features.window_s},
            "model": {
                "hidden": self.model_hidden,
                "ridge": self.model_ridge,
                "analog": None
                if self.analog is None
                else {
                    "mismatch_sigma": self.analog.mismatch_sigma,
                    "counter_bits": self.analog.counter_bits,
                    "gain": self.analog.gain,
                    "signed": self.analog.signed,
                },
            },
            "task": {
                "timeout_s": self.task.timeout_s,
                "hold_s": self.task.hold_s,
                "target_side": self.task.target_side,
                "target_distance": self.task.target_distance,
                "step_size": self.task.step_size,
                "rotation_mode": self.task.rotation_mode,
            },
            "sessions": {
                "plan": [
                    {"mode": s.mode.value, "trials": s.trials, "p": s.assist_p}
                    for s in self.plan
                ],
                "benchmark_trials": self.benchmark_trials,
            },
        }
        if self.serve_session is not None:
            doc["sessions"]["serve"] = {
                "mode": self.serve_session.mode.value,
                "trials": self.serve_session.trials,
                "p": self.serve_session.assist_p,
                "model": self.serve_model_path,
            }
        if self.out_dir is not None:
            doc["out_dir"] = self.out_dir
        return doc


class _Reader:
    """Pulls typed values out of nested dicts, accumulating diagnostics."""

    def __init__(self, doc: dict):
        self.doc = doc
        self.errors: list[str] = []

    def get(self, path: str, kind, default=None, required=False):
        node = self.doc
        parts = path.split(".")
        for part in parts[:-1]:
            node = node.get(part, {}) if isinstance(node, dict) else {}
        value = node.get(parts[-1]) if isinstance(node, dict) else None
        if value is None:
            if required:
                self.errors.append(f"{path}: required field missing")
            return default
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is int and isinstance(value, bool):
            self.errors.append(f"{path}: expected {kind.__name__}, got bool")
            return default
        if not isinstance(value, kind):
            self.errors.append(f"{path}: expected {kind.__name__}, got {type(value).__name__}")
            return default
        return value

    def fail(self, path: str, message: str) -> None:
        self.errors.append(f"{path}: {message}")


_MODE_NAMES = {m.value: m for m in SessionMode}


def _parse_session(reader: _Reader, node: dict, path: str) -> SessionConfig | None:
    mode_name = node.get("mode")
    if mode_name not in _MODE_NAMES:
        reader.fail(f"{path}.mode", f"must be one of {sorted(_MODE_NAMES)}")
        return None
    trials = node.get("trials", DEFAULT_TRAIN_TRIALS)
    p = node.get("p", DEFAULT_ASSIST_P)
    try:
        return SessionConfig(_MODE_NAMES[mode_name], int(trials), float(p))
    except (TypeError, ValueError) as exc:
        reader.fail(path, str(exc))
        return None


def parse_config(doc: dict) -> RunConfig:
    """Validate a parsed JSON document; raises ConfigError with diagnostics."""
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a JSON object")
    r = _Reader(doc)
    seed = r.get("seed", int, 0)
    channels = r.get("channels", int, 64)
    tick_hz = r.get("tick_hz", float, 10.0)

    enc_channels = r.get("encoder.channels", int, channels)
    feat_channels = r.get("features.channels", int, channels)
    model_inputs = r.get("model.inputs", int, channels)
    if len({enc_channels, feat_channels, model_inputs}) > 1:
        r.fail(
            "channels",
            f"inconsistent widths: encoder={enc_channels}, features={feat_channels}, "
            f"model={model_inputs}",
        )

    encoder = None
    features = None
    task = None
    analog = None
    try:
        encoder = EncoderParams(
            n_channels=enc_channels,
            baseline_hz=r.get("encoder.baseline_hz", float, 5.0),
            modulation_hz=r.get("encoder.modulation_hz", float, 45.0),
            deterministic=r.get("encoder.deterministic", bool, False),
            reaction_lag_ticks=r.get("encoder.reaction_lag_ticks", int, 1),
        )
    except ValueError as exc:
        r.fail("encoder", str(exc))
    try:
        features = FeatureConfig(
            n_channels=feat_channels,
            window_s=r.get("features.window_s", float, 0.5),
            decoder_hz=tick_hz,
        )
    except ValueError as exc:
        r.fail("features", str(exc))
    try:
        task = TrialConfig(
            decoder_hz=tick_hz,
            timeout_s=r.get("task.timeout_s", float, 13.0),
            hold_s=r.get("task.hold_s", float, 1.5),
            target_side=r.get("task.target_side", float, 2.0),
            target_distance=r.get("task.target_distance", float, 10.0),
            step_size=r.get("task.step_size", float, 1.0),
            rotation_mode=r.get("task.rotation_mode", bool, False),
        )
    except ValueError as exc:
        r.fail("task", str(exc))

    model_hidden = r.get("model.hidden", int, 50)
    model_ridge = r.get("model.ridge", float, 0.1)
    if model_hidden < 1:
        r.fail("model.hidden", "must be >= 1")
    if model_ridge < 0:
        r.fail("model.ridge", "must be non-negative")
    analog_node = r.get("model.analog", dict)
    if analog_node is not None:
        try:
            analog = AnalogConfig(
                mismatch_sigma=r.get("model.analog.mismatch_sigma", float, 0.5),
                counter_bits=r.get("model.analog.counter_bits", int, 8),
                gain=r.get("model.analog.gain", float),
                signed=r.get("model.analog.signed", bool, False),
            )
        except ValueError as exc:
            r.fail("model.analog", str(exc))

    plan_node = r.get("sessions.plan", list)
    plan: list[SessionConfig] = []
    if plan_node is None:
        plan = [
            SessionConfig(SessionMode.PASSIVE, DEFAULT_TRAIN_TRIALS),
            SessionConfig(SessionMode.PASSIVE, DEFAULT_TRAIN_TRIALS),
            SessionConfig(SessionMode.ASSISTED, DEFAULT_TRAIN_TRIALS, DEFAULT_ASSIST_P),
        ]
    else:
        for i, node in enumerate(plan_node):
            if not isinstance(node, dict):
                r.fail(f"sessions.plan[{i}]", "expected an object")
                continue
            session = _parse_session(r, node, f"sessions.plan[{i}]")
            if session is not None:
                plan.append(session)
        if plan and plan[0].mode is not SessionMode.PASSIVE:
            r.fail("sessions.plan[0]", "training must start with a passive session")

    benchmark_trials = r.get("sessions.benchmark_trials", int, DEFAULT_BENCH_TRIALS)
    if benchmark_trials < 1:
        r.fail("sessions.benchmark_trials", "must be >= 1")

    serve_session = None
    serve_model_path = None
    serve_node = r.get("sessions.serve", dict)
    if serve_node is not None:
        serve_session = _parse_session(r, serve_node, "sessions.serve")
        serve_model_path = serve_node.get("model")
        if serve_session is not None and serve_session.mode in (
            SessionMode.ASSISTED,
            SessionMode.NEURAL,
        ):
            if not isinstance(serve_model_path, str):
                r.fail("sessions.serve.model", "model path required for decoder-driven modes")

    out_dir = r.get("out_dir", str)

    if r.errors:
        raise ConfigError("\n".join(r.errors))
    return RunConfig(
        seed=seed,
        channels=channels,
        tick_hz=tick_hz,
        encoder=encoder,
        features=features,
        model_hidden=model_hidden,
        model_ridge=model_ridge,
        analog=analog,
        task=task,
        plan=plan,
        benchmark_trials=benchmark_trials,
        serve_session=serve_session,
        serve_model_path=serve_model_path,
        out_dir=out_dir,
    )


def load_config(path: str | Path) -> RunConfig:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return parse_config(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
