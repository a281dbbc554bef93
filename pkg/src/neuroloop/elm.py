"""Spike-input extreme learning machine with analog-hardware emulation.

The decoder is a single-hidden-layer network: a fixed random first layer
(W, b), a rectifying hidden stage, and a ridge-trained linear readout beta.
Two hidden-stage flavors are supported on the same weights:

* float path - idealized math, g = rectified linear;
* analog path - behavioral model of the mismatch-based hardware: first-layer
  weights are log-normal (current mirrors copy non-negative currents, with an
  optional differential +/-1 sign), and the hidden activation is a counting
  oscillator: a gain-scaled, floored, saturating count.

Only beta is ever learned. The analog gain (and the bias scale on the analog
path) is set by a calibration pass inside fit so the median pre-activation
lands mid-range of the counter instead of saturating it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .commands import Command

DEFAULT_HIDDEN = 50
DEFAULT_RIDGE = 0.1


@dataclass(frozen=True)
class AnalogConfig:
    """Behavioral parameters of the analog co-processor emulation."""

    mismatch_sigma: float = 0.5
    counter_bits: int = 8
    gain: float | None = None  # counts per unit activation; None = calibrate in fit
    signed: bool = False

    def __post_init__(self):
        if self.mismatch_sigma < 0:
            raise ValueError("mismatch_sigma must be non-negative")
        if not 1 <= self.counter_bits <= 32:
            raise ValueError("counter_bits must be in [1, 32]")

    @property
    def counter_max(self) -> int:
        return 2**self.counter_bits - 1


class ElmDecoder(BaseEstimator, ClassifierMixin):
    """Four-class (by default) ELM command classifier.

    The first layer is created at construction from ``random_state`` and is
    never touched by fit; refitting with more data reuses the same (W, b),
    mirroring a physical chip whose mismatch pattern is fixed.

    Parameters
    ----------
    n_inputs : electrode / feature count D.
    n_hidden : hidden layer size L.
    n_classes : output classes C.
    ridge : regularization weight for the output solve (0 = bare least squares).
    analog : AnalogConfig to emulate the hardware path, or None for floats.
    random_state : seed for the fixed first layer.
    """

    def __init__(
        self,
        n_inputs: int,
        n_hidden: int = DEFAULT_HIDDEN,
        n_classes: int = len(Command),
        ridge: float = DEFAULT_RIDGE,
        analog: AnalogConfig | None = None,
        random_state: int = 0,
    ):
        if min(n_inputs, n_hidden, n_classes) < 1:
            raise ValueError("n_inputs, n_hidden and n_classes must be >= 1")
        if ridge < 0:
            raise ValueError("ridge must be non-negative")
        self.n_inputs = n_inputs
        self.n_hidden = n_hidden
        self.n_classes = n_classes
        self.ridge = ridge
        self.analog = analog
        self.random_state = random_state
        self._init_first_layer()

    def _init_first_layer(self) -> None:
        rng = np.random.default_rng(self.random_state)
        if self.analog is not None:
            z = rng.standard_normal((self.n_inputs, self.n_hidden))
            self.W_ = np.exp(self.analog.mismatch_sigma * z)
            if self.analog.signed:
                self.W_ *= rng.choice([-1.0, 1.0], size=self.W_.shape)
            # oscillator-offset bias: fixed unit pattern, scaled at calibration
            self._b_unit = rng.random(self.n_hidden)
            self.b_ = np.zeros(self.n_hidden)
        else:
            self.W_ = rng.uniform(-1.0, 1.0, (self.n_inputs, self.n_hidden))
            self.b_ = rng.uniform(-1.0, 1.0, self.n_hidden)
            self._b_unit = None
        self.beta_ = np.zeros((self.n_hidden, self.n_classes))
        self.gain_ = None if self.analog is None else self.analog.gain
        self.fitted_ = False

    # ------------------------------------------------------------------ #
    # forward pass
    # ------------------------------------------------------------------ #

    def _check_X(self, X) -> np.ndarray:
        X = check_array(X, dtype=float, ensure_2d=False)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} features, got {X.shape[1]}")
        return X

    def hidden_activations(self, X, quantized: bool | None = None) -> np.ndarray:
        """Hidden-layer outputs H, one row per input vector.

        quantized=None follows the model's configured path; passing True or
        False forces the counting-oscillator or the float path on the same
        weights (used to measure emulation fidelity).
        """
        X = self._check_X(X)
        if quantized is None:
            quantized = self.analog is not None
        pre = X @ self.W_ + self.b_
        rect = np.maximum(pre, 0.0)
        if not quantized:
            return rect
        if self.analog is None:
            raise ValueError("quantized path requires an analog configuration")
        if self.gain_ is None:
            raise NotFittedError("analog gain not calibrated; fit the model or set gain")
        counts = np.floor(self.gain_ * rect)
        return np.clip(counts, 0, self.analog.counter_max)

    def decision_function(self, X, *, allow_untrained: bool = False) -> np.ndarray:
        """Linear readout o = H @ beta (one row of C scores per input)."""
        if not self.fitted_ and not allow_untrained:
            raise NotFittedError("output weights are untrained; call fit() first")
        return self.hidden_activations(X) @ self.beta_

    def predict(self, X) -> np.ndarray:
        """Class index per input; ties go to the lowest index."""
        scores = self.decision_function(X)
        if np.isnan(scores).any():
            raise FloatingPointError("NaN in decoder output")
        return np.argmax(scores, axis=1)

    def predict_command(self, x) -> Command:
        return Command(int(self.predict(np.asarray(x, dtype=float)[None, :])[0]))

    # ------------------------------------------------------------------ #
    # training
    # ------------------------------------------------------------------ #

    def _calibrate(self, X: np.ndarray) -> None:
        """Pick bias scale and counter gain from training pre-activations."""
        if self.analog is None:
            return
        raw = X @ self.W_
        pos = raw[raw > 0]
        median_pre = float(np.median(pos)) if pos.size else 1.0
        self.b_ = 0.1 * median_pre * self._b_unit
        if self.analog.gain is None:
            biased = np.maximum(raw + self.b_, 0.0)
            pos = biased[biased > 0]
            scale = float(np.median(pos)) if pos.size else 1.0
            self.gain_ = 2 ** (self.analog.counter_bits - 1) / scale
        else:
            self.gain_ = self.analog.gain

    def fit(self, X, y) -> "ElmDecoder":
        """Solve the regularized output weights; first layer stays fixed."""
        X = self._check_X(X)
        y = np.asarray(y, dtype=int).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y lengths differ")
        if X.shape[0] < 1:
            raise ValueError("need at least one training sample")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValueError("labels out of class range")
        self._calibrate(X)
        H = self.hidden_activations(X)
        T = np.zeros((y.size, self.n_classes))
        T[np.arange(y.size), y] = 1.0
        self.beta_ = solve_output_weights(H, T, self.ridge)
        self.classes_ = np.arange(self.n_classes)
        self.fitted_ = True
        return self

    def score(self, X, y, sample_weight=None) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y, dtype=int).ravel()))


def solve_output_weights(H, T, ridge: float) -> np.ndarray:
    """argmin_beta ||H beta - T||^2 + ridge ||beta||^2, via SVD.

    With ridge = 0, H must have full column rank (raises LinAlgError
    otherwise); the caller is expected to regularize instead.
    """
    H = np.asarray(H, dtype=float)
    T = np.asarray(T, dtype=float)
    if H.ndim != 2 or T.ndim != 2 or H.shape[0] != T.shape[0]:
        raise ValueError("H and T must be 2-D with matching row counts")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    U, s, Vt = np.linalg.svd(H, full_matrices=False)
    if ridge == 0:
        rank = int(np.sum(s > s[0] * max(H.shape) * np.finfo(float).eps)) if s.size else 0
        if rank < H.shape[1]:
            raise np.linalg.LinAlgError(
                "H is rank-deficient and ridge = 0; set a positive ridge"
            )
        filt = 1.0 / s
    else:
        filt = s / (s**2 + ridge)
    return Vt.T @ (filt[:, None] * (U.T @ T))


def classify(o: Sequence[float]) -> Command:
    """Arg-max readout of an output vector; ties break to the lowest index."""
    arr = np.asarray(o, dtype=float)
    if arr.ndim != 1 or arr.size != len(Command):
        raise ValueError(f"expected {len(Command)} scores, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise FloatingPointError("NaN in decoder output")
    return Command(int(np.argmax(arr)))


def offline_accuracy(model: ElmDecoder, features, labels) -> float:
    """Fraction of feature vectors classified to their label."""
    X = np.asarray(features, dtype=float)
    y = np.asarray([int(v) for v in labels])
    if X.shape[0] != y.shape[0] or y.size == 0:
        raise ValueError("features and labels must have equal nonzero length")
    return model.score(X, y)


# ---------------------------------------------------------------------- #
# persistence: one JSON document, floats at 17 significant digits
# ---------------------------------------------------------------------- #


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_or_null(x) -> str:
    return "null" if x is None else _fmt(x)


def _fmt_list(values) -> str:
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def dumps_model(model: ElmDecoder) -> str:
    analog = model.analog
    fields = [
        f'"D": {model.n_inputs}',
        f'"L": {model.n_hidden}',
        f'"C": {model.n_classes}',
        f'"seed": {model.random_state}',
        f'"sigma_m": {_fmt_or_null(analog.mismatch_sigma if analog else None)}',
        f'"counter_bits": {analog.counter_bits if analog else "null"}',
        f'"K": {_fmt_or_null(model.gain_)}',
        f'"signed": {"null" if analog is None else ("true" if analog.signed else "false")}',
        f'"lambda": {_fmt(model.ridge)}',
        f'"W": {_fmt_list(model.W_.ravel(order="C"))}',
        f'"b": {_fmt_list(model.b_)}',
        f'"beta": {_fmt_list(model.beta_.ravel(order="C"))}',
    ]
    return "{" + ", ".join(fields) + "}"


def loads_model(text: str) -> ElmDecoder:
    doc = json.loads(text)
    d, l, c = int(doc["D"]), int(doc["L"]), int(doc["C"])
    if doc.get("sigma_m") is None:
        analog = None
    else:
        analog = AnalogConfig(
            mismatch_sigma=float(doc["sigma_m"]),
            counter_bits=int(doc["counter_bits"]),
            gain=None,
            signed=bool(doc["signed"]),
        )
    model = ElmDecoder(
        n_inputs=d,
        n_hidden=l,
        n_classes=c,
        ridge=float(doc["lambda"]),
        analog=analog,
        random_state=int(doc["seed"]),
    )
    model.W_ = np.array(doc["W"], dtype=float).reshape(d, l)
    model.b_ = np.array(doc["b"], dtype=float)
    model.beta_ = np.array(doc["beta"], dtype=float).reshape(l, c)
    model.gain_ = None if doc.get("K") is None else float(doc["K"])
    model.fitted_ = bool(np.any(model.beta_ != 0))
    if model.fitted_:
        model.classes_ = np.arange(c)
    return model


def save_model(model: ElmDecoder, path) -> None:
    with open(path, "w") as fp:
        fp.write(dumps_model(model) + "\n")


def load_model(path) -> ElmDecoder:
    with open(path) as fp:
        return loads_model(fp.read())
