import numpy as np
import pytest

from neuroloop.commands import Command
from neuroloop.engine import EncoderParams
from neuroloop.neural import IntentEncoder, default_channel_map


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def steady_state_features(
    rng: np.random.Generator,
    n_windows: int,
    params: EncoderParams = EncoderParams(),
    window_s: float = 0.5,
    intents: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Feature vectors for windows of constant intent, sampled directly.

    A Poisson process restricted to the look-back window yields Poisson
    counts, so steady-state features can be drawn without simulating event
    streams. Intents default to uniform over all four commands.
    """
    if intents is None:
        intents = rng.integers(0, len(Command), size=n_windows)
    channel_map = default_channel_map(params.n_channels)
    lam = np.empty((n_windows, params.n_channels))
    for i, intent in enumerate(intents):
        match = np.array([pref == Command(int(intent)) for pref in channel_map])
        lam[i] = (params.baseline_hz + params.modulation_hz * match) * window_s
    return rng.poisson(lam).astype(float), np.asarray(intents, dtype=int)


def encoder_for(params: EncoderParams, seed: int) -> IntentEncoder:
    return IntentEncoder(
        n_channels=params.n_channels,
        baseline_hz=params.baseline_hz,
        modulation_hz=params.modulation_hz,
        seed=seed,
        deterministic=params.deterministic,
    )
