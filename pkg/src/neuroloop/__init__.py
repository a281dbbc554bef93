"""neuroloop: a desk-scale closed-loop spike-decoding simulator.

A synthetic spiking subject drives a spike-input extreme learning machine
(with analog-hardware emulation) that steers a virtual wheelchair avatar in a
discrete target-reaching task, with the training paradigm, chance-level
analysis and neural-vs-hand benchmarking around it.
"""

from .commands import Command
from .elm import AnalogConfig, ElmDecoder, classify, load_model, offline_accuracy, save_model
from .engine import (
    ClosedLoopEngine,
    EncoderParams,
    SessionConfig,
    SessionMode,
    StateFrame,
    blend_assist,
)
from .features import FeatureConfig, FeatureVector, RateExtractor
from .metrics import (
    BudgetSpec,
    budget,
    chance_trial_success,
    chance_trial_success_log10,
    summarize,
    t_test_unpaired,
)
from .neural import (
    IntentEncoder,
    NoiseTrace,
    SpikeEvent,
    detect_spikes,
    detect_threshold,
    mad_sigma,
)
from .task import (
    ArenaState,
    Phase,
    TrialConfig,
    TrialRecord,
    oracle_policy,
    spawn_trial,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "AnalogConfig",
    "ArenaState",
    "BudgetSpec",
    "ClosedLoopEngine",
    "Command",
    "ElmDecoder",
    "EncoderParams",
    "FeatureConfig",
    "FeatureVector",
    "IntentEncoder",
    "NoiseTrace",
    "Phase",
    "RateExtractor",
    "SessionConfig",
    "SessionMode",
    "SpikeEvent",
    "StateFrame",
    "TrialConfig",
    "TrialRecord",
    "blend_assist",
    "budget",
    "chance_trial_success",
    "chance_trial_success_log10",
    "classify",
    "detect_spikes",
    "detect_threshold",
    "load_model",
    "mad_sigma",
    "offline_accuracy",
    "oracle_policy",
    "save_model",
    "spawn_trial",
    "step",
    "summarize",
    "t_test_unpaired",
]
