"""Channel estimation toolkit for non-reciprocal RIS-assisted MIMO links."""

__version__ = "0.1.0"

from .config import ConfigError, SystemConfig, config_violations, validate_config
from .protocol import ChannelSet, ProtocolMatrices, gen_channels, gen_protocol
from .simulation import ClosedLoopObservation, simulate_observation
from .estimators import (
    EstimationResult,
    TalsState,
    evaluate_proposed,
    krf_split,
    tals_fit,
)
from .experiment import ExperimentSpec, ResultTable, run_experiment

__all__ = [
    "__version__",
    "ConfigError",
    "SystemConfig",
    "config_violations",
    "validate_config",
    "ChannelSet",
    "ProtocolMatrices",
    "gen_channels",
    "gen_protocol",
    "ClosedLoopObservation",
    "simulate_observation",
    "EstimationResult",
    "TalsState",
    "evaluate_proposed",
    "krf_split",
    "tals_fit",
    "ExperimentSpec",
    "ResultTable",
    "run_experiment",
]
