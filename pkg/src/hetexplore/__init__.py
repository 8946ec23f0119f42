"""Heterogeneous multi-robot exploration driven by behavioral entropy."""

from .behavioral_entropy import BehaviorParam, behavioral_entropy, prelec_weight, shannon_entropy
from .sim import SimConfig, run_episode, run_sweep

__all__ = [
    "BehaviorParam",
    "SimConfig",
    "behavioral_entropy",
    "prelec_weight",
    "run_episode",
    "run_sweep",
    "shannon_entropy",
]
__version__ = "0.1.0"
