"""Hybrid near-field/far-field multi-user localization with a RIS."""
import logging

from .ccm import CcmConfig, CrbObjective, optimize_phase_shifts
from .channel import ScenarioTruth
from .crb import CrbWeights, SingularFimError, UserEstimate
from .dictionary import AtomDictionary, build_dictionary
from .geometry import Region, RisConfig, SphericalPoint, classify_region
from .localizer import LocalizerConfig, localize
from .protocol import ProtocolConfig, compute_rmse, run_protocol, run_trials

logging.getLogger(__name__).addHandler(logging.NullHandler())

__version__ = "0.1.0"

__all__ = [
    "AtomDictionary",
    "CcmConfig",
    "CrbObjective",
    "CrbWeights",
    "LocalizerConfig",
    "ProtocolConfig",
    "Region",
    "RisConfig",
    "ScenarioTruth",
    "SingularFimError",
    "SphericalPoint",
    "UserEstimate",
    "build_dictionary",
    "classify_region",
    "compute_rmse",
    "localize",
    "optimize_phase_shifts",
    "run_protocol",
    "run_trials",
]
