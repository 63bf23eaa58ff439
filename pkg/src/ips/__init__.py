"""Infrastructure-free indoor positioning over dual-band WiFi RSSI fingerprints."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    AccessPointId,
    Band,
    FingerprintSample,
    Heading,
    ReferencePoint,
    SurveyArea,
    read_jsonl,
    validate_sample,
    write_jsonl,
)
from .empirical import SparseRadioMap, fit_distributions  # noqa: F401
from .gpr import DenseRadioMap, GprHyperparams, densify, gpr_fit, gpr_predict  # noqa: F401
from .localize import Observation, PositionEstimate, evaluate, localize  # noqa: F401
from .simulate import SimScenario, simulate_rssi, simulate_survey, simulate_walk  # noqa: F401
