"""Probabilistic population codes for variable rating behaviour.

Encode a stimulus into Poisson-noisy population activity, decode it, turn
repeated decodes into feedback distributions and fit population parameters
to empirical rating distributions by exhaustive Jensen-Shannon search.
"""

from ppcfit.core import (
    DEFAULT_SCALE,
    CognitionVector,
    EstimationScale,
    Population,
    TuningParams,
    gaussian_bump,
    preferred_values,
    static_population_response,
    tuning_value,
)
from ppcfit.errors import (
    DatasetError,
    DegenerateConfigurationError,
    InvalidParameterError,
    InvalidPriorError,
    UndefinedEstimateError,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_SCALE",
    "CognitionVector",
    "EstimationScale",
    "Population",
    "TuningParams",
    "gaussian_bump",
    "preferred_values",
    "static_population_response",
    "tuning_value",
    "DatasetError",
    "DegenerateConfigurationError",
    "InvalidParameterError",
    "InvalidPriorError",
    "UndefinedEstimateError",
]
