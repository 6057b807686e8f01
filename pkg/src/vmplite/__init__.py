"""vmplite: variational message passing for conjugate exponential-family models."""

from .errors import (
    ClusterSizeMismatchError,
    ConfigurationError,
    CycleError,
    DataError,
    DimensionMismatchError,
    DomainError,
    NonNumericError,
    NumericalError,
    ParseError,
    PlateMismatchError,
    RaggedRowError,
    ShapeError,
    SlotMismatchError,
    SupportError,
    ValidationError,
    VmpError,
)
from .families import (
    Categorical,
    Dirichlet,
    Gamma,
    Gaussian,
    Message,
    MomentVector,
    NaturalParams,
    Wishart,
    draw_sample,
    entropy,
    expected_log_pdf,
    log_partition,
    message_to_parent,
    moments_from_natural,
    natural_from_parent_moments,
    statistics_of_value,
)

__all__ = [
    "Categorical",
    "Dirichlet",
    "Gamma",
    "Gaussian",
    "Message",
    "MomentVector",
    "NaturalParams",
    "Wishart",
    "draw_sample",
    "entropy",
    "expected_log_pdf",
    "log_partition",
    "message_to_parent",
    "moments_from_natural",
    "natural_from_parent_moments",
    "statistics_of_value",
    "VmpError",
    "DomainError",
    "NumericalError",
    "SupportError",
    "ShapeError",
    "SlotMismatchError",
    "PlateMismatchError",
    "CycleError",
    "ClusterSizeMismatchError",
    "DimensionMismatchError",
    "ConfigurationError",
    "ParseError",
    "ValidationError",
    "DataError",
    "RaggedRowError",
    "NonNumericError",
]

__version__ = "0.1.0"
