"""Exception hierarchy shared by all vmplite modules."""


class VmpError(Exception):
    """Base class for all vmplite errors."""


class DomainError(VmpError):
    """Natural parameters violate their family's constraints."""


class NumericalError(VmpError):
    """A computation produced a non-finite result or a factorization failed."""


class SupportError(VmpError):
    """An observed value lies outside the family's support."""


class ShapeError(VmpError):
    """Array shapes do not conform to the declared plates/event shape."""


class SlotMismatchError(VmpError):
    """A parent does not provide the moment kind its slot requires."""


class PlateMismatchError(VmpError):
    """Plate shapes cannot be broadcast together."""


class CycleError(VmpError):
    """Node declarations form a cycle."""


class ClusterSizeMismatchError(VmpError):
    """A mixture component parent's leading plate differs from the gate size."""


class DimensionMismatchError(VmpError):
    """Vector parents of a dot-product node have unequal dimensions."""


class ConfigurationError(VmpError):
    """Fit options or schedules are invalid for the given graph."""


class ParseError(VmpError):
    """A model spec document is not valid JSON."""


class ValidationError(VmpError):
    """A model spec document is well-formed JSON but semantically invalid."""


class DataError(VmpError):
    """A data file cannot be turned into a tensor."""


class RaggedRowError(DataError):
    """CSV rows have inconsistent field counts."""


class NonNumericError(DataError):
    """A CSV cell is neither numeric nor the missing-value token."""
