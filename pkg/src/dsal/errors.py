"""Exception types shared across the package."""


class DsalError(Exception):
    """Base class for all package errors."""


class FormatError(DsalError):
    """A binary file is malformed: bad magic, unsupported version, truncated
    or oversized payload, or non-finite stored values."""


class ManifestError(DsalError):
    """A phase manifest is inconsistent: overlapping class sets, no phases,
    a phase index out of range, or labels outside the declared class set."""


class UnknownLabelError(DsalError):
    """A label does not appear in the requested column layout."""


class ClassOverlapError(DsalError):
    """A class id is added twice, or a new phase re-declares a known class."""


class ShapeError(DsalError):
    """Operands have incompatible dimensions."""


class NumericalError(DsalError):
    """Non-finite inputs, or a matrix factorization failed (the system is
    ill-conditioned beyond tolerance)."""
