"""Exception types shared across the package."""


class SrleakError(Exception):
    """Base class for package-specific failures."""


class DimensionError(SrleakError, ValueError):
    """Shapes or alphabet sizes of two objects do not line up."""


class RateConditionError(SrleakError, ValueError):
    """A rate precondition of the operating regime is violated."""


class CapExceededError(SrleakError, RuntimeError):
    """An enumeration or resource cap would be exceeded."""


class CodebookError(SrleakError, ValueError):
    """Codebook construction, budgeting, or serialization failed."""
