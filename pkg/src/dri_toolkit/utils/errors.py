"""Exception hierarchy shared by every layer of the toolkit."""


class DriToolkitError(ValueError):
    """Base class for toolkit errors"""


class ConfigError(DriToolkitError):
    """Invalid or unparsable experiment configuration"""


class MeshTooFineError(DriToolkitError):
    """Block width below the minimum number of samples per block"""


class UncertifiedTruncationError(DriToolkitError):
    """Grid window drops mass that no integrable envelope accounts for"""


class GridOverflowError(DriToolkitError):
    """Requested grid exceeds the configured maximum size"""


class SpacingMismatchError(DriToolkitError):
    """Two grids with different spacings were combined"""


class NotResolvedError(DriToolkitError):
    """An iterative search did not settle within its budget"""


class DegenerateConstantError(DriToolkitError):
    """A constant that must be strictly positive came out non-positive"""
