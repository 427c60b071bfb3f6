"""Exception types shared across the package.

Every exception carries a short machine-readable ``code`` that the command
line front-end prints on failure.
"""


class SqueezeLabError(Exception):
    code = "E_GENERIC"


class InvalidArgument(SqueezeLabError, ValueError):
    code = "E_INVALID_ARGUMENT"


class PhysicalityError(SqueezeLabError, ValueError):
    """Covariance matrix violates the uncertainty principle."""

    code = "E_UNPHYSICAL"


class AboveThresholdError(SqueezeLabError, ValueError):
    code = "E_ABOVE_THRESHOLD"


class NoDipError(SqueezeLabError, ValueError):
    code = "E_NO_DIP"


class InsufficientDataError(SqueezeLabError, ValueError):
    code = "E_INSUFFICIENT_DATA"


class ConvergenceError(SqueezeLabError, RuntimeError):
    code = "E_NO_CONVERGENCE"


class GridMismatchError(SqueezeLabError, ValueError):
    code = "E_GRID_MISMATCH"


class DegenerateClearanceError(SqueezeLabError, ValueError):
    code = "E_DEGENERATE_CLEARANCE"


class MissingSegmentError(SqueezeLabError, KeyError):
    code = "E_MISSING_SEGMENT"

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ManifestError(SqueezeLabError, ValueError):
    code = "E_MANIFEST"


class SchemaError(SqueezeLabError, ValueError):
    code = "E_SCHEMA"


class ConfigError(SqueezeLabError, ValueError):
    code = "E_CONFIG"
