"""
Exception hierarchy for RANDSMAP

Every error carries the CLI exit code it maps to, so the command line
front end can translate failures in one place.
"""


class RandsmapError(Exception):
    """Base class for all library errors"""

    exit_code = 5


class InvalidArgumentError(RandsmapError, ValueError):
    """Bad parameter or inconsistent input shape"""

    exit_code = 2


class DegenerateInputError(InvalidArgumentError):
    """Input carries no usable information (all-zero image, flat box)"""


class GenerationError(RandsmapError):
    """Dataset generation failed"""

    exit_code = 3


class CorruptInputError(RandsmapError):
    """Missing, truncated or malformed input file"""

    exit_code = 4


class InvalidStateError(RandsmapError):
    """Object used in a state it does not support"""


class FeatureMapMismatchError(InvalidStateError):
    """Decoder evaluated with a feature map other than the fitted one"""

    def __init__(self, message="feature-map mismatch"):
        if "feature-map mismatch" not in message:
            message = f"feature-map mismatch: {message}"
        super().__init__(message)


class StabilityError(RandsmapError):
    """CFL condition violated"""


class RankDeficiencyError(RandsmapError):
    """Singular system in an unregularized solve"""


class PreconditionError(RandsmapError):
    """Input violates a documented precondition (e.g. non-conservative data)"""


class EncodingError(RandsmapError):
    """Out-of-sample point cannot be encoded"""


class DegenerateKernelError(RandsmapError):
    """Kernel spectrum has no eigenvalue above the truncation threshold"""


class TuningError(RandsmapError):
    """Every grid value failed during hyperparameter search"""


class UndefinedMetricError(RandsmapError):
    """Relative error requested against a zero-norm reference"""
