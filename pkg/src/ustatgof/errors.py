"""Exception hierarchy shared by every module.

Each class carries a short machine-readable ``code`` used by the CLI in JSON mode.
"""


class UStatError(Exception):
    code = "error"


class ValidationError(UStatError, ValueError):
    code = "validation_error"


class InvalidDimensionError(ValidationError):
    code = "invalid_dimension"


class DomainError(ValidationError):
    code = "domain_error"


class ZeroWeightError(ValidationError):
    code = "zero_weight"


class InsufficientSampleError(ValidationError):
    code = "insufficient_sample"


class InsufficientReplicatesError(ValidationError):
    code = "insufficient_replicates"


class ZeroVarianceError(ValidationError):
    code = "zero_variance"


class ParseError(ValidationError):
    code = "parse_error"


class CapabilityError(UStatError):
    """Raised when a computation exceeds a deliberate size cap.

    ``partial`` holds whatever could still be computed.
    """

    code = "capability_error"

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
