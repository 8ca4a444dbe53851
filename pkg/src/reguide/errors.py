"""Exception hierarchy shared by every reguide module.

Library code raises these; the CLI turns them into exit code 1.
"""


class ReguideError(Exception):
    """Base class for all domain errors raised by reguide."""

    code = "reguide-error"


# Binary containers


class ContainerError(ReguideError):
    """Something is wrong with an on-disk artifact."""

    code = "container"


class BadMagicError(ContainerError):
    code = "bad-magic"


class VersionMismatchError(ContainerError):
    code = "version-mismatch"


class TruncatedFileError(ContainerError):
    code = "truncated"


class ChecksumError(ContainerError):
    code = "checksum"


class ComponentMismatchError(ContainerError):
    code = "component-mismatch"


# Automatic differentiation


class AutodiffError(ReguideError):
    code = "autodiff"


class NonScalarLossError(AutodiffError, ValueError):
    code = "non-scalar-loss"


class NotOnTapeError(AutodiffError):
    code = "not-on-tape"


class TapeConsumedError(AutodiffError):
    code = "tape-consumed"


class TapeMismatchError(AutodiffError):
    code = "tape-mismatch"


# Numerics and validation


class NonFiniteError(ReguideError, ArithmeticError):
    code = "non-finite"


class ValidationError(ReguideError, ValueError):
    """Invalid input values or shapes."""

    code = "invalid"


class ShapeError(ValidationError):
    code = "shape"


class ScheduleError(ValidationError):
    code = "schedule"


class ConditionError(ValidationError):
    code = "condition"


class UnknownTokenError(ValidationError):
    code = "unknown-token"


class ZeroNormError(ValidationError):
    code = "zero-norm"


class EmptyInputError(ValidationError):
    code = "empty"


class InsufficientDataError(ValidationError):
    code = "insufficient-data"


class SeedError(ValidationError):
    code = "seed"


class MissingInputError(ValidationError):
    code = "missing-input"


# Pipeline


class TrainingDivergedError(ReguideError):
    code = "diverged"


class IndexMismatchError(ReguideError):
    code = "index-mismatch"


class GuidanceError(NonFiniteError):
    code = "guidance"


class ToleranceExceededError(ReguideError):
    code = "tolerance-exceeded"
