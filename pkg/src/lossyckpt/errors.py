"""Exception taxonomy shared across the package."""


class ParameterError(ValueError):
    """An argument is outside its documented domain."""


class DimensionMismatchError(ParameterError):
    """Operands have inconsistent shapes."""


class SingularPreconditionerError(ParameterError):
    """A diagonal preconditioner entry is missing or zero."""


class BreakdownError(RuntimeError):
    """An iterative method hit an exact breakdown (zero pivot / exhausted basis)."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class IntegrityError(RuntimeError):
    """A serialized payload is corrupt or inconsistent with its metadata."""


class CheckpointFailedError(RuntimeError):
    """A checkpoint could not be committed; the previous image stays last-good."""


class UnrecoverableImageError(RuntimeError):
    """A checkpoint image failed checksum or structural validation."""


class SaturatedModelError(ValueError):
    """The overhead model was evaluated past its pole (denominator <= 0)."""


class UndefinedPsnrError(ValueError):
    """PSNR is undefined because the original data has zero value range."""
