"""Exception types shared across the engine."""


class DimensionError(ValueError):
    """Operand shapes are inconsistent with the operation."""


class PreconditionError(ValueError):
    """An input violates a documented precondition."""


class CodeParseError(ValueError):
    """An architecture code string is malformed.

    ``position`` is the offending character index, or -1 for length errors.
    """

    def __init__(self, message, position=-1):
        super().__init__(message)
        self.position = position


class WeightsFormatError(ValueError):
    """A weights file is malformed. ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset=0):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ImageFormatError(ValueError):
    """An image file is malformed or uses an unsupported variant."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss. ``step`` is the failing step index."""

    def __init__(self, step, message=None):
        super().__init__(message or f"training diverged at step {step}: loss is not finite")
        self.step = step


class InputError(ValueError):
    """A top-level input (image pair, argument list) is unusable."""
