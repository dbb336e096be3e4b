"""Exception and warning types shared across the package."""


class TensorFormatError(ValueError):
    """A tensor file violates the PTNS v1 container format.

    ``offset`` is the byte position at which the problem was detected.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BadMagic(TensorFormatError):
    """File does not start with the PTNS magic bytes."""


class UnsupportedVersion(TensorFormatError):
    """Container version other than 1."""


class UnsupportedDtype(TensorFormatError):
    """Dtype code other than f32 (1) or f64 (2)."""


class InvalidShape(TensorFormatError):
    """Rank 0 or a zero-sized dimension."""


class TruncatedPayload(TensorFormatError):
    """File ends before the header or payload is complete."""


class NonFiniteValue(TensorFormatError):
    """Payload contains NaN or infinity."""


class ParseError(ValueError):
    """Manifest or label JSON is not well-formed."""


class ValidationError(ValueError):
    """Manifest validation failed; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("\n".join(self.violations))


class UnsupportedTask(ValueError):
    """The scoring method does not support the target's task kind."""


class MissingArtifact(ValueError):
    """A transfer lacks the feature or probability file a method needs."""


class DidNotConverge(RuntimeWarning):
    """Iterative optimization hit its step cap before the gradient tolerance."""
