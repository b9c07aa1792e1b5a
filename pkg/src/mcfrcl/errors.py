"""Shared exception types."""


class ShapeMismatchError(ValueError):
    """Raised when an operation receives incompatibly shaped operands."""

    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        detail = " vs ".join(str(s) for s in self.shapes)
        super().__init__(f"{op}: incompatible shapes {detail}")


class DomainError(ValueError):
    """Raised when an operation is evaluated outside its mathematical domain."""

    def __init__(self, op, detail):
        self.op = op
        super().__init__(f"{op}: {detail}")


class ConfigError(ValueError):
    """Raised for invalid experiment configuration."""


class DataFormatError(ValueError):
    """Raised for malformed dataset files."""
