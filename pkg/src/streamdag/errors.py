"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A spec, config, or argument violates a documented invariant."""


class ParseError(ValueError):
    """A malformed input file; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GraphError(ValueError):
    """An operation on a computational DAG is invalid (cycle, bad target)."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; `.last_state` holds the last finite model."""

    def __init__(self, message: str, last_state=None):
        super().__init__(message)
        self.last_state = last_state
