"""Exception types raised across mrelab."""


class MRELabError(Exception):
    """Base class for all mrelab errors."""


class ShapeError(MRELabError, ValueError):
    """Array shape does not match the grid."""


class DomainError(MRELabError, ValueError):
    """Input lies outside the domain of an operator (e.g. nonzero mean)."""


class GridMismatchError(MRELabError, ValueError):
    """Two fields live on different grids."""


class PrecisionError(MRELabError, ArithmeticError):
    """A numerical evaluation failed to reach its requested tolerance."""


class BlowUpError(MRELabError, FloatingPointError):
    """Non-finite coefficients appeared during time integration.

    ``state`` is the last finite state; ``records`` holds any diagnostics
    collected before the failure.
    """

    def __init__(self, message, state=None, records=None):
        super().__init__(message)
        self.state = state
        self.records = list(records or [])


class CheckpointFormatError(MRELabError, ValueError):
    """Checkpoint file is corrupt or does not match expectations."""


class ConfigError(MRELabError, ValueError):
    """Invalid experiment configuration.

    ``code`` is one of ``"unknown-experiment"``, ``"missing-key"``,
    ``"unknown-key"``, ``"invalid-value"``, ``"syntax"``.
    """

    def __init__(self, code, message, field=None, line=None):
        where = []
        if field is not None:
            where.append(f"field {field!r}")
        if line is not None:
            where.append(f"line {line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"[{code}] {message}{suffix}")
        self.code = code
        self.field = field
        self.line = line
