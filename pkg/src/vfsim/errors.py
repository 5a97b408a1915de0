"""Exception hierarchy shared across the package."""


class VFSimError(Exception):
    pass


class InvalidArgumentError(VFSimError, ValueError):
    pass


class MissingFactorError(VFSimError, KeyError):
    """A context does not assign a factor that a frame or tree needs."""

    def __init__(self, factor):
        super().__init__(factor)
        self.factor = factor

    def __str__(self):
        return f"context is missing influencing factor {self.factor!r}"


class ConsistencyError(VFSimError, ValueError):
    """A graph edit would break one of the validity-frame-graph invariants."""

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending


class CycleError(ConsistencyError):
    pass


class InvalidOrderingError(VFSimError, ValueError):
    pass


class NoFeasibleModelError(VFSimError, LookupError):
    def __init__(self, message, reason="", visited=0):
        super().__init__(message)
        self.reason = reason
        self.visited = visited


class DeadlineInfeasibleError(VFSimError, RuntimeError):
    pass


class ModelEvaluationError(VFSimError, RuntimeError):
    pass


class ParseError(VFSimError, ValueError):
    """Raised by the file readers; carries the 1-based line of the problem."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
