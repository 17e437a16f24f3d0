"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`NetFrechetError`, so callers (and the CLI) can separate input
problems from solver failures.
"""


class NetFrechetError(Exception):
    """Base class for all package errors."""


class ValidationError(NetFrechetError, ValueError):
    """Input data violates a documented precondition."""


class InvalidMatrix(ValidationError):
    pass


class NotPSD(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NotAGraph(ValidationError):
    pass


class UnsupportedTopology(ValidationError):
    pass


class InsufficientData(ValidationError):
    pass


class DegenerateKernelSupport(ValidationError):
    pass


class UndefinedRSquared(ValidationError):
    pass


class LoadError(ValidationError):
    """A dataset file could not be parsed.

    The message always names the offending file and, where it applies, the
    1-based line number.
    """

    def __init__(self, path, message, line=None):
        self.path = str(path)
        self.line = line
        where = self.path if line is None else f"{self.path}:{line}"
        super().__init__(f"{where}: {message}")


class DuplicateEdge(LoadError):
    pass


class RecordRejected(ValidationError):
    """A single input record is invalid; aggregation counts it and moves on."""


class JoinError(ValidationError):
    def __init__(self, missing):
        self.missing = list(missing)
        shown = ", ".join(str(d) for d in self.missing[:10])
        more = "" if len(self.missing) <= 10 else f" (+{len(self.missing) - 10} more)"
        super().__init__(f"no case count for graph dates: {shown}{more}")


class SolverError(NetFrechetError):
    """A barycenter solve failed; the partial report is attached."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DivergedNegativeEigenvalue(SolverError):
    pass


class NotConverged(SolverError):
    pass
