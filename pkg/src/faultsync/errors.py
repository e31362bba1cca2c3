"""Exception hierarchy shared by all faultsync modules."""

from __future__ import annotations


class FaultSyncError(Exception):
    """Base class for every error raised by this package."""


class InvalidGraph(FaultSyncError, ValueError):
    pass


class BoundViolation(FaultSyncError, ValueError):
    """A degree bound q_i is smaller than the weighted in-degree of node i."""


class UnknownEdge(FaultSyncError, KeyError):
    pass


class DimensionMismatch(FaultSyncError, ValueError):
    pass


class NotSimpleZero(FaultSyncError, ValueError):
    """The zero eigenvalue of a bicomponent Laplacian is not simple."""


class SingularL0(FaultSyncError, ArithmeticError):
    """The grounded block failed to invert; indicates a decomposition bug."""


class InternalConsistency(FaultSyncError, AssertionError):
    pass


class NonFinite(FaultSyncError, FloatingPointError):
    """Simulated states blew past the divergence guard."""


class RankDeficient(FaultSyncError, ArithmeticError):
    """Synchronized trajectories are too degenerate to identify weights."""


class NotCertified(FaultSyncError):
    """Scenario failed certification and no waiver was given."""


class ParseError(FaultSyncError, ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ValidationError(FaultSyncError, ValueError):
    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)
