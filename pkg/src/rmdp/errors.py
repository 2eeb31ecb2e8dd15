"""Exception hierarchy.

Every error carries a short ``kind`` (the class name), a human readable
``detail`` and an optional ``location`` so the CLI can serialize it as a
machine-readable error object.
"""

from __future__ import annotations


class RmdpError(Exception):
    """Base class for all errors raised by this package."""

    #: CLI exit status used when this error escapes a command.
    exit_status = 1

    def __init__(self, detail: str = "", location=None):
        super().__init__(detail)
        self.detail = detail
        self.location = location

    @property
    def kind(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict:
        return {"kind": self.kind, "detail": self.detail, "location": self.location}


class InvalidInput(RmdpError):
    """Malformed input: wrong shapes, non-stochastic rows, bad JSON, ..."""

    exit_status = 2


class RowNotStochastic(InvalidInput):
    def __init__(self, action, state, total: float):
        super().__init__(
            f"row {state!r} of action {action!r} sums to {total!r}",
            location={"action": action, "state": state},
        )
        self.action = action
        self.state = state
        self.total = total


class NegativeEntry(InvalidInput):
    pass


class TooFewStates(InvalidInput):
    pass


class TooFewActions(InvalidInput):
    pass


class DimensionMismatch(InvalidInput):
    pass


class AbsorbingRow(InvalidInput):
    """A state has p_ii(u) = 1 for some action, so rho(i, u) would be 0."""


class InvalidConfig(InvalidInput):
    pass


class ExplosionGuard(RmdpError):
    """Enumeration of m**n deterministic policies would exceed the cap."""


class NotIrreducible(RmdpError):
    pass


class NotReversible(RmdpError):
    pass


class NotRmdp(RmdpError):
    pass


class SupportMismatch(NotRmdp):
    """Off-diagonal support differs between actions.

    ``mismatches`` lists ``(i, j, u, v)`` with ``p_ij(u) > 0`` and
    ``p_ij(v) == 0``.
    """

    def __init__(self, mismatches):
        self.mismatches = [tuple(int(x) for x in q) for q in mismatches]
        super().__init__(
            f"off-diagonal support differs across actions at {len(self.mismatches)} "
            "(i, j, u, v) quadruples",
            location={"mismatches": [list(q) for q in self.mismatches]},
        )


class AsymmetricSupport(NotRmdp):
    """``p_ij > 0`` while ``p_ji == 0``; detailed balance is impossible."""


class Disconnected(NotRmdp):
    pass


class NotBiconnected(RmdpError):
    pass


class NotTree(RmdpError):
    pass


class RatioMismatch(NotRmdp):
    def __init__(self, i, j, u, v, gap: float):
        super().__init__(
            f"p0[{i},{j}] differs between actions {u} and {v} by {gap:.3e}",
            location={"i": int(i), "j": int(j), "u": int(u), "v": int(v)},
        )


class InvalidFactorization(RmdpError):
    pass


class SingularSolve(RmdpError):
    pass


class FactorizationFailure(RmdpError):
    """Cholesky factorization of a covariance matrix failed."""


class CycleDetected(RmdpError):
    pass


class InvalidLevel(InvalidInput):
    pass
