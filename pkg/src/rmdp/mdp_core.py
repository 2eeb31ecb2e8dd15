"""Finite MDP data model, stationary analysis and the reversibility test.

Kernels are stored as a single ``(m, n, n)`` array indexed
``kernels[u, i, j] = p_ij(u)``; rewards as ``(n, m)`` with
``rewards[i, u] = r(i, u)``.  States and actions are referred to by their
0-based index everywhere in the API; labels only matter for I/O.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import config
from .errors import (
    AbsorbingRow,
    DimensionMismatch,
    ExplosionGuard,
    NegativeEntry,
    NotIrreducible,
    RowNotStochastic,
    TooFewActions,
    TooFewStates,
)


@dataclass(frozen=True, eq=False)
class MdpInstance:
    states: tuple
    actions: tuple
    kernels: np.ndarray
    rewards: np.ndarray

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def m(self) -> int:
        return len(self.actions)

    def kernel(self, u: int) -> np.ndarray:
        return self.kernels[u]


@dataclass(frozen=True, eq=False)
class Policy:
    """Stationary randomized Markov strategy; row ``i`` of ``weights`` is mu(.|i)."""

    weights: np.ndarray

    @classmethod
    def deterministic(cls, actions: Sequence[int], m: int) -> "Policy":
        actions = np.asarray(actions, dtype=int)
        w = np.zeros((len(actions), m))
        w[np.arange(len(actions)), actions] = 1.0
        w.flags.writeable = False
        return cls(w)

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all((self.weights == 0.0) | (self.weights == 1.0)))

    @property
    def actions(self) -> tuple:
        """Chosen action index per state; only meaningful for deterministic policies."""
        if not self.is_deterministic:
            raise ValueError("policy is randomized")
        return tuple(int(a) for a in np.argmax(self.weights, axis=1))


@dataclass(frozen=True, eq=False)
class ChainAnalysis:
    transition: np.ndarray
    stationary: np.ndarray
    occupation: np.ndarray
    irreducible: bool
    reversible: bool


@dataclass(frozen=True)
class RmdpVerdict:
    """Result of :func:`is_rmdp`.  ``witness`` is set only on failure."""

    rmdp: bool
    checked: int
    witness: tuple | None = None
    violation: str | None = None

    def __bool__(self) -> bool:
        return self.rmdp


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def validate_instance(states, actions, kernels, rewards) -> MdpInstance:
    """Build an :class:`MdpInstance`, checking every structural invariant.

    ``kernels`` may be an ``(m, n, n)`` array or a sequence of ``n x n``
    matrices in action order.
    """
    states = tuple(states)
    actions = tuple(actions)
    n, m = len(states), len(actions)
    if n < 2:
        raise TooFewStates(f"need at least 2 states, got {n}")
    if m < 2:
        raise TooFewActions(f"need at least 2 actions, got {m}")
    k = np.asarray(kernels, dtype=float)
    if k.shape != (m, n, n):
        raise DimensionMismatch(f"kernels have shape {k.shape}, expected {(m, n, n)}")
    r = np.asarray(rewards, dtype=float)
    if r.shape != (n, m):
        raise DimensionMismatch(f"rewards have shape {r.shape}, expected {(n, m)}")
    if not np.all(np.isfinite(k)) or not np.all(np.isfinite(r)):
        raise DimensionMismatch("kernels and rewards must be finite")
    if np.any(k < 0.0):
        u, i, j = np.argwhere(k < 0.0)[0]
        raise NegativeEntry(
            f"p[{i},{j}] under action {actions[u]!r} is {k[u, i, j]!r}",
            location={"action": actions[u], "state": states[i], "column": states[j]},
        )
    if np.any(k > 1.0):
        u, i, j = np.argwhere(k > 1.0)[0]
        raise NegativeEntry(
            f"p[{i},{j}] under action {actions[u]!r} exceeds 1",
            location={"action": actions[u], "state": states[i], "column": states[j]},
        )
    sums = k.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > config.ROW_SUM_TOL)
    if len(bad):
        u, i = bad[0]
        raise RowNotStochastic(actions[u], states[i], float(sums[u, i]))
    return MdpInstance(states, actions, _frozen(k), _frozen(r))


def check_no_absorbing_rows(inst: MdpInstance) -> None:
    """Reject rows with ``p_ii(u) = 1``; rho(i, u) must lie in (0, 1]."""
    diag = np.diagonal(inst.kernels, axis1=1, axis2=2)
    bad = np.argwhere(1.0 - diag <= config.SUPPORT_THRESHOLD)
    if len(bad):
        u, i = bad[0]
        raise AbsorbingRow(
            f"state {inst.states[i]!r} is absorbing under action {inst.actions[u]!r}",
            location={"state": inst.states[i], "action": inst.actions[u]},
        )


def make_policy(inst: MdpInstance, weights) -> Policy:
    w = np.asarray(weights, dtype=float)
    if w.shape != (inst.n, inst.m):
        raise DimensionMismatch(f"policy has shape {w.shape}, expected {(inst.n, inst.m)}")
    if np.any(w < 0.0) or np.any(np.abs(w.sum(axis=1) - 1.0) > config.ROW_SUM_TOL):
        raise DimensionMismatch("policy rows must be probability vectors")
    return Policy(_frozen(w))


def controlled_kernel(inst: MdpInstance, pol: Policy) -> np.ndarray:
    """Transition matrix of the chain under ``pol``: sum_u p_ij(u) mu(u|i)."""
    w = np.asarray(pol.weights)
    if w.shape != (inst.n, inst.m):
        raise DimensionMismatch(f"policy has shape {w.shape}, expected {(inst.n, inst.m)}")
    return np.einsum("uij,iu->ij", inst.kernels, w)


def controlled_reward(inst: MdpInstance, pol: Policy) -> np.ndarray:
    return np.einsum("iu,iu->i", inst.rewards, np.asarray(pol.weights))


def check_irreducible(P) -> bool:
    """True iff the directed support graph of ``P`` is strongly connected."""
    A = np.asarray(P) > config.SUPPORT_THRESHOLD
    ncomp, _ = connected_components(A, directed=True, connection="strong")
    return ncomp == 1


def stationary_distribution(P) -> np.ndarray:
    """Unique stationary vector of an irreducible stochastic matrix.

    Solves ``pi^T (P - I) = 0`` with the last equation replaced by the
    normalization ``sum(pi) = 1``; this is exact for periodic chains too.
    """
    P = np.asarray(P, dtype=float)
    if not check_irreducible(P):
        raise NotIrreducible("transition matrix is not irreducible")
    return _stationary_unchecked(P)


def _stationary_unchecked(P) -> np.ndarray:
    n = P.shape[-1]
    A = np.swapaxes(P, -1, -2) - np.eye(n)
    A[..., -1, :] = 1.0
    b = np.zeros(P.shape[:-1])
    b[..., -1] = 1.0
    return np.linalg.solve(A, b[..., None])[..., 0]


def occupation_measure(P, pi=None) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if pi is None:
        pi = stationary_distribution(P)
    return pi[:, None] * P


def check_reversible(P, tol: float = config.BALANCE_TOL) -> bool:
    """Detailed balance ``|pi_i p_ij - pi_j p_ji| <= tol`` for all pairs."""
    Q = occupation_measure(P)
    return bool(np.max(np.abs(Q - Q.T)) <= tol)


def analyze_chain(inst: MdpInstance, pol: Policy, tol: float = config.BALANCE_TOL) -> ChainAnalysis:
    P = controlled_kernel(inst, pol)
    irreducible = check_irreducible(P)
    if not irreducible:
        nan = np.full(inst.n, np.nan)
        return ChainAnalysis(P, nan, np.full_like(P, np.nan), False, False)
    pi = _stationary_unchecked(P)
    Q = pi[:, None] * P
    return ChainAnalysis(P, pi, Q, True, bool(np.max(np.abs(Q - Q.T)) <= tol))


def count_deterministic_policies(inst: MdpInstance) -> int:
    return inst.m**inst.n


def _guard(inst: MdpInstance, cap: int) -> None:
    total = count_deterministic_policies(inst)
    if total > cap:
        raise ExplosionGuard(
            f"{inst.m}^{inst.n} = {total} deterministic policies exceed the cap of {cap}"
        )


def enumerate_deterministic_policies(
    inst: MdpInstance, cap: int = config.ENUMERATION_CAP
) -> Iterator[Policy]:
    """All m**n deterministic policies, lexicographic in the action indices."""
    _guard(inst, cap)
    for actions in itertools.product(range(inst.m), repeat=inst.n):
        yield Policy.deterministic(actions, inst.m)


def policy_index_batches(inst: MdpInstance, cap: int = config.ENUMERATION_CAP, batch: int = 4096):
    """Deterministic policies as ``(k, n)`` integer arrays, in lexicographic order."""
    _guard(inst, cap)
    n, m = inst.n, inst.m
    total = m**n
    powers = m ** np.arange(n - 1, -1, -1)
    for start in range(0, total, batch):
        idx = np.arange(start, min(start + batch, total))
        yield (idx[:, None] // powers[None, :]) % m


def batch_kernels(inst: MdpInstance, actions: np.ndarray) -> np.ndarray:
    """Stack of ``P(mu)`` for a ``(k, n)`` array of deterministic policies."""
    rows = np.arange(inst.n)
    return inst.kernels[actions, rows[None, :], :]


def _batch_irreducible(P: np.ndarray) -> np.ndarray:
    n = P.shape[-1]
    R = (P > config.SUPPORT_THRESHOLD) | np.eye(n, dtype=bool)
    steps = 1
    while steps < n:
        R = np.matmul(R.astype(np.int64), R.astype(np.int64)) > 0
        steps *= 2
    return R.all(axis=(1, 2))


def is_rmdp(
    inst: MdpInstance, tol: float = config.BALANCE_TOL, cap: int = config.ENUMERATION_CAP
) -> RmdpVerdict:
    """Check irreducibility and reversibility under every deterministic policy.

    By the convexity of occupation measures this certifies the property for
    all randomized policies as well.  On failure the first violating policy
    (in lexicographic order) is returned as the witness.
    """
    checked = 0
    for actions in policy_index_batches(inst, cap):
        P = batch_kernels(inst, actions)
        irr = _batch_irreducible(P)
        rev = np.zeros(len(actions), dtype=bool)
        if irr.any():
            pi = _stationary_unchecked(P[irr])
            Q = pi[:, :, None] * P[irr]
            rev[irr] = np.max(np.abs(Q - np.swapaxes(Q, 1, 2)), axis=(1, 2)) <= tol
        bad = np.flatnonzero(~(irr & rev))
        if len(bad):
            b = bad[0]
            return RmdpVerdict(
                False,
                checked + int(b) + 1,
                tuple(int(a) for a in actions[b]),
                "not irreducible" if not irr[b] else "not reversible",
            )
        checked += len(actions)
    return RmdpVerdict(True, checked)
