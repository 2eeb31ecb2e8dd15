"""Average-reward machinery: gain, bias, optimality test and policy iteration.

Three policy-iteration variants are provided.  ``standard`` uses the bias
``h`` from Poisson's equation at every step.  ``biconnected`` applies when
the canonical graph is biconnected and needs only the gain: a state is
switched when ``(r(i, u) - beta) / rho(i, u)`` can be increased.
``hybrid`` uses that gain-only ratio rule at non-articulation vertices of
a general RMDP and falls back to an ``h``-based step at articulation
points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import CycleDetected, SingularSolve
from .factorize import Factorization, glue_stationary
from .mdp_core import (
    MdpInstance,
    Policy,
    _stationary_unchecked,
    batch_kernels,
    controlled_kernel,
    controlled_reward,
    policy_index_batches,
    stationary_distribution,
)


@dataclass(frozen=True, eq=False)
class PoissonSolution:
    gain: float
    bias: np.ndarray
    stationary: np.ndarray
    normalization: str = "pi-weighted-zero"


@dataclass(frozen=True, eq=False)
class FundamentalMatrix:
    z: np.ndarray
    stationary: np.ndarray


@dataclass(frozen=True, eq=False)
class OptimalityReport:
    q_values: np.ndarray  # (n, m) r(i, v) + sum_j p_ij(v) (h_j - h_i)
    max_values: np.ndarray
    maximizers: tuple  # per state, tuple of maximizing actions
    violations: tuple  # states whose policy support misses the max
    optimal: bool


@dataclass(frozen=True)
class TraceStep:
    state: int
    old_action: int
    new_action: int
    gain: float  # gain of the policy after the step
    rule: str
    policy: tuple


@dataclass
class PolicyIterationTrace:
    variant: str
    start: tuple
    initial_gain: float
    steps: list = field(default_factory=list)
    terminal: tuple = ()
    terminal_gain: float = float("nan")

    @property
    def gains(self) -> list[float]:
        return [self.initial_gain] + [s.gain for s in self.steps]


def fundamental_matrix(P) -> FundamentalMatrix:
    """``Z = (I - P + 1 pi^T)^{-1} (I - 1 pi^T)``.

    This is the Cesaro limit of the partial sums of ``P^k - 1 pi^T`` and is
    exact for periodic chains.
    """
    P = np.asarray(P, dtype=float)
    pi = stationary_distribution(P)
    n = len(pi)
    Pi = np.outer(np.ones(n), pi)
    A = np.eye(n) - P + Pi
    try:
        Z = np.linalg.solve(A, np.eye(n) - Pi)
    except np.linalg.LinAlgError as exc:
        raise SingularSolve(str(exc)) from None
    if not np.all(np.isfinite(Z)):
        raise SingularSolve("non-finite fundamental matrix")
    return FundamentalMatrix(Z, pi)


def gain(inst: MdpInstance, pol: Policy) -> float:
    P = controlled_kernel(inst, pol)
    return float(stationary_distribution(P) @ controlled_reward(inst, pol))


def poisson_solve(inst: MdpInstance, pol: Policy) -> PoissonSolution:
    """Gain ``pi^T r`` and bias ``h = Z r`` (so ``sum_i pi_i h_i = 0``)."""
    P = controlled_kernel(inst, pol)
    fm = fundamental_matrix(P)
    r = controlled_reward(inst, pol)
    return PoissonSolution(float(fm.stationary @ r), fm.z @ r, fm.stationary)


def poisson_residual(inst: MdpInstance, pol: Policy, sol: PoissonSolution) -> float:
    P = controlled_kernel(inst, pol)
    r = controlled_reward(inst, pol)
    h = sol.bias
    return float(np.max(np.abs(sol.gain + h - r - P @ h)))


def q_values(inst: MdpInstance, h: np.ndarray) -> np.ndarray:
    """``r(i, v) + sum_j p_ij(v) (h_j - h_i)`` as an ``(n, m)`` array."""
    return inst.rewards + (np.einsum("uij,j->iu", inst.kernels, h) - h[:, None])


def dp_check(inst: MdpInstance, pol: Policy, tol: float = config.IMPROVEMENT_TOL) -> OptimalityReport:
    sol = poisson_solve(inst, pol)
    q = q_values(inst, sol.bias)
    best = q.max(axis=1)
    maximizers = tuple(tuple(int(v) for v in np.flatnonzero(q[i] >= best[i] - tol)) for i in range(inst.n))
    w = np.asarray(pol.weights)
    violations = tuple(
        i for i in range(inst.n) if np.any((w[i] > 0.0) & (q[i] < best[i] - tol))
    )
    return OptimalityReport(q, best, maximizers, violations, not violations)


def _as_actions(inst: MdpInstance, start) -> np.ndarray:
    if start is None:
        return np.zeros(inst.n, dtype=int)
    if isinstance(start, Policy):
        return np.array(start.actions, dtype=int)
    a = np.array(start, dtype=int)
    if a.shape != (inst.n,) or np.any(a < 0) or np.any(a >= inst.m):
        raise ValueError("start must give one valid action index per state")
    return a


def _det(inst: MdpInstance, actions) -> Policy:
    return Policy.deterministic(actions, inst.m)


def _standard_step(inst: MdpInstance, actions: np.ndarray, states=None, tol=config.IMPROVEMENT_TOL):
    """Lowest state whose current action misses the argmax by more than ``tol``."""
    sol = poisson_solve(inst, _det(inst, actions))
    q = q_values(inst, sol.bias)
    candidates = range(inst.n) if states is None else states
    for i in candidates:
        cur = q[i, actions[i]]
        v = int(np.argmax(q[i]))
        if q[i, v] > cur + tol:
            return i, v
    return None


class _Tracer:
    def __init__(self, inst, variant, actions, gain_fn):
        self.inst = inst
        self.gain_fn = gain_fn
        self.actions = actions.copy()
        g0 = gain_fn(actions)
        self.trace = PolicyIterationTrace(variant, tuple(int(a) for a in actions), g0)
        self.seen = {tuple(actions)}
        self.current_gain = g0

    def apply(self, state, action, rule):
        old = int(self.actions[state])
        self.actions[state] = action
        key = tuple(int(a) for a in self.actions)
        if key in self.seen:
            raise CycleDetected(f"policy {key} revisited")
        self.seen.add(key)
        g = self.gain_fn(self.actions)
        if not g > self.current_gain:
            raise CycleDetected(f"gain did not increase at state {state}: {g!r} <= {self.current_gain!r}")
        self.current_gain = g
        self.trace.steps.append(TraceStep(int(state), old, int(action), g, rule, key))

    def finish(self):
        self.trace.terminal = tuple(int(a) for a in self.actions)
        self.trace.terminal_gain = self.current_gain
        return self.trace


def policy_iterate_standard(inst: MdpInstance, start=None, tol=config.IMPROVEMENT_TOL) -> PolicyIterationTrace:
    """Single-state policy iteration driven by the bias ``h``."""
    actions = _as_actions(inst, start)
    tracer = _Tracer(inst, "standard", actions, lambda a: gain(inst, _det(inst, a)))
    while True:
        step = _standard_step(inst, tracer.actions, tol=tol)
        if step is None:
            return tracer.finish()
        tracer.apply(*step, rule="standard")


def _ratio_candidates(inst, rho, actions, beta, states, tol):
    for i in states:
        ratios = (inst.rewards[i] - beta) / rho[i]
        v = int(np.argmax(ratios))
        if ratios[v] > ratios[actions[i]] + tol:
            return i, v
    return None


def _biconnected_gain(inst, pi0, rho, actions) -> float:
    rows = np.arange(inst.n)
    w = pi0 / rho[rows, actions]
    return float(w @ inst.rewards[rows, actions] / w.sum())


def improve_biconnected(inst: MdpInstance, P0, rho, pol, tol=config.IMPROVEMENT_TOL, pi0=None):
    """One gain-only improvement step for a biconnected RMDP, or ``None``.

    The gain is computed from the stationary vector of ``P0`` as
    ``sum_i r pi0_i / rho_i`` over ``sum_i pi0_i / rho_i``; no Poisson
    solve is needed.
    """
    if pi0 is None:
        pi0 = stationary_distribution(P0)
    actions = _as_actions(inst, pol)
    beta = _biconnected_gain(inst, pi0, rho, actions)
    step = _ratio_candidates(inst, rho, actions, beta, range(inst.n), tol)
    if step is None:
        return None
    out = actions.copy()
    out[step[0]] = step[1]
    return _det(inst, out)


def _glued_gain(inst, f, actions) -> float:
    pi = glue_stationary(f, _det(inst, actions))
    return float(pi @ inst.rewards[np.arange(inst.n), actions])


def improve_nonarticulation(inst: MdpInstance, f: Factorization, pol, tol=config.IMPROVEMENT_TOL):
    """Gain-only ratio step restricted to vertices that are not articulation points."""
    actions = _as_actions(inst, pol)
    beta = _glued_gain(inst, f, actions)
    arts = set(f.structure.articulation_points)
    interior = [i for i in range(inst.n) if i not in arts]
    step = _ratio_candidates(inst, f.rho, actions, beta, interior, tol)
    if step is None:
        return None
    out = actions.copy()
    out[step[0]] = step[1]
    return _det(inst, out)


def policy_iterate_biconnected(inst: MdpInstance, P0, rho, start=None, tol=config.IMPROVEMENT_TOL):
    pi0 = stationary_distribution(P0)
    actions = _as_actions(inst, start)
    tracer = _Tracer(inst, "biconnected", actions, lambda a: _biconnected_gain(inst, pi0, rho, a))
    while True:
        beta = tracer.current_gain
        step = _ratio_candidates(inst, rho, tracer.actions, beta, range(inst.n), tol)
        if step is None:
            return tracer.finish()
        tracer.apply(*step, rule="ratio")


def policy_iterate_hybrid(inst: MdpInstance, f: Factorization, start=None, tol=config.IMPROVEMENT_TOL):
    """Exhaust gain-only steps at interior vertices, then one ``h`` step at an articulation point.

    Loops until neither rule applies; the terminal policy is confirmed
    with :func:`dp_check`, falling back to a plain standard step anywhere
    if that ever fails.
    """
    actions = _as_actions(inst, start)
    tracer = _Tracer(inst, "hybrid", actions, lambda a: _glued_gain(inst, f, a))
    arts = list(f.structure.articulation_points)
    interior = [i for i in range(inst.n) if i not in set(arts)]
    while True:
        step = _ratio_candidates(inst, f.rho, tracer.actions, tracer.current_gain, interior, tol)
        if step is not None:
            tracer.apply(*step, rule="ratio")
            continue
        step = _standard_step(inst, tracer.actions, states=arts, tol=tol) if arts else None
        if step is not None:
            tracer.apply(*step, rule="standard-articulation")
            continue
        if dp_check(inst, _det(inst, tracer.actions), tol=tol).optimal:
            return tracer.finish()
        step = _standard_step(inst, tracer.actions, tol=tol)
        if step is None:
            return tracer.finish()
        tracer.apply(*step, rule="standard")


def brute_force_optimal(inst: MdpInstance, cap: int = config.ENUMERATION_CAP) -> tuple[Policy, float]:
    """Best deterministic policy by exhaustive evaluation.

    Ties (within a relative ``TIE_TOL``) go to the lexicographically first
    policy.
    """
    best_gain = -np.inf
    gains_all = []
    actions_all = []
    for actions in policy_index_batches(inst, cap):
        P = batch_kernels(inst, actions)
        pi = _stationary_unchecked(P)
        r = inst.rewards[np.arange(inst.n)[None, :], actions]
        g = np.einsum("kn,kn->k", pi, r)
        gains_all.append(g)
        actions_all.append(actions)
        best_gain = max(best_gain, float(g.max()))
    gains = np.concatenate(gains_all)
    actions = np.concatenate(actions_all)
    thresh = best_gain - config.TIE_TOL * max(1.0, abs(best_gain))
    k = int(np.flatnonzero(gains >= thresh)[0])
    pol = Policy.deterministic(actions[k], inst.m)
    return pol, gain(inst, pol)
