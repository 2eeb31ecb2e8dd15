"""Gaussian free field of a reversible controlled chain and local-time simulation.

The free field is represented through the scaled fundamental matrix
``C = Z diag(pi)^{-1}`` (symmetric PSD for reversible chains) or, after
pinning state ``k`` to zero, through the Green function ``g^[k]`` of the
continuous-time chain with symmetric jump rates ``pi_i p_ij`` killed at
``k``.  The Monte Carlo side simulates that chain up to the inverse local
time at ``k`` and compares both sides of the generalized second
Ray-Knight identity moment by moment.
"""

from __future__ import annotations

import bisect
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import config
from .errors import FactorizationFailure, InvalidConfig, InvalidLevel, NotReversible, SingularSolve
from .mdp_core import MdpInstance, Policy, controlled_kernel, stationary_distribution
from .rng import keyed_generator
from .solve import fundamental_matrix


@dataclass(frozen=True, eq=False)
class GffCovariance:
    c: np.ndarray
    stationary: np.ndarray


@dataclass(frozen=True, eq=False)
class PinnedGreen:
    pin: int
    g: np.ndarray  # (n-1) x (n-1), states != pin in increasing order
    n: int

    @property
    def others(self) -> np.ndarray:
        return np.array([i for i in range(self.n) if i != self.pin])

    def full(self) -> np.ndarray:
        """``n x n`` version with a zero row and column at the pin."""
        out = np.zeros((self.n, self.n))
        idx = self.others
        out[np.ix_(idx, idx)] = self.g
        return out


@dataclass(frozen=True, eq=False)
class LocalTimeField:
    pin: int
    level: float
    samples: np.ndarray  # (count, n)
    seed: int
    count: int


@dataclass
class RayKnightReport:
    pin: int
    level: float
    count: int
    seed: int
    z_threshold: float
    states: list = field(default_factory=list)  # per-state dicts
    passed: bool = False

    def to_dict(self) -> dict:
        return {
            "pin": self.pin,
            "level": self.level,
            "count": self.count,
            "seed": self.seed,
            "z_threshold": self.z_threshold,
            "states": self.states,
            "pass": self.passed,
        }


def _chain(inst: MdpInstance, pol: Policy):
    P = controlled_kernel(inst, pol)
    pi = stationary_distribution(P)
    return P, pi


def gff_covariance(inst: MdpInstance, pol: Policy, tol: float = config.SYMMETRY_TOL) -> GffCovariance:
    """``c_ij = z_ij / pi_j``; raises if it is not symmetric PSD."""
    P, _ = _chain(inst, pol)
    return covariance_from_kernel(P, tol)


def covariance_from_kernel(P, tol: float = config.SYMMETRY_TOL) -> GffCovariance:
    fm = fundamental_matrix(P)
    pi = fm.stationary
    C = fm.z / pi[None, :]
    scale = max(1.0, float(np.max(np.abs(C))))
    asym = float(np.max(np.abs(C - C.T)))
    if asym > tol * scale:
        raise NotReversible(f"z_ij/pi_j is not symmetric (max gap {asym:.3e})")
    C = 0.5 * (C + C.T)
    lam = float(np.linalg.eigvalsh(C).min())
    if lam < -config.PSD_TOL * scale:
        raise NotReversible(f"z_ij/pi_j is not positive semidefinite (min eigenvalue {lam:.3e})")
    return GffCovariance(C, pi)


def covariance_difference(C, k: int) -> np.ndarray:
    """``Cov(V_i - V_k, V_j - V_k) = c_ij - c_ik - c_kj + c_kk`` over ``i, j != k``."""
    C = np.asarray(C)
    D = C - C[:, [k]] - C[[k], :] + C[k, k]
    keep = [i for i in range(C.shape[0]) if i != k]
    return D[np.ix_(keep, keep)]


def jump_rates(P, pi) -> np.ndarray:
    """Off-diagonal rates ``pi_i p_ij`` of the symmetric continuous-time chain."""
    Q = pi[:, None] * np.asarray(P)
    np.fill_diagonal(Q, 0.0)
    return Q


def pinned_green(inst: MdpInstance, pol: Policy, k: int, tol: float = config.GREEN_TOL) -> PinnedGreen:
    """Mean occupation times before absorption at ``k``.

    Solves ``(-Qhat) G = I`` where ``Qhat`` is the generator with rates
    ``pi_i p_ij`` restricted to the states other than ``k``, and checks the
    result against the covariance-difference formula.
    """
    P, pi = _chain(inst, pol)
    n = inst.n
    if not 0 <= k < n:
        raise ValueError(f"pin {k} out of range")
    Q = jump_rates(P, pi)
    L = np.diag(Q.sum(axis=1)) - Q
    keep = [i for i in range(n) if i != k]
    A = L[np.ix_(keep, keep)]
    try:
        G = np.linalg.solve(A, np.eye(n - 1))
    except np.linalg.LinAlgError as exc:
        raise SingularSolve(str(exc)) from None
    G = 0.5 * (G + G.T)
    C = covariance_from_kernel(P).c
    gap = float(np.max(np.abs(G - covariance_difference(C, k))))
    if gap > tol * max(1.0, float(np.max(np.abs(G)))):
        raise SingularSolve(f"pinned Green function disagrees with covariance formula by {gap:.3e}")
    return PinnedGreen(k, G, n)


def sample_pinned_field(g: PinnedGreen, count: int, seed: int, domain: str = "field") -> np.ndarray:
    """``count`` draws of the field pinned to zero at ``g.pin``, shape ``(count, n)``."""
    out = np.zeros((count, g.n))
    if count == 0:
        return out
    try:
        Lc = np.linalg.cholesky(g.g)
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailure(str(exc)) from None
    rng = keyed_generator(seed, 0, domain)
    z = rng.standard_normal((count, g.n - 1))
    out[:, g.others] = z @ Lc.T
    return out


# -- continuous-time simulation ---------------------------------------------


class _Walker:
    """Plain-Python CTMC stepping with precomputed holding rates and jump tables."""

    def __init__(self, P, pi):
        Q = jump_rates(P, pi)
        self.n = len(pi)
        self.rate = [float(x) for x in Q.sum(axis=1)]
        self.targets = []
        self.cum = []
        for i in range(self.n):
            js = [j for j in range(self.n) if Q[i, j] > 0.0]
            w = np.cumsum([Q[i, j] for j in js]) / self.rate[i]
            self.targets.append(js)
            self.cum.append([float(x) for x in w[:-1]])

    def _draws(self, rng, size):
        return rng.standard_exponential(size).tolist(), rng.random(size).tolist()

    def run_to_local_time(self, rng, k: int, s: float) -> list[float]:
        """Local times at the first moment the time spent at ``k`` reaches ``s``."""
        L = [0.0] * self.n
        state = k
        exps, unis = self._draws(rng, 64)
        pos = 0
        while True:
            if pos == len(exps):
                exps, unis = self._draws(rng, 64)
                pos = 0
            hold = exps[pos] / self.rate[state]
            if state == k and L[k] + hold >= s:
                L[k] = s
                return L
            L[state] += hold
            state = self.targets[state][bisect.bisect_right(self.cum[state], unis[pos])]
            pos += 1

    def run_to_clock(self, rng, start: int, horizon: float, speed) -> list[float]:
        """Local times when ``sum_i speed_i L_i`` first reaches ``horizon``."""
        L = [0.0] * self.n
        state = start
        clock = 0.0
        exps, unis = self._draws(rng, 64)
        pos = 0
        while True:
            if pos == len(exps):
                exps, unis = self._draws(rng, 64)
                pos = 0
            hold = exps[pos] / self.rate[state]
            if clock + speed[state] * hold >= horizon:
                L[state] += (horizon - clock) / speed[state]
                return L
            clock += speed[state] * hold
            L[state] += hold
            state = self.targets[state][bisect.bisect_right(self.cum[state], unis[pos])]
            pos += 1


def _local_time_chunk(args):
    P, pi, k, s, seed, lo, hi, domain = args
    walker = _Walker(P, pi)
    out = np.empty((hi - lo, len(pi)))
    for t in range(lo, hi):
        out[t - lo] = walker.run_to_local_time(keyed_generator(seed, t, domain), k, s)
    return out


def _occupation_chunk(args):
    P, pi, start, horizon, seed, lo, hi, domain = args
    walker = _Walker(P, pi)
    speed = [float(x) for x in pi]
    out = np.empty((hi - lo, len(pi)))
    for t in range(lo, hi):
        out[t - lo] = walker.run_to_clock(keyed_generator(seed, t, domain), start, horizon, speed)
    return out


def _run_chunks(fn, common, count, workers):
    """Split ``range(count)`` into contiguous chunks; results stay in trajectory order."""
    if count == 0:
        return None
    workers = max(1, int(workers))
    bounds = np.linspace(0, count, min(workers, count) + 1).astype(int)
    jobs = [common[:-3] + (int(lo), int(hi), common[-1]) for lo, hi in zip(bounds[:-1], bounds[1:])]
    if workers == 1:
        parts = [fn(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(fn, jobs))
    return np.concatenate(parts)


def simulate_local_times(
    inst: MdpInstance, pol: Policy, k: int, s: float, count: int, seed: int, workers: int = 1
) -> LocalTimeField:
    """Local-time vectors ``L_{., Gamma_{k,s}}`` of ``count`` independent trajectories.

    The chain jumps ``i -> j`` at rate ``pi_i p_ij`` and starts at ``k``;
    the final sojourn at ``k`` is cut exactly when its local time hits
    ``s``.  Trajectory ``t`` draws from the stream keyed ``(seed, t)``, so
    the output does not depend on ``workers``.
    """
    if not s > 0.0:
        raise InvalidLevel(f"level must be positive, got {s!r}")
    P, pi = _chain(inst, pol)
    samples = _run_chunks(_local_time_chunk, (P, pi, k, s, seed, 0, 0, "local-time"), count, workers)
    if samples is None:
        samples = np.zeros((0, inst.n))
    return LocalTimeField(k, float(s), samples, int(seed), int(count))


def simulate_occupation(
    inst: MdpInstance, pol: Policy, start: int, horizon: float, count: int, seed: int, workers: int = 1
) -> np.ndarray:
    """Local times of the symmetric-rate chain over ``horizon`` units of the original clock.

    The original clock is the rate ``P - I`` chain, which runs at speed
    ``pi_i`` relative to the symmetric-rate chain while in state ``i``.
    ``mean(samples[:, j]) - horizon`` then tends to ``c_{start, j}``.
    """
    if not horizon > 0.0:
        raise InvalidLevel(f"horizon must be positive, got {horizon!r}")
    P, pi = _chain(inst, pol)
    samples = _run_chunks(
        _occupation_chunk, (P, pi, start, horizon, seed, 0, 0, "occupation"), count, workers
    )
    return np.zeros((0, inst.n)) if samples is None else samples


# -- Ray-Knight comparison ---------------------------------------------------


def _mean_se(x):
    n = len(x)
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")


def _var_se(x):
    n = len(x)
    mu = np.mean(x)
    var = float(np.var(x, ddof=1))
    m4 = float(np.mean((x - mu) ** 4))
    return var, math.sqrt(max(m4 - var * var, 0.0) / n)


def _z(diff, se):
    if se > 0.0:
        return float(abs(diff) / se)
    return 0.0 if abs(diff) <= 1e-12 else math.inf


def ray_knight_check(
    inst: MdpInstance,
    pol: Policy,
    k: int,
    s: float,
    count: int,
    seed: int,
    z_threshold: float = config.Z_THRESHOLD,
    workers: int = 1,
) -> RayKnightReport:
    """Compare ``L + V^2/2`` with ``(V' + sqrt(2s))^2 / 2`` state by state.

    ``V`` and ``V'`` are independent pinned-field draws, independent of
    the local times.  Per state the report gates on: mean of the local
    time vs ``s``; both sides' means vs the analytic ``g_ii/2 + s``; the
    two-sample difference of means and of variances.  A two-sample KS
    statistic is included for inspection only.
    """
    if count < 2:
        raise InvalidConfig("need at least two trajectories for standard errors")
    green = pinned_green(inst, pol, k)
    lt = simulate_local_times(inst, pol, k, s, count, seed, workers)
    V = sample_pinned_field(green, count, seed, "field-lhs")
    W = sample_pinned_field(green, count, seed, "field-rhs")
    lhs = lt.samples + 0.5 * V**2
    rhs = 0.5 * (W + math.sqrt(2.0 * s)) ** 2
    gfull = green.full()
    report = RayKnightReport(k, float(s), int(count), int(seed), float(z_threshold))
    ok_all = True
    for i in range(inst.n):
        target = 0.5 * gfull[i, i] + s
        lt_mean, lt_se = _mean_se(lt.samples[:, i])
        l_mean, l_se = _mean_se(lhs[:, i])
        r_mean, r_se = _mean_se(rhs[:, i])
        l_var, l_var_se = _var_se(lhs[:, i])
        r_var, r_var_se = _var_se(rhs[:, i])
        z = {
            "local_time_vs_level": _z(lt_mean - s, lt_se),
            "lhs_vs_analytic": _z(l_mean - target, l_se),
            "rhs_vs_analytic": _z(r_mean - target, r_se),
            "lhs_vs_rhs_mean": _z(l_mean - r_mean, math.hypot(l_se, r_se)),
            "lhs_vs_rhs_variance": _z(l_var - r_var, math.hypot(l_var_se, r_var_se)),
        }
        checks = {name: bool(val <= z_threshold) for name, val in z.items()}
        ok = all(checks.values())
        ok_all &= ok
        if i == k:
            ks = 0.0
        else:
            ks = float(stats.ks_2samp(lhs[:, i], rhs[:, i]).statistic)
        report.states.append(
            {
                "state": i,
                "analytic_mean": target,
                "green_diagonal": float(gfull[i, i]),
                "local_time_mean": lt_mean,
                "local_time_se": lt_se,
                "lhs_mean": l_mean,
                "lhs_se": l_se,
                "lhs_variance": l_var,
                "lhs_variance_se": l_var_se,
                "rhs_mean": r_mean,
                "rhs_se": r_se,
                "rhs_variance": r_var,
                "rhs_variance_se": r_var_se,
                "z": z,
                "checks": checks,
                "ks_statistic": ks,
                "pass": ok,
            }
        )
    report.passed = bool(ok_all)
    return report
