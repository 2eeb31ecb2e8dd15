"""Structural parameters of an RMDP and the inverse construction.

Every RMDP decomposes over the blocks of its canonical graph as::

    p_ij(u) = rho(i, u) * nu_i(u, B) * p0_ij(B)     i, j in B, j != i
    p_ii(u) = 1 - rho(i, u)

with one irreducible reversible zero-diagonal kernel ``p0(B)`` per block,
holding rates ``rho`` in (0, 1], and branch weights ``nu_a(u, .)`` that
split an articulation point's outflow across its blocks.  This module
extracts those parameters, rebuilds kernels from them, glues per-block
stationary vectors into the global one and generates random instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import config
from .errors import (
    InvalidConfig,
    InvalidFactorization,
    NotBiconnected,
    NotRmdp,
    NotTree,
    RatioMismatch,
)
from .mdp_core import (
    MdpInstance,
    Policy,
    check_irreducible,
    check_no_absorbing_rows,
    controlled_kernel,
    stationary_distribution,
    validate_instance,
)
from .rng import keyed_generator
from .structure import (
    BlockStructure,
    CanonicalGraph,
    block_decomposition,
    block_tree_order,
    canonical_graph,
    is_tree,
)


@dataclass(frozen=True, eq=False)
class WeightedGraphSpec:
    """Symmetric positive edge weights ``s_ij`` on a simple connected graph."""

    graph: CanonicalGraph
    weights: np.ndarray  # n x n, symmetric, zero off the edge set

    @classmethod
    def from_edges(cls, graph: CanonicalGraph, edge_weights) -> "WeightedGraphSpec":
        edge_weights = np.asarray(edge_weights, dtype=float)
        if edge_weights.shape != (len(graph.edges),):
            raise InvalidConfig("need one weight per edge")
        if np.any(edge_weights <= 0.0):
            raise InvalidConfig("edge weights must be strictly positive")
        S = np.zeros((graph.n, graph.n))
        for (i, j), w in zip(graph.edges, edge_weights):
            S[i, j] = S[j, i] = w
        return cls(graph, S)

    @property
    def vertex_weights(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    @property
    def total_weight(self) -> float:
        return float(self.vertex_weights.sum())

    def kernel(self) -> np.ndarray:
        return kernel_from_weights(self.weights)

    def stationary(self) -> np.ndarray:
        return self.vertex_weights / self.total_weight


def kernel_from_weights(S) -> np.ndarray:
    """``p0_ij = s_ij / s_i``."""
    S = np.asarray(S, dtype=float)
    return S / S.sum(axis=1, keepdims=True)


def weights_from_kernel(P0) -> np.ndarray:
    """Edge weights ``s_ij = pi0_i p0_ij`` reproducing a reversible zero-diagonal kernel."""
    P0 = np.asarray(P0, dtype=float)
    pi0 = stationary_distribution(P0)
    S = pi0[:, None] * P0
    return 0.5 * (S + S.T)


@dataclass(frozen=True, eq=False)
class BlockKernel:
    block: tuple
    matrix: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True, eq=False)
class Factorization:
    """Per-block kernels plus ``rho`` (n x m) and ``nu`` (blocks x n x m).

    ``nu[b, i, u]`` follows the usual convention: 1 for interior vertices
    of block ``b``, 0 for vertices outside it, and the branch weight for
    articulation points.
    """

    structure: BlockStructure
    block_kernels: tuple
    rho: np.ndarray
    nu: np.ndarray
    states: tuple
    actions: tuple

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def m(self) -> int:
        return len(self.actions)

    def tau(self) -> np.ndarray:
        """``tau[b, i, u] = rho(i, u) nu_i(u, B_b)``."""
        return self.rho[None, :, :] * self.nu

    def branch_weights(self) -> dict:
        """``{a: {b: nu_a(., B_b)}}`` for articulation points only."""
        out = {}
        for a in self.structure.articulation_points:
            out[a] = {b: self.nu[b, a].copy() for b in self.structure.membership[a]}
        return out

    def validate(self, tol: float = config.BALANCE_TOL) -> None:
        bs = self.structure
        n, m = self.n, self.m
        if self.rho.shape != (n, m) or self.nu.shape != (len(bs.blocks), n, m):
            raise InvalidFactorization("rho / nu have the wrong shape")
        if np.any(self.rho <= 0.0) or np.any(self.rho > 1.0):
            raise InvalidFactorization("rho must lie in (0, 1]")
        arts = set(bs.articulation_points)
        for b, verts in enumerate(bs.blocks):
            inside = np.zeros(n, dtype=bool)
            inside[list(verts)] = True
            if np.any(self.nu[b, ~inside] != 0.0):
                raise InvalidFactorization(f"nu nonzero outside block {b}")
            for v in verts:
                if v not in arts and np.any(self.nu[b, v] != 1.0):
                    raise InvalidFactorization(f"nu must be 1 at interior vertex {v}")
                if v in arts and np.any(self.nu[b, v] <= 0.0):
                    raise InvalidFactorization(f"nu must be positive at articulation point {v}")
        for a in arts:
            total = self.nu[:, a, :].sum(axis=0)
            if np.any(np.abs(total - 1.0) > config.ROW_SUM_TOL * 10):
                raise InvalidFactorization(f"branch weights at {a} do not sum to 1")
        for bk in self.block_kernels:
            K = bk.matrix
            k = len(bk.block)
            if K.shape != (k, k) or np.any(np.diag(K) != 0.0) or np.any(K < 0.0):
                raise InvalidFactorization(f"bad block kernel on {bk.block}")
            if np.any(np.abs(K.sum(axis=1) - 1.0) > config.ROW_SUM_TOL * 10):
                raise InvalidFactorization(f"block kernel on {bk.block} is not stochastic")
            if not check_irreducible(K):
                raise InvalidFactorization(f"block kernel on {bk.block} is not irreducible")
            Q = bk.psi[:, None] * K
            if np.max(np.abs(Q - Q.T)) > tol:
                raise InvalidFactorization(f"block kernel on {bk.block} is not reversible")


def _block_kernel(block, K) -> BlockKernel:
    K = np.array(K, dtype=float)
    return BlockKernel(tuple(block), K, stationary_distribution(K))


def _require_reversible(bk: BlockKernel, tol: float) -> None:
    Q = bk.psi[:, None] * bk.matrix
    if np.max(np.abs(Q - Q.T)) > tol:
        raise NotRmdp(f"normalized kernel on block {bk.block} is not reversible")


def factorize_biconnected(
    inst: MdpInstance, tol: float = config.RATIO_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """``(P0, rho)`` with ``p_ij(u) = rho(i, u) p0_ij`` for a biconnected RMDP."""
    check_no_absorbing_rows(inst)
    g = canonical_graph(inst)
    if len(block_decomposition(g).blocks) != 1:
        raise NotBiconnected("canonical graph is not biconnected")
    n = inst.n
    diag = np.diagonal(inst.kernels, axis1=1, axis2=2)  # (m, n)
    rho = (1.0 - diag).T  # (n, m)
    off = ~np.eye(n, dtype=bool)
    ratios = inst.kernels / rho.T[:, :, None]
    ratios[:, ~off] = 0.0
    _check_action_independent(ratios, tol)
    P0 = ratios[0].copy()
    bk = _block_kernel(tuple(range(n)), P0)
    _require_reversible(bk, config.BALANCE_TOL)
    return P0, rho


def _check_action_independent(ratios: np.ndarray, tol: float, index=None) -> None:
    gap = np.abs(ratios - ratios[0:1])
    if gap.max(initial=0.0) > tol:
        v, i, j = np.unravel_index(np.argmax(gap), gap.shape)
        if index is not None:
            i, j = index[i], index[j]
        raise RatioMismatch(i, j, 0, v, float(gap.max()))


def factorize_general(inst: MdpInstance, tol: float = config.RATIO_TOL) -> Factorization:
    """Recover block kernels, ``rho`` and ``nu`` for an arbitrary RMDP."""
    check_no_absorbing_rows(inst)
    g = canonical_graph(inst)
    bs = block_decomposition(g)
    n, m = inst.n, inst.m
    K = inst.kernels
    off = ~np.eye(n, dtype=bool)
    rho = np.where(off[None], K, 0.0).sum(axis=2).T  # (n, m)
    nu = np.zeros((len(bs.blocks), n, m))
    kernels = []
    for b, verts in enumerate(bs.blocks):
        idx = np.array(verts)
        sub = K[:, idx[:, None], idx[None, :]].copy()  # (m, k, k)
        sub[:, np.arange(len(idx)), np.arange(len(idx))] = 0.0
        mass = sub.sum(axis=2)  # (m, k)
        ratios = sub / mass[:, :, None]
        _check_action_independent(ratios, tol, index=idx)
        bk = _block_kernel(verts, ratios[0])
        _require_reversible(bk, config.BALANCE_TOL)
        kernels.append(bk)
        nu[b, idx, :] = (mass / rho.T[:, idx]).T
    for v in range(n):
        if v not in bs.articulation_points:
            for b in bs.membership[v]:
                nu[b, v, :] = 1.0
    return Factorization(bs, tuple(kernels), rho, nu, inst.states, inst.actions)


def synthesize(f: Factorization, rewards, states=None, actions=None) -> MdpInstance:
    """Build the kernels ``P(u)`` from a factorization."""
    f.validate()
    n, m = f.n, f.m
    K = np.zeros((m, n, n))
    tau = f.tau()
    for b, bk in enumerate(f.block_kernels):
        idx = np.array(bk.block)
        # tau[b, idx, :] is (k, m); broadcast over the block kernel columns
        K[:, idx[:, None], idx[None, :]] += tau[b][idx].T[:, :, None] * bk.matrix[None]
    K[:, np.arange(n), np.arange(n)] = 1.0 - f.rho.T
    return validate_instance(
        states if states is not None else f.states,
        actions if actions is not None else f.actions,
        K,
        rewards,
    )


def glue_stationary(f: Factorization, pol: Policy, root: int = 0) -> np.ndarray:
    """Stationary distribution of ``P(mu)`` assembled block by block.

    Within block ``B`` the vector ``psi_i(B) / tau_i(mu, B)`` is balanced;
    scaling factors are propagated breadth-first over the block-cut tree
    from the root block (default: the one holding vertex 0) so the values
    agree at every shared articulation point, then everything is
    normalized.  The result does not depend on ``root``.
    """
    w = np.asarray(pol.weights)
    tau_mu = np.einsum("bnu,nu->bn", f.tau(), w)  # (blocks, n)
    bs = f.structure
    gamma = np.zeros(f.n)
    scale = {}
    for b, parent, a in block_tree_order(bs, root=root):
        psi = f.block_kernels[b].psi
        verts = bs.blocks[b]
        local = dict(zip(verts, psi / tau_mu[b, list(verts)]))
        if parent is None:
            scale[b] = 1.0
        else:
            pverts = bs.blocks[parent]
            ppsi = f.block_kernels[parent].psi[pverts.index(a)]
            scale[b] = scale[parent] * (ppsi / tau_mu[parent, a]) / local[a]
        for v, val in local.items():
            gamma[v] = scale[b] * val
    return gamma / gamma.sum()


def tree_stationary_product(inst: MdpInstance, pol: Policy) -> np.ndarray:
    """Stationary vector of a tree-structured chain via the product formula.

    ``pi_i`` is proportional to the product over ``k != i`` of the
    probability of stepping from ``k`` to its neighbour on the path towards
    ``i``.  Needs no linear solve, so it doubles as an independent oracle.
    """
    g = canonical_graph(inst)
    if not is_tree(g):
        raise NotTree("canonical graph is not a tree")
    P = controlled_kernel(inst, pol)
    adj = g.neighbors()
    n = inst.n
    logw = np.zeros(n)
    for i in range(n):
        # parent pointers of the tree rooted at i give the next hop towards i
        nxt = [-1] * n
        stack = [i]
        seen = {i}
        while stack:
            v = stack.pop()
            for w_ in adj[v]:
                if w_ not in seen:
                    seen.add(w_)
                    nxt[w_] = v
                    stack.append(w_)
        logw[i] = sum(np.log(P[k, nxt[k]]) for k in range(n) if k != i)
    w = np.exp(logw - logw.max())
    return w / w.sum()


# -- random instances -------------------------------------------------------


def _random_biconnected_edges(verts, rng, chord_prob: float):
    verts = list(verts)
    k = len(verts)
    if k == 2:
        return [(verts[0], verts[1])]
    order = [verts[i] for i in rng.permutation(k)]
    edges = {tuple(sorted((order[i], order[(i + 1) % k]))) for i in range(k)}
    for a, b in itertools.combinations(sorted(verts), 2):
        if (a, b) not in edges and rng.random() < chord_prob:
            edges.add((a, b))
    return sorted(edges)


def _random_block_layout(n: int, rng, max_block: int):
    """Blocks forming a tree: each new block hangs off an existing vertex."""
    first = int(rng.integers(2, min(max_block, n) + 1))
    blocks = [list(range(first))]
    used = first
    while used < n:
        size = int(rng.integers(2, min(max_block, n - used + 1) + 1))
        anchor = int(rng.integers(0, used))
        blocks.append([anchor] + list(range(used, used + size - 1)))
        used += size - 1
    return blocks


def _rho(cfg, n, m, rng):
    if "rho" in cfg:
        rho = np.asarray(cfg["rho"], dtype=float)
        if rho.shape != (n, m):
            raise InvalidConfig(f"rho must be {n} x {m}")
    else:
        lo = float(cfg.get("rho_min", config.RHO_MIN))
        if not 0.0 < lo <= 1.0:
            raise InvalidConfig("rho_min must lie in (0, 1]")
        rho = lo + (1.0 - lo) * rng.random((n, m))
    if np.any(rho <= 0.0) or np.any(rho > 1.0):
        raise InvalidConfig("rho must lie in (0, 1]")
    return rho


def _rewards(cfg, n, m, rng):
    if "rewards" in cfg:
        r = np.asarray(cfg["rewards"], dtype=float)
        if r.shape != (n, m):
            raise InvalidConfig(f"rewards must be {n} x {m}")
        return r
    return rng.standard_normal((n, m))


def _labels(cfg, key, count):
    labels = cfg.get(key)
    if labels is None:
        return tuple(str(i) for i in range(count))
    if len(labels) != count:
        raise InvalidConfig(f"{key} must have {count} labels")
    return tuple(labels)


def generate_instance(cfg: dict, seed: int) -> MdpInstance:
    """Random RMDP from a generator config; deterministic in ``seed``.

    Config keys
    -----------
    mode : ``"weighted"`` (one weighted graph, single ``p0``) or ``"blocks"``
        (independent weighted graph per block, random branch weights).
    n, m : int
        Numbers of states and actions.
    edges, weights : optional, weighted mode
        Edge list and matching positive weights.  A random biconnected graph
        (Hamilton cycle plus chords) with weights in [0.5, 2) is drawn when
        absent.
    blocks, block_edges : optional, blocks mode
        Vertex lists of the blocks (they must form a block-cut tree) and,
        per block, its edge list.  Blocks default to a random layout with
        at most ``max_block`` (default 3) vertices each, edges to a random
        biconnected graph on the block.
    block_weights : optional, blocks mode
        Per block, one weight per block edge.
    rho / rho_min, rewards, nu_min, chord_prob, states, actions : optional.
    """
    try:
        mode = cfg["mode"]
        n = int(cfg["n"])
        m = int(cfg["m"])
    except KeyError as exc:
        raise InvalidConfig(f"generator config is missing {exc}") from None
    if n < 2 or m < 2:
        raise InvalidConfig("need n >= 2 and m >= 2")
    rng = keyed_generator(seed, domain="generate")
    chord_prob = float(cfg.get("chord_prob", 0.3))
    states = _labels(cfg, "states", n)
    actions = _labels(cfg, "actions", m)

    if mode == "weighted":
        if "edges" in cfg:
            edges = [tuple(e) for e in cfg["edges"]]
        else:
            edges = _random_biconnected_edges(range(n), rng, chord_prob)
        g = CanonicalGraph(n, tuple(edges))
        if "weights" in cfg:
            lookup = {tuple(sorted(e)): w for e, w in zip(edges, cfg["weights"])}
            if len(cfg["weights"]) != len(edges):
                raise InvalidConfig("need one weight per edge")
            ws = [lookup[e] for e in g.edges]
        else:
            ws = 0.5 + 1.5 * rng.random(len(g.edges))
        if not g.is_connected():
            raise InvalidConfig("graph must be connected")
        spec = WeightedGraphSpec.from_edges(g, ws)
        P0 = spec.kernel()
        rho = _rho(cfg, n, m, rng)
        rewards = _rewards(cfg, n, m, rng)
        K = rho.T[:, :, None] * P0[None, :, :]
        K[:, np.arange(n), np.arange(n)] = 1.0 - rho.T
        return validate_instance(states, actions, K, rewards)

    if mode != "blocks":
        raise InvalidConfig(f"unknown mode {mode!r}")
    if "blocks" in cfg:
        layout = [sorted(int(v) for v in b) for b in cfg["blocks"]]
    else:
        layout = _random_block_layout(n, rng, int(cfg.get("max_block", 3)))
    if "block_edges" in cfg:
        block_edges = [[tuple(e) for e in es] for es in cfg["block_edges"]]
        if len(block_edges) != len(layout):
            raise InvalidConfig("need one edge list per block")
    else:
        block_edges = [_random_biconnected_edges(b, rng, chord_prob) for b in layout]
    all_edges = [e for es in block_edges for e in es]
    g = CanonicalGraph(n, tuple(all_edges))
    if not g.is_connected():
        raise InvalidConfig("block layout does not give a connected graph")
    bs = block_decomposition(g)
    if sorted(map(tuple, layout)) != sorted(bs.blocks):
        raise InvalidConfig("block layout does not match the biconnected components of its edges")

    # draw weights in the order the blocks were given, then reorder
    per_block = {}
    for k, (verts, es) in enumerate(zip(layout, block_edges)):
        if "block_weights" in cfg:
            ws = np.asarray(cfg["block_weights"][k], dtype=float)
        else:
            ws = 0.5 + 1.5 * rng.random(len(es))
        if len(ws) != len(es) or np.any(ws <= 0.0):
            raise InvalidConfig(f"block {k} needs one positive weight per edge")
        S = np.zeros((n, n))
        for (i, j), w in zip(es, ws):
            S[i, j] = S[j, i] = w
        idx = np.array(verts)
        per_block[tuple(verts)] = kernel_from_weights(S[np.ix_(idx, idx)])
    kernels = tuple(_block_kernel(b, per_block[b]) for b in bs.blocks)

    rho = _rho(cfg, n, m, rng)
    nu = np.zeros((len(bs.blocks), n, m))
    nu_min = float(cfg.get("nu_min", 0.1))
    for b, verts in enumerate(bs.blocks):
        nu[b, list(verts), :] = 1.0
    for a in bs.articulation_points:
        bl = bs.membership[a]
        raw = nu_min + rng.random((len(bl), m))
        nu[bl, a, :] = raw / raw.sum(axis=0, keepdims=True)
    rewards = _rewards(cfg, n, m, rng)
    f = Factorization(bs, kernels, rho, nu, states, actions)
    return synthesize(f, rewards)
