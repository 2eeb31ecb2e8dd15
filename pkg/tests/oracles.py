"""Independent brute-force oracles used to freeze expected values.

None of these call into the code paths they check.
"""

import itertools

import networkx as nx
import numpy as np


def power_stationary(P, tol=1e-15, max_squarings=200):
    """Stationary vector by repeated squaring until all rows agree (aperiodic chains)."""
    M = np.array(P, dtype=float)
    for _ in range(max_squarings):
        M = M @ M
        if np.max(np.ptp(M, axis=0)) < tol:
            break
    return M.mean(axis=0)


def cesaro_partial_sums(P, K, window=None):
    """Average of the partial sums ``S_L = sum_{k<L} (P^k - 1 pi^T)``.

    ``window=None`` averages ``L = 1..K`` (plain Cesaro mean); otherwise
    only the last ``window`` partial sums are averaged.
    """
    P = np.asarray(P, dtype=float)
    pi = power_stationary(0.5 * (P + np.eye(len(P))))  # lazy version shares pi, is aperiodic
    n = len(pi)
    Pi = np.outer(np.ones(n), pi)
    first = 1 if window is None else K - window + 1
    Pk = np.eye(n)
    S = np.zeros((n, n))
    acc = np.zeros((n, n))
    for L in range(1, K + 1):
        S += Pk - Pi
        if L >= first:
            acc += S
        Pk = Pk @ P
    return acc / (K - first + 1)


def brute_cut_vertices(n, edges):
    adj = {v: set() for v in range(n)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    out = []
    for x in range(n):
        rest = [v for v in range(n) if v != x]
        if not rest:
            continue
        seen = {rest[0]}
        stack = [rest[0]]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w != x and w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) < len(rest):
            out.append(x)
    return tuple(out)


def enumerate_gains(inst):
    """Gain of every deterministic policy via independent eigenvector solves."""
    out = {}
    for acts in itertools.product(range(inst.m), repeat=inst.n):
        P = np.array([inst.kernels[u, i] for i, u in enumerate(acts)])
        w, V = np.linalg.eig(P.T)
        v = np.real(V[:, np.argmin(np.abs(w - 1.0))])
        pi = v / v.sum()
        r = np.array([inst.rewards[i, u] for i, u in enumerate(acts)])
        out[acts] = float(pi @ r)
    return out


def networkx_blocks(n, edges):
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    return sorted((tuple(sorted(c)) for c in nx.biconnected_components(g)), key=lambda b: (b[0], b))
