import numpy as np
import pytest

from rmdp import CanonicalGraph, Policy, generate_instance, validate_instance

# Nine-vertex graph with five blocks; vertices 1..9 stored as 0..8.
FIVE_BLOCK_EDGES = [(1, 2), (2, 3), (3, 5), (3, 6), (5, 6), (4, 6), (6, 7), (6, 8), (7, 9), (8, 9)]
FIVE_BLOCK_BLOCKS = [{1, 2}, {2, 3}, {3, 5, 6}, {4, 6}, {6, 7, 8, 9}]


def two_branch(a=0.3, b=0.7, rewards=None):
    P1 = [[0, a, 1 - a], [1, 0, 0], [1, 0, 0]]
    P2 = [[0, b, 1 - b], [1, 0, 0], [1, 0, 0]]
    r = np.zeros((3, 2)) if rewards is None else rewards
    return validate_instance(["1", "2", "3"], ["1", "2"], [P1, P2], r)


def five_block_graph():
    return CanonicalGraph(9, tuple((i - 1, j - 1) for i, j in FIVE_BLOCK_EDGES))


def five_block_config(**extra):
    g = five_block_graph()
    blocks = [sorted(v - 1 for v in b) for b in FIVE_BLOCK_BLOCKS]
    block_edges = [g.subgraph_edges(b) for b in blocks]
    cfg = {"mode": "blocks", "n": 9, "m": 2, "blocks": blocks, "block_edges": block_edges,
           "states": [str(i) for i in range(1, 10)]}
    cfg.update(extra)
    return cfg


def random_instance(seed, n=None, m=None, mode=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(2, 7))
    m = m or int(rng.integers(2, 4))
    mode = mode or ("weighted" if rng.random() < 0.5 else "blocks")
    return generate_instance({"mode": mode, "n": n, "m": m}, seed)


def random_policy(inst, rng, deterministic=False):
    if deterministic:
        return Policy.deterministic(rng.integers(0, inst.m, inst.n), inst.m)
    w = rng.random((inst.n, inst.m)) + 0.05
    return Policy(w / w.sum(axis=1, keepdims=True))


def random_reversible_kernel(rng, n, lazy=True):
    """Dense reversible chain from random symmetric weights (oracle fixture)."""
    W = rng.random((n, n)) + 0.1
    W = W + W.T
    if not lazy:
        np.fill_diagonal(W, 0.0)
    return W / W.sum(axis=1, keepdims=True)


def single_kernel_instance(P, rewards=None):
    """Two identical actions, so the controlled chain is ``P`` under any policy."""
    n = len(P)
    r = np.zeros((n, 2)) if rewards is None else rewards
    return validate_instance([str(i) for i in range(n)], ["a", "b"], [P, P], r)


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
