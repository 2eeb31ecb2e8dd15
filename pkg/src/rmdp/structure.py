"""Canonical graph of an RMDP and its block (biconnected component) structure."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import AsymmetricSupport, Disconnected, SupportMismatch
from .mdp_core import MdpInstance


@dataclass(frozen=True)
class CanonicalGraph:
    """Simple undirected graph on vertices ``0..n-1``; edges stored as ``(i, j)``, ``i < j``."""

    n: int
    edges: tuple
    labels: tuple | None = None

    def __post_init__(self):
        edges = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range")
            edges.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(edges)))

    def neighbors(self) -> list[list[int]]:
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        for a in adj:
            a.sort()
        return adj

    def is_connected(self) -> bool:
        return _reachable(self.neighbors(), 0) == self.n

    def subgraph_edges(self, vertices) -> list[tuple[int, int]]:
        vs = set(vertices)
        return [e for e in self.edges if e[0] in vs and e[1] in vs]


@dataclass(frozen=True)
class BlockStructure:
    """Blocks (sorted vertex tuples), articulation points and the block-cut tree.

    ``block_cut_tree`` maps nodes ``("B", b)`` and ``("A", a)`` to their
    neighbours; block ``b`` is adjacent to articulation point ``a`` iff
    ``a`` lies in it.
    """

    graph: CanonicalGraph
    blocks: tuple
    articulation_points: tuple
    membership: dict = field(compare=False)
    block_cut_tree: dict = field(compare=False)

    def interior(self, b: int) -> tuple:
        """Vertices of block ``b`` that are not articulation points."""
        arts = set(self.articulation_points)
        return tuple(v for v in self.blocks[b] if v not in arts)

    def block_edges(self, b: int) -> list[tuple[int, int]]:
        return self.graph.subgraph_edges(self.blocks[b])


def _reachable(adj, start, removed=None) -> int:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w != removed and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen)


def canonical_graph(inst: MdpInstance, threshold: float = config.SUPPORT_THRESHOLD) -> CanonicalGraph:
    """Edges are the off-diagonal pairs with positive probability under every action."""
    pos = inst.kernels > threshold
    n = inst.n
    off = ~np.eye(n, dtype=bool)
    mismatches = []
    for u in range(inst.m):
        for v in range(inst.m):
            if u == v:
                continue
            for i, j in np.argwhere(pos[u] & ~pos[v] & off):
                mismatches.append((i, j, u, v))
    if mismatches:
        raise SupportMismatch(sorted(mismatches))
    support = pos[0] & off
    asym = np.argwhere(support & ~support.T)
    if len(asym):
        i, j = asym[0]
        raise AsymmetricSupport(
            f"p[{i},{j}] > 0 but p[{j},{i}] == 0",
            location={"i": int(i), "j": int(j)},
        )
    edges = [(int(i), int(j)) for i, j in np.argwhere(np.triu(support, 1))]
    g = CanonicalGraph(n, tuple(edges), inst.states)
    if not g.is_connected():
        raise Disconnected("canonical graph is not connected")
    return g


def block_decomposition(g: CanonicalGraph) -> BlockStructure:
    """Biconnected components via the depth-first lowpoint algorithm.

    Iterative so deep paths do not hit the recursion limit.  Blocks are
    sorted by their smallest vertex; vertices within a block ascend.
    """
    if not g.is_connected():
        raise Disconnected("graph is not connected")
    adj = g.neighbors()
    n = g.n
    disc = [-1] * n
    low = [0] * n
    blocks = []
    edge_stack = []
    t = 0
    disc[0] = low[0] = t
    # frames: (vertex, parent, iterator position)
    stack = [(0, -1, 0)]
    while stack:
        v, parent, pos = stack.pop()
        if pos < len(adj[v]):
            w = adj[v][pos]
            stack.append((v, parent, pos + 1))
            if disc[w] == -1:
                t += 1
                disc[w] = low[w] = t
                edge_stack.append((v, w))
                stack.append((w, v, 0))
            elif w != parent and disc[w] < disc[v]:
                edge_stack.append((v, w))
                low[v] = min(low[v], disc[w])
            continue
        # v finished; propagate to its parent
        if parent >= 0:
            low[parent] = min(low[parent], low[v])
            if low[v] >= disc[parent]:
                comp = set()
                while True:
                    e = edge_stack.pop()
                    comp.update(e)
                    if e == (parent, v):
                        break
                blocks.append(tuple(sorted(comp)))
    if n == 1:
        blocks.append((0,))
    blocks.sort(key=lambda b: (b[0], b))

    membership = {v: [] for v in range(n)}
    for b, verts in enumerate(blocks):
        for v in verts:
            membership[v].append(b)
    arts = tuple(v for v in range(n) if len(membership[v]) >= 2)
    tree = {("B", b): [] for b in range(len(blocks))}
    for a in arts:
        tree[("A", a)] = [("B", b) for b in membership[a]]
        for b in membership[a]:
            tree[("B", b)].append(("A", a))
    return BlockStructure(g, tuple(blocks), arts, membership, tree)


def is_biconnected(g: CanonicalGraph) -> bool:
    return len(block_decomposition(g).blocks) == 1


def is_tree(g: CanonicalGraph) -> bool:
    return len(g.edges) == g.n - 1


def block_tree_order(bs: BlockStructure, root: int = 0):
    """Breadth-first walk of the block-cut tree from block ``root``.

    Yields ``(block, parent_block, shared_articulation)``; the root comes
    first with ``parent_block = shared_articulation = None``.
    """
    seen_blocks = {root}
    seen_arts = set()
    queue = deque([(root, None, None)])
    while queue:
        b, parent, art = queue.popleft()
        yield b, parent, art
        for node in bs.block_cut_tree[("B", b)]:
            a = node[1]
            if a in seen_arts:
                continue
            seen_arts.add(a)
            for nb in bs.block_cut_tree[node]:
                c = nb[1]
                if c not in seen_blocks:
                    seen_blocks.add(c)
                    queue.append((c, b, a))
