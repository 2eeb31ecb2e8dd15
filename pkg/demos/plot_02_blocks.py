"""
Canonical graph and its blocks
==============================

All actions of an RMDP share one off-diagonal support, a simple connected
graph.  Its biconnected components (blocks) and articulation points
organise everything that follows.
"""

# %%
from _paths import DATA
from rmdp import block_decomposition, canonical_graph, is_biconnected, is_tree
from rmdp.io import load_instance

inst = load_instance(DATA / "five_blocks.json")
g = canonical_graph(inst)
label = lambda vs: [inst.states[v] for v in vs]  # noqa: E731
print("edges:", [tuple(label(e)) for e in g.edges])

# %%
# Nine vertices, five blocks, three articulation points.
bs = block_decomposition(g)
for b, verts in enumerate(bs.blocks):
    print(f"block {b}: {label(verts)}  interior: {label(bs.interior(b))}")
print("articulation points:", label(bs.articulation_points))
print("biconnected:", is_biconnected(g), "| tree:", is_tree(g))

# %%
# The block-cut tree alternates blocks and articulation points.
for node, nbrs in sorted(bs.block_cut_tree.items()):
    if node[0] == "A":
        print(f"articulation {inst.states[node[1]]} joins blocks {[n[1] for n in nbrs]}")
