"""
Which MDPs stay reversible under every policy?
==============================================

A controlled chain can be reversible for one policy and not another.  An
RMDP is reversible (and irreducible) for all of them, and it is enough to
check the finitely many deterministic policies.
"""

# %%
# A three-state example: state 1 sends the chain to 2 or 3 with
# action-dependent odds, and 2, 3 always return to 1.
import numpy as np

from _paths import DATA
from rmdp import Policy, controlled_kernel, is_rmdp, stationary_distribution, validate_instance
from rmdp.io import load_instance

inst = load_instance(DATA / "two_branch.json")
verdict = is_rmdp(inst)
print("RMDP:", bool(verdict), "after checking", verdict.checked, "deterministic policies")

# %%
# Mixing the two actions at state 1 just mixes the first rows.
lam = 0.25
w = np.array([[lam, 1 - lam], [1, 0], [1, 0]])
P = controlled_kernel(inst, Policy(w))
print("P(mu) row 1:", P[0])
print("stationary:", stationary_distribution(P))

# %%
# Detailed balance means the occupation matrix pi_i p_ij is symmetric.
pi = stationary_distribution(P)
Q = pi[:, None] * P
print("occupation matrix symmetric:", np.allclose(Q, Q.T))

# %%
# Swap one action's kernel for a directed 3-cycle and the test finds a
# deterministic witness policy straight away.
cycle = [[0, 1, 0], [0, 0, 1], [1, 0, 0]]
bad = validate_instance(inst.states, inst.actions, [cycle, inst.kernels[1]], inst.rewards)
v = is_rmdp(bad)
print("RMDP:", bool(v), "| witness actions:", v.witness, "|", v.violation)
