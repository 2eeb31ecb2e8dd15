"""
Average-reward policy iteration, with and without the bias
==========================================================

Standard policy iteration solves Poisson's equation at every step.  On an
RMDP the gain alone is enough at vertices that are not articulation
points: switch when ``(r(i,u) - beta) / rho(i,u)`` can be increased.
"""

# %%
import numpy as np

from rmdp import (
    brute_force_optimal,
    factorize_biconnected,
    factorize_general,
    generate_instance,
    policy_iterate_biconnected,
    policy_iterate_hybrid,
    policy_iterate_standard,
    poisson_solve,
)

inst = generate_instance({"mode": "weighted", "n": 6, "m": 3}, seed=5)
best, best_gain = brute_force_optimal(inst)
print("brute force optimum:", best.actions, "gain", round(best_gain, 6))

# %%
# Poisson's equation at the optimum: gain and a pi-centred bias.
sol = poisson_solve(inst, best)
print("bias h:", np.round(sol.bias, 4), "| pi . h =", float(sol.stationary @ sol.bias))

# %%
# The biconnected variant never touches h.
P0, rho = factorize_biconnected(inst)
for name, trace in [
    ("standard", policy_iterate_standard(inst)),
    ("biconnected", policy_iterate_biconnected(inst, P0, rho)),
    ("hybrid", policy_iterate_hybrid(inst, factorize_general(inst))),
]:
    print(f"{name:12s} steps={len(trace.steps)} gains={np.round(trace.gains, 5)}")

# %%
# With articulation points the hybrid loop mixes both rules.
inst = generate_instance({"mode": "blocks", "n": 6, "m": 2}, seed=8)
trace = policy_iterate_hybrid(inst, factorize_general(inst))
print("rules used:", [s.rule for s in trace.steps])
print("terminal gain", trace.terminal_gain, "vs brute force", brute_force_optimal(inst)[1])
