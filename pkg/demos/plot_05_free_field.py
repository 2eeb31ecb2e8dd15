"""
The free field of a reversible chain
====================================

For a reversible chain ``z_ij / pi_j`` is a symmetric PSD matrix: the
covariance of a Gaussian field on the states.  Pinning one state to zero
gives the Green function of the chain with rates ``pi_i p_ij`` killed there.
"""

# %%
import numpy as np

from _paths import DATA
from rmdp import covariance_difference, gff_covariance, pinned_green, poisson_solve, sample_pinned_field
from rmdp.io import load_instance, load_policy

inst = load_instance(DATA / "path4.json")
pol = load_policy(inst, DATA / "path4_policy.json")
cov = gff_covariance(inst, pol)
print("C =\n", np.round(cov.c, 4))
print("eigenvalues:", np.round(np.linalg.eigvalsh(cov.c), 6))

# %%
# The bias of any reward is C applied to pi * r.
r = inst.rewards[:, 0]
print("h via C:      ", np.round(cov.c @ (cov.stationary * r), 6))
print("h via Poisson:", np.round(poisson_solve(inst, pol).bias, 6))

# %%
# Pinned at state "c": absorbed-chain Green function vs covariance differences.
g = pinned_green(inst, pol, 2)
print("max gap:", np.max(np.abs(g.g - covariance_difference(cov.c, 2))))

# %%
# Samples of the pinned field reproduce g.
x = sample_pinned_field(g, 100_000, seed=1)
print("empirical cov:\n", np.round(np.cov(x, rowvar=False), 3))
print("exact:\n", np.round(g.full(), 3))
