"""Reversible Markov decision processes.

Structural validation and factorization, average-reward policy iteration
(standard and gain-only variants) and Gaussian-free-field tools for
finite-state, finite-action MDPs whose controlled chain is reversible
under every stationary policy.
"""

from .errors import *  # noqa: F401,F403
from .factorize import (
    BlockKernel,
    Factorization,
    WeightedGraphSpec,
    factorize_biconnected,
    factorize_general,
    generate_instance,
    glue_stationary,
    kernel_from_weights,
    synthesize,
    tree_stationary_product,
    weights_from_kernel,
)
from .gff import (
    GffCovariance,
    LocalTimeField,
    PinnedGreen,
    RayKnightReport,
    covariance_difference,
    gff_covariance,
    pinned_green,
    ray_knight_check,
    sample_pinned_field,
    simulate_local_times,
    simulate_occupation,
)
from .mdp_core import (
    ChainAnalysis,
    MdpInstance,
    Policy,
    analyze_chain,
    check_irreducible,
    check_reversible,
    controlled_kernel,
    enumerate_deterministic_policies,
    is_rmdp,
    make_policy,
    stationary_distribution,
    validate_instance,
)
from .solve import (
    FundamentalMatrix,
    PoissonSolution,
    PolicyIterationTrace,
    brute_force_optimal,
    dp_check,
    fundamental_matrix,
    gain,
    improve_biconnected,
    improve_nonarticulation,
    poisson_solve,
    policy_iterate_biconnected,
    policy_iterate_hybrid,
    policy_iterate_standard,
)
from .structure import (
    BlockStructure,
    CanonicalGraph,
    block_decomposition,
    canonical_graph,
    is_biconnected,
    is_tree,
)

__version__ = "0.1.0"
