import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmdp import (
    CycleDetected,
    ExplosionGuard,
    Policy,
    controlled_kernel,
    dp_check,
    enumerate_deterministic_policies,
    factorize_biconnected,
    factorize_general,
    fundamental_matrix,
    gain,
    generate_instance,
    improve_biconnected,
    improve_nonarticulation,
    poisson_solve,
    policy_iterate_biconnected,
    policy_iterate_hybrid,
    policy_iterate_standard,
    brute_force_optimal,
    stationary_distribution,
    validate_instance,
)
from rmdp.solve import _standard_step, poisson_residual, q_values

from conftest import two_branch, random_policy, random_reversible_kernel, single_kernel_instance
from oracles import cesaro_partial_sums, enumerate_gains

SWAP = [[0.0, 1.0], [1.0, 0.0]]
# frozen from cesaro_partial_sums(SWAP, 2000)
Z_SWAP = [[0.25, -0.25], [-0.25, 0.25]]


def _z_invariants(P, Z, pi):
    n = len(pi)
    one = np.ones(n)
    return max(
        np.max(np.abs(Z @ one)),
        np.max(np.abs(pi @ Z)),
        np.max(np.abs((np.eye(n) - P) @ Z - (np.eye(n) - np.outer(one, pi)))),
    )


class TestFundamentalMatrix:
    def test_iid_chain(self):
        pi = np.array([0.2, 0.5, 0.3])
        P = np.outer(np.ones(3), pi)
        np.testing.assert_allclose(fundamental_matrix(P).z, np.eye(3) - P, atol=1e-14)

    def test_swap_matches_cesaro(self):
        np.testing.assert_allclose(cesaro_partial_sums(SWAP, 2000), Z_SWAP, atol=1e-12)
        np.testing.assert_allclose(fundamental_matrix(SWAP).z, Z_SWAP, atol=1e-15)

    def test_random_reversible_cesaro(self):
        rng = np.random.default_rng(5)
        P = random_reversible_kernel(rng, 5)
        oracle = cesaro_partial_sums(P, 20000, window=10000)
        assert np.max(np.abs(fundamental_matrix(P).z - oracle)) <= 1e-6

    def test_invariants(self, rng):
        for _ in range(20):
            P = random_reversible_kernel(rng, 6, lazy=False)
            fm = fundamental_matrix(P)
            assert _z_invariants(P, fm.z, fm.stationary) <= 1e-10


class TestPoisson:
    def test_constant_reward(self, rng):
        inst = generate_instance({"mode": "blocks", "n": 5, "m": 2, "rewards": np.full((5, 2), 3.5).tolist()}, 1)
        sol = poisson_solve(inst, random_policy(inst, rng))
        assert sol.gain == pytest.approx(3.5, abs=1e-12)
        assert np.max(np.abs(sol.bias)) <= 1e-12

    def test_swap(self):
        inst = single_kernel_instance(SWAP, rewards=np.array([[1.0, 1.0], [0.0, 0.0]]))
        sol = poisson_solve(inst, Policy.deterministic([0, 0], 2))
        assert sol.gain == pytest.approx(0.5, abs=1e-15)
        np.testing.assert_allclose(sol.bias, [0.25, -0.25], atol=1e-15)

    def test_two_branch_gain(self):
        r = np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
        sol = poisson_solve(two_branch(rewards=r), Policy.deterministic([0, 0, 0], 2))
        assert sol.gain == pytest.approx(0.5, abs=1e-12)

    def test_residual_and_normalization(self, rng):
        for seed in range(30):
            inst = generate_instance({"mode": "blocks", "n": 6, "m": 3}, seed)
            pol = random_policy(inst, rng)
            sol = poisson_solve(inst, pol)
            assert poisson_residual(inst, pol, sol) <= 1e-10
            assert abs(sol.stationary @ sol.bias) <= 1e-10
            assert sol.normalization == "pi-weighted-zero"


class TestDpCheck:
    def test_single_action(self, rng):
        r = np.repeat(rng.random((4, 1)), 2, axis=1)
        inst = single_kernel_instance(random_reversible_kernel(rng, 4), rewards=r)
        rep = dp_check(inst, Policy.deterministic([0] * 4, 2))
        assert rep.optimal and rep.violations == ()

    def test_optimum_and_suboptimal(self):
        inst = generate_instance({"mode": "weighted", "n": 4, "m": 3}, 17)
        best, g = brute_force_optimal(inst)
        assert dp_check(inst, best).optimal
        gains = enumerate_gains(inst)
        worst = min(gains, key=gains.get)
        assert gains[worst] < g - 1e-6
        rep = dp_check(inst, Policy.deterministic(worst, 3))
        assert not rep.optimal and len(rep.violations) >= 1

    def test_shift_invariance(self, rng):
        for seed in range(10):
            inst = generate_instance({"mode": "blocks", "n": 5, "m": 3}, seed)
            h = poisson_solve(inst, random_policy(inst, rng, deterministic=True)).bias
            q = q_values(inst, h)
            for c in (-7.0, 0.3, 1e3):
                q2 = q_values(inst, h + c)
                assert np.max(np.abs(q2 - q)) <= 1e-10
                np.testing.assert_array_equal(np.argmax(q2, axis=1), np.argmax(q, axis=1))


class TestBruteForce:
    def test_single_action(self):
        inst = single_kernel_instance(SWAP, rewards=np.array([[1.0, 1.0], [0.0, 0.0]]))
        pol, g = brute_force_optimal(inst)
        assert pol.actions == (0, 0) and g == pytest.approx(0.5)

    def test_constant_rewards_lexicographic_first(self):
        inst = generate_instance({"mode": "blocks", "n": 4, "m": 3, "rewards": np.ones((4, 3)).tolist()}, 2)
        pol, g = brute_force_optimal(inst)
        assert pol.actions == (0, 0, 0, 0)

    def test_dominates_enumeration(self):
        for seed in range(10):
            inst = generate_instance({"mode": "weighted", "n": 3, "m": 2}, seed)
            _, g = brute_force_optimal(inst)
            gains = enumerate_gains(inst)
            assert all(g >= v - 1e-12 for v in gains.values())
            assert g == pytest.approx(max(gains.values()), abs=1e-12)

    def test_cap(self):
        inst = generate_instance({"mode": "weighted", "n": 5, "m": 3}, 0)
        with pytest.raises(ExplosionGuard):
            brute_force_optimal(inst, cap=100)


def _assert_trace(inst, trace, best_gain):
    assert abs(trace.terminal_gain - best_gain) <= 1e-10
    gains = trace.gains
    assert all(b - a > 1e-8 for a, b in zip(gains, gains[1:]))
    policies = [trace.start] + [s.policy for s in trace.steps]
    assert len(set(policies)) == len(policies)
    assert dp_check(inst, Policy.deterministic(trace.terminal, inst.m)).optimal
    for s in trace.steps:
        assert s.gain == pytest.approx(gain(inst, Policy.deterministic(s.policy, inst.m)), abs=1e-12)


class TestStandardIteration:
    def test_start_at_optimum(self):
        inst = generate_instance({"mode": "weighted", "n": 4, "m": 2}, 1)
        best, g = brute_force_optimal(inst)
        trace = policy_iterate_standard(inst, best)
        assert trace.steps == [] and trace.terminal == best.actions

    def test_random_rmdps(self, rng):
        for seed in range(20):
            inst = generate_instance({"mode": "blocks", "n": 4, "m": 2}, seed)
            _, g = brute_force_optimal(inst)
            start = rng.integers(0, 2, 4)
            _assert_trace(inst, policy_iterate_standard(inst, start), g)

    def test_two_branch_prefers_action_two(self):
        r = np.array([[0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
        inst = two_branch(rewards=r)
        trace = policy_iterate_standard(inst)
        assert trace.terminal[0] == 1
        _, g = brute_force_optimal(inst)
        assert trace.terminal_gain == pytest.approx(g, abs=1e-12)

    def test_non_reversible_mdp(self, rng):
        K = rng.random((2, 4, 4)) + 0.05
        K /= K.sum(axis=2, keepdims=True)
        inst = validate_instance("abcd", "xy", K, rng.standard_normal((4, 2)))
        trace = policy_iterate_standard(inst)
        assert trace.terminal_gain == pytest.approx(max(enumerate_gains(inst).values()), abs=1e-10)

    def test_bad_start(self):
        with pytest.raises(ValueError):
            policy_iterate_standard(two_branch(), [0, 5, 0])


class TestBiconnected:
    def test_already_optimal_returns_none(self):
        inst = generate_instance({"mode": "weighted", "n": 4, "m": 3}, 6)
        P0, rho = factorize_biconnected(inst)
        trace = policy_iterate_biconnected(inst, P0, rho)
        assert improve_biconnected(inst, P0, rho, Policy.deterministic(trace.terminal, 3)) is None

    def test_two_state_improves_state_one(self):
        r = [[0.0, 1.0], [0.0, 0.0]]
        inst = generate_instance({"mode": "weighted", "n": 2, "m": 2, "rho": [[1.0, 1.0], [0.6, 0.3]],
                                  "rewards": r}, 0)
        P0, rho = factorize_biconnected(inst)
        out = improve_biconnected(inst, P0, rho, Policy.deterministic([0, 0], 2))
        assert out.actions == (1, 0)
        best, _ = brute_force_optimal(inst)
        assert best.actions[0] == 1

    def test_iterates_to_optimum(self, rng):
        for seed in range(30):
            n, m = int(rng.integers(2, 6)), int(rng.integers(2, 4))
            inst = generate_instance({"mode": "weighted", "n": n, "m": m}, seed)
            P0, rho = factorize_biconnected(inst)
            _, g = brute_force_optimal(inst)
            trace = policy_iterate_biconnected(inst, P0, rho, rng.integers(0, m, n))
            _assert_trace(inst, trace, g)
            assert {s.rule for s in trace.steps} <= {"ratio"}

    def test_gain_characterization(self):
        for seed in range(20):
            inst = generate_instance({"mode": "weighted", "n": 5, "m": 3}, seed)
            P0, rho = factorize_biconnected(inst)
            pi0 = stationary_distribution(P0)
            for pol in list(enumerate_deterministic_policies(inst))[::17]:
                a = np.array(pol.actions)
                beta = gain(inst, pol)
                rows = np.arange(5)
                total = np.sum(pi0 * (inst.rewards[rows, a] - beta) / rho[rows, a])
                assert abs(total) <= 1e-9

    def test_agrees_with_standard_test(self, rng):
        for seed in range(20):
            inst = generate_instance({"mode": "weighted", "n": 4, "m": 3}, seed)
            P0, rho = factorize_biconnected(inst)
            for pol in enumerate_deterministic_policies(inst):
                ratio = improve_biconnected(inst, P0, rho, pol)
                std = _standard_step(inst, np.array(pol.actions))
                assert (ratio is None) == (std is None)


class TestNonarticulation:
    def test_two_branch_leaf_improvement(self):
        r = np.array([[0.0, 0.0], [0.0, 1.0], [0.5, 0.0]])
        inst = two_branch(rewards=r)
        f = factorize_general(inst)
        out = improve_nonarticulation(inst, f, Policy.deterministic([0, 0, 0], 2))
        assert out.actions == (0, 1, 0)
        assert gain(inst, out) > gain(inst, Policy.deterministic([0, 0, 0], 2))
        best, _ = brute_force_optimal(inst)
        assert best.actions[1:] == (1, 0)

    def test_none_when_interior_optimal(self):
        r = np.array([[0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
        inst = two_branch(rewards=r)
        f = factorize_general(inst)
        for a in range(2):
            assert improve_nonarticulation(inst, f, Policy.deterministic([a, 0, 0], 2)) is None

    def test_never_touches_articulation_points(self, rng):
        for seed in range(30):
            inst = generate_instance({"mode": "blocks", "n": 6, "m": 2}, seed)
            f = factorize_general(inst)
            arts = set(f.structure.articulation_points)
            for _ in range(10):
                pol = random_policy(inst, rng, deterministic=True)
                out = improve_nonarticulation(inst, f, pol)
                if out is None:
                    continue
                changed = [i for i in range(inst.n) if out.actions[i] != pol.actions[i]]
                assert len(changed) == 1 and changed[0] not in arts
                assert gain(inst, out) > gain(inst, pol)


class TestHybrid:
    def test_biconnected_uses_no_h_steps(self, rng):
        for seed in range(10):
            inst = generate_instance({"mode": "weighted", "n": 5, "m": 2}, seed)
            trace = policy_iterate_hybrid(inst, factorize_general(inst), rng.integers(0, 2, 5))
            assert all(s.rule == "ratio" for s in trace.steps)
            _assert_trace(inst, trace, brute_force_optimal(inst)[1])

    def test_two_branch(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            inst = two_branch(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.standard_normal((3, 2)))
            _, g = brute_force_optimal(inst)
            _assert_trace(inst, policy_iterate_hybrid(inst, factorize_general(inst)), g)

    def test_random_block_instances(self, rng):
        for seed in range(30):
            n = int(rng.integers(3, 7))
            inst = generate_instance({"mode": "blocks", "n": n, "m": 2}, seed)
            _, g = brute_force_optimal(inst)
            _assert_trace(inst, policy_iterate_hybrid(inst, factorize_general(inst), rng.integers(0, 2, n)), g)


def test_cycle_detected_on_cycling_rule(monkeypatch):
    """A rule that proposes a non-improving switch must be caught."""
    import rmdp.solve as solve

    inst = generate_instance({"mode": "weighted", "n": 3, "m": 2}, 0)
    best, _ = brute_force_optimal(inst)
    other = 1 - best.actions[0]
    monkeypatch.setattr(solve, "_standard_step", lambda *a, **k: (0, other))
    with pytest.raises(CycleDetected):
        solve.policy_iterate_standard(inst, best)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_variants_agree(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 6)), int(rng.integers(2, 4))
    inst = generate_instance({"mode": "blocks", "n": n, "m": m}, seed)
    _, g = brute_force_optimal(inst)
    f = factorize_general(inst)
    assert policy_iterate_standard(inst).terminal_gain == pytest.approx(g, abs=1e-10)
    assert policy_iterate_hybrid(inst, f).terminal_gain == pytest.approx(g, abs=1e-10)
    if len(f.structure.blocks) == 1:
        P0, rho = factorize_biconnected(inst)
        assert policy_iterate_biconnected(inst, P0, rho).terminal_gain == pytest.approx(g, abs=1e-10)
