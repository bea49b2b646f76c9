import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pomdp_lp import kernels
from pomdp_lp.errors import DimensionMismatch, SearchSpaceTooLarge
from pomdp_lp.model import Policy, count_deterministic_policies, generate_random_instance
from pomdp_lp.oracle import (
    brute_force_memoryless,
    enumerate_policy_values,
    exact_policy_value,
    mdp_value,
    occupancy_from_policy,
    open_loop_value,
    perfect_recall_value,
)
from pomdp_lp.pomdp_milp import solve_pomdp_milp, solve_relaxation

from conftest import (
    identity_emission_instance,
    instance_with,
    random_policy,
    random_stochastic_policy,
)


def test_single_period_uniform_initial():
    base = generate_random_instance(0, 2, 2, 2, 1)
    inst = instance_with(base, initial=[0.5, 0.5])
    fwd = occupancy_from_policy(inst, random_policy(np.random.default_rng(0), 2, 2, 1))
    assert fwd.mu_s[0].tolist() == [0.5, 0.5]


def test_deterministic_chain_moves_unit_mass():
    n = 4
    P = np.zeros((n, 1, n))
    for s in range(n):
        P[s, 0, (s + 1) % n] = 1.0
    base = generate_random_instance(0, n, 2, 1, 5)
    inst = instance_with(base, transition=P, initial=np.eye(n)[0])
    fwd = occupancy_from_policy(inst, Policy(np.ones((5, 2, 1))))
    for t in range(5):
        assert np.array_equal(fwd.mu_s[t], np.eye(n)[t % n])


def prefix_soa(inst, policy):
    nS, nO, nA, T = inst.dims
    out = np.zeros((T, nS, nO, nA))
    R = policy.rules
    for t in range(T):
        for path in itertools.product(itertools.product(range(nS), range(nO), range(nA)),
                                      repeat=t + 1):
            p = inst.initial[path[0][0]]
            for k, (s, o, a) in enumerate(path):
                if k:
                    ps, _, pa = path[k - 1]
                    p *= inst.transition[ps, pa, s]
                p *= inst.emission[s, o] * R[k, o, a]
            s, o, a = path[-1]
            out[t, s, o, a] += p
    return out


@pytest.mark.parametrize("seed", range(6))
def test_forward_recursion_matches_trajectory_enumeration(seed):
    rng = np.random.default_rng(seed)
    inst = generate_random_instance(seed, 2, 2, 2, 3)
    for policy in (random_policy(rng, 2, 2, 3), random_stochastic_policy(rng, 2, 2, 3)):
        fwd = occupancy_from_policy(inst, policy)
        assert np.allclose(fwd.mu_soa, prefix_soa(inst, policy), atol=1e-14)
        assert np.allclose(fwd.mu_s.sum(axis=1), 1.0, atol=1e-12)


def test_dimension_mismatch():
    inst = generate_random_instance(0, 2, 2, 2, 2)
    with pytest.raises(DimensionMismatch):
        occupancy_from_policy(inst, Policy(np.full((3, 2, 2), 0.5)))


def test_zero_reward_value():
    base = generate_random_instance(1, 3, 2, 2, 3)
    inst = instance_with(base, reward=np.zeros((3, 2, 3)))
    assert exact_policy_value(inst, random_policy(np.random.default_rng(1), 2, 2, 3)) == 0.0
    assert mdp_value(inst) == 0.0
    assert perfect_recall_value(inst) == 0.0


def test_single_action_value_matches_chain():
    inst = generate_random_instance(2, 3, 2, 1, 4)
    P, R = inst.transition[:, 0, :], inst.expected_reward()[:, 0]
    mu, total = inst.initial.copy(), 0.0
    for _ in range(4):
        total += mu @ R
        mu = mu @ P
    policy = Policy(np.ones((4, 2, 1)), deterministic=True)
    assert exact_policy_value(inst, policy) == pytest.approx(total, abs=1e-14)
    value, best = brute_force_memoryless(inst)
    assert value == pytest.approx(total, abs=1e-14) and best == policy


def test_monte_carlo_agrees_with_exact_value():
    inst = generate_random_instance(5, 3, 2, 2, 4)
    policy = random_policy(np.random.default_rng(5), 2, 2, 4)
    rng = np.random.default_rng(123)
    n = 10**5
    cdf0 = np.cumsum(inst.initial)
    s = np.minimum(np.searchsorted(cdf0, rng.random(n), side="right"), 2)
    total = np.zeros(n)
    for t in range(4):
        o = (rng.random(n)[:, None] > np.cumsum(inst.emission[s], axis=1)).sum(axis=1)
        o = np.minimum(o, 1)
        a = policy.actions()[t, o]
        nxt = (rng.random(n)[:, None] > np.cumsum(inst.transition[s, a], axis=1)).sum(axis=1)
        nxt = np.minimum(nxt, 2)
        total += inst.reward[s, a, nxt]
        s = nxt
    se = total.std(ddof=1) / np.sqrt(n)
    assert abs(total.mean() - exact_policy_value(inst, policy)) <= 3 * se


def test_enumeration_count_and_tie_rule():
    inst = generate_random_instance(3, 2, 2, 3, 2)
    values = enumerate_policy_values(inst)
    assert len(values) == count_deterministic_policies(2, 3, 2)[0]
    flat = instance_with(inst, reward=np.zeros((2, 3, 2)))
    value, policy = brute_force_memoryless(flat)
    assert value == 0.0 and policy.actions().max() == 0


def test_kernel_backends_agree():
    inst = generate_random_instance(4, 3, 2, 3, 3)
    results = [enumerate_policy_values(inst, kern=k) for k in kernels.available_backends().values()]
    for r in results[1:]:
        assert np.allclose(r, results[0], atol=1e-12, rtol=0)


@given(st.integers(0, 10**6))
@settings(max_examples=15)
def test_brute_force_beats_every_stochastic_policy(seed):
    inst = generate_random_instance(seed, 2, 2, 2, 3)
    value, policy = brute_force_memoryless(inst)
    assert exact_policy_value(inst, policy) == value
    stoch = random_stochastic_policy(np.random.default_rng(seed), 2, 2, 3)
    assert exact_policy_value(inst, stoch) <= value + 1e-12


def test_guards():
    with pytest.raises(SearchSpaceTooLarge):
        brute_force_memoryless(generate_random_instance(0, 5, 5, 5, 20))
    with pytest.raises(SearchSpaceTooLarge):
        perfect_recall_value(generate_random_instance(0, 2, 3, 3, 6))


def test_mdp_single_period():
    inst = generate_random_instance(6, 3, 2, 3, 1)
    expected = inst.initial @ inst.expected_reward().max(axis=1)
    assert mdp_value(inst) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_identity_emission_chain(seed):
    inst = identity_emission_instance(seed, 3, 2, 3)
    v = mdp_value(inst)
    assert perfect_recall_value(inst) == pytest.approx(v, abs=1e-12)
    assert solve_pomdp_milp(inst).result.objective == pytest.approx(v, abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_blind_perfect_recall_is_open_loop(seed):
    inst = generate_random_instance(seed, 3, 1, 3, 3)
    assert perfect_recall_value(inst) == pytest.approx(open_loop_value(inst), abs=1e-12)
    assert brute_force_memoryless(inst)[0] == pytest.approx(open_loop_value(inst), abs=1e-12)


@given(st.integers(0, 10**6), st.permutations(range(3)))
@settings(max_examples=15)
def test_perfect_recall_invariant_under_observation_relabeling(seed, perm):
    inst = generate_random_instance(seed, 2, 3, 2, 2)
    shuffled = instance_with(inst, emission=inst.emission[:, list(perm)])
    assert perfect_recall_value(shuffled) == pytest.approx(perfect_recall_value(inst), abs=1e-12)


@given(st.integers(0, 10**6), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
@settings(max_examples=15)
def test_bound_chain(seed, nO, nA, T):
    inst = generate_random_instance(seed, 2, nO, nA, T)
    v, _ = brute_force_memoryless(inst)
    pr = perfect_recall_value(inst)
    z_lr, _ = solve_relaxation(inst, False)
    z_cut, _ = solve_relaxation(inst, True)
    assert v <= pr + 1e-9
    assert pr <= z_cut + 1e-6
    assert z_cut <= z_lr + 1e-7
