"""Exact reference values for tiny instances.

Nothing here approximates: when an enumeration would be too large the
function raises :class:`SearchSpaceTooLarge` instead of truncating.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, SearchSpaceTooLarge
from .model import PomdpInstance, Policy

BRUTE_FORCE_LIMIT = 10**6
PERFECT_RECALL_LIMIT = 10**5


@dataclass(frozen=True)
class ForwardDistribution:
    mu_s: np.ndarray  # [t, s]
    mu_sa: np.ndarray  # [t, s, a]
    mu_soa: np.ndarray  # [t, s, o, a]


def _check_policy(instance: PomdpInstance, policy: Policy):
    nS, nO, nA, T = instance.dims
    if policy.rules.shape != (T, nO, nA):
        raise DimensionMismatch(
            f"policy rules have shape {policy.rules.shape}, instance needs {(T, nO, nA)}"
        )


def occupancy_from_policy(instance: PomdpInstance, policy: Policy) -> ForwardDistribution:
    """Forward recursion of the state, action and observation marginals."""
    _check_policy(instance, policy)
    nS, nO, nA, T = instance.dims
    E, P = instance.emission, instance.transition
    mu_s = np.zeros((T, nS))
    mu_soa = np.zeros((T, nS, nO, nA))
    mu_s[0] = instance.initial
    for t in range(T):
        mu_soa[t] = mu_s[t][:, None, None] * E[:, :, None] * policy.rules[t][None, :, :]
        if t + 1 < T:
            mu_s[t + 1] = np.einsum("sa,sap->p", mu_soa[t].sum(axis=1), P)
    return ForwardDistribution(mu_s, mu_soa.sum(axis=2), mu_soa)


def exact_policy_value(instance: PomdpInstance, policy: Policy) -> float:
    fwd = occupancy_from_policy(instance, policy)
    return float(np.einsum("tsa,sa->", fwd.mu_sa, instance.expected_reward()))


def _step_rules(num_obs, num_actions):
    # row k lists the action per observation; observation 0 is the most significant digit
    return np.array(list(itertools.product(range(num_actions), repeat=num_obs)), dtype=np.intp)


def brute_force_memoryless(instance: PomdpInstance, *, kern=None):
    """Best deterministic memoryless policy by exhaustive enumeration.

    Returns ``(value, policy)``; ties go to the lexicographically smallest
    policy (t = 0 rule most significant, observation 0 first within a rule).
    """
    nS, nO, nA, T = instance.dims
    count = nA ** (nO * T)
    if count > BRUTE_FORCE_LIMIT:
        raise SearchSpaceTooLarge(f"{count} deterministic policies exceed {BRUTE_FORCE_LIMIT}")
    rules = _step_rules(nO, nA)
    kern = kern or kernels.active
    values = kern.policy_values(
        np.ascontiguousarray(instance.initial),
        np.ascontiguousarray(instance.transition),
        np.ascontiguousarray(instance.expected_reward()),
        np.ascontiguousarray(instance.emission),
        T,
        rules,
    )
    best = float(values.max())
    pick = int(np.flatnonzero(values >= best - 1e-12 * (1.0 + abs(best)))[0])
    digits = np.unravel_index(pick, (len(rules),) * T)
    policy = Policy.from_actions(rules[list(digits)], nA)
    return exact_policy_value(instance, policy), policy


def enumerate_policy_values(instance: PomdpInstance, *, kern=None) -> np.ndarray:
    """Values of all deterministic memoryless policies in lexicographic order."""
    nS, nO, nA, T = instance.dims
    if nA ** (nO * T) > BRUTE_FORCE_LIMIT:
        raise SearchSpaceTooLarge("policy enumeration too large")
    kern = kern or kernels.active
    return kern.policy_values(instance.initial, instance.transition,
                              np.ascontiguousarray(instance.expected_reward()),
                              instance.emission, T, _step_rules(nO, nA))


def mdp_value(instance: PomdpInstance) -> float:
    """Fully observed finite-horizon optimum by backward induction."""
    nS, nO, nA, T = instance.dims
    R = instance.expected_reward()
    V = np.zeros(nS)
    for _ in range(T):
        V = (R + instance.transition @ V).max(axis=1)
    return float(instance.initial @ V)


def perfect_recall_value(instance: PomdpInstance) -> float:
    """Optimum over history-dependent policies via the reachable belief tree.

    Within a period the state emits an observation, the agent acts, then the
    state transitions. Observations of probability zero are skipped.
    """
    nS, nO, nA, T = instance.dims
    size = (nO * nA) ** T
    if size > PERFECT_RECALL_LIMIT:
        raise SearchSpaceTooLarge(f"belief tree has up to {size} leaves (limit {PERFECT_RECALL_LIMIT})")
    R = instance.expected_reward()
    E, P = instance.emission, instance.transition

    def value(prior, t):
        if t == T:
            return 0.0
        total = 0.0
        for o in range(nO):
            joint = prior * E[:, o]
            p_o = joint.sum()
            if p_o <= 0.0:
                continue
            post = joint / p_o
            best = -np.inf
            for a in range(nA):
                v = post @ R[:, a] + value(post @ P[:, a, :], t + 1)
                if v > best:
                    best = v
            total += p_o * best
        return total

    return float(value(np.asarray(instance.initial, dtype=float), 0))


def open_loop_value(instance: PomdpInstance) -> float:
    """Best fixed action sequence; equals the perfect-recall value when |O| = 1."""
    nS, nO, nA, T = instance.dims
    if nA**T > BRUTE_FORCE_LIMIT:
        raise SearchSpaceTooLarge("open-loop enumeration too large")
    R = instance.expected_reward()
    best = -np.inf
    for seq in itertools.product(range(nA), repeat=T):
        mu, v = instance.initial.copy(), 0.0
        for a in seq:
            v += mu @ R[:, a]
            mu = mu @ instance.transition[:, a, :]
        best = max(best, v)
    return float(best)
