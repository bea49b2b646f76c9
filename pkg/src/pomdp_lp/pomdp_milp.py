"""MILP formulation of a POMDP restricted to memoryless policies.

Variables (all indices 0-based, ``t`` in ``range(T)``):

* ``mu[t][s]``, ``mu[t][s][a]``, ``mu[t][s][o][a]`` -- state, state-action and
  state-observation-action occupancy, continuous and nonnegative;
* ``mupair[t][s'][a'][s][o][a]`` for ``t >= 1`` when cuts are requested;
* ``delta[t][o][a]`` -- binary decision rules, stored last.

The McCormick triple makes ``mu[t][s][o][a] = delta * p(o|s) * mu[t][s]``
exact whenever ``delta`` is binary. The optional equalities on ``mupair``
restore the conditional independence of the action and the current
state given the observation and the previous state-action pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NonIntegralIncumbent, ProductTooLarge
from .lp import LpProblem, solve_lp, LpStatus
from .milp import MilpProblem, MilpResult, solve_milp
from .model import (
    MAX_PRODUCT_CELLS,
    PomdpInstance,
    Policy,
    conditional_state_table,
)


@dataclass
class PomdpMilpIndex:
    mu_s: np.ndarray
    mu_sa: np.ndarray
    mu_soa: np.ndarray
    delta: np.ndarray
    mu_pair: np.ndarray | None

    def label_map(self, problem: LpProblem) -> dict:
        return {label: j for j, label in enumerate(problem.labels)}

    def to_json(self, problem: LpProblem) -> str:
        return json.dumps(self.label_map(problem), indent=1)


@dataclass
class OccupancyMeasures:
    mu_s: np.ndarray  # [t, s]
    mu_sa: np.ndarray  # [t, s, a]
    mu_soa: np.ndarray  # [t, s, o, a]
    mu_pair: np.ndarray | None = None  # [t, s', a', s, o, a], t = 0 slice unused


def milp_variable_count(nS, nO, nA, T, with_cuts=False):
    count = T * (nS + nS * nA + nS * nO * nA + nO * nA)
    if with_cuts:
        count += (T - 1) * nS * nA * nS * nO * nA
    return count


def build_pomdp_milp(instance: PomdpInstance, with_cuts: bool = False):
    """Return ``(MilpProblem, PomdpMilpIndex)`` for ``instance``."""
    nS, nO, nA, T = instance.dims
    total = milp_variable_count(nS, nO, nA, T, with_cuts)
    if total > MAX_PRODUCT_CELLS:
        raise ProductTooLarge(f"MILP would have {total} variables")
    P = instance.transition
    E = instance.emission
    R = instance.expected_reward()

    lp = LpProblem("pomdp-milp")
    mu_s = np.empty((T, nS), dtype=np.intp)
    mu_sa = np.empty((T, nS, nA), dtype=np.intp)
    mu_soa = np.empty((T, nS, nO, nA), dtype=np.intp)
    for t in range(T):
        for s in range(nS):
            mu_s[t, s] = lp.add_variable(f"mu[{t}][{s}]")
        for s in range(nS):
            for a in range(nA):
                mu_sa[t, s, a] = lp.add_variable(f"mu[{t}][{s}][{a}]")
        for s in range(nS):
            for o in range(nO):
                for a in range(nA):
                    mu_soa[t, s, o, a] = lp.add_variable(f"mu[{t}][{s}][{o}][{a}]")
    mu_pair = None
    if with_cuts:
        mu_pair = np.full((T, nS, nA, nS, nO, nA), -1, dtype=np.intp)
        for t in range(1, T):
            for sp_ in range(nS):
                for ap in range(nA):
                    for s in range(nS):
                        for o in range(nO):
                            for a in range(nA):
                                mu_pair[t, sp_, ap, s, o, a] = lp.add_variable(
                                    f"mupair[{t}][{sp_}][{ap}][{s}][{o}][{a}]"
                                )
    delta = np.empty((T, nO, nA), dtype=np.intp)
    for t in range(T):
        for o in range(nO):
            for a in range(nA):
                delta[t, o, a] = lp.add_variable(f"delta[{t}][{o}][{a}]", 0.0, 1.0)

    lp.set_objective({int(mu_sa[t, s, a]): float(R[s, a])
                      for t in range(T) for s in range(nS) for a in range(nA)})

    for s in range(nS):
        lp.add_constraint({int(mu_s[0, s]): 1.0}, "=", float(instance.initial[s]), f"init[{s}]")
    for t in range(T - 1):
        for s2 in range(nS):
            idx = [mu_s[t + 1, s2]] + mu_sa[t].ravel().tolist()
            val = [1.0] + (-P[:, :, s2]).ravel().tolist()
            lp.add_constraint((idx, val), "=", 0.0, f"flow[{t}][{s2}]")
    for t in range(T):
        for s in range(nS):
            for a in range(nA):
                idx = [mu_sa[t, s, a]] + mu_soa[t, s, :, a].tolist()
                lp.add_constraint((idx, [1.0] + [-1.0] * nO), "=", 0.0, f"obs[{t}][{s}][{a}]")
    for t in range(T):
        for s in range(nS):
            for o in range(nO):
                e = float(E[s, o])
                for a in range(nA):
                    v, m, d = int(mu_soa[t, s, o, a]), int(mu_s[t, s]), int(delta[t, o, a])
                    tag = f"[{t}][{s}][{o}][{a}]"
                    lp.add_constraint(([v, m], [1.0, -e]), "<=", 0.0, f"mc1{tag}")
                    lp.add_constraint(([v, d], [1.0, -1.0]), "<=", 0.0, f"mc2{tag}")
                    lp.add_constraint(([v, m, d], [1.0, -e, -e]), ">=", -e, f"mc3{tag}")
        for o in range(nO):
            lp.add_constraint((delta[t, o].tolist(), [1.0] * nA), "=", 1.0, f"policy[{t}][{o}]")

    if with_cuts:
        cond = conditional_state_table(instance)  # [s', a', o, s]
        for t in range(1, T):
            for s in range(nS):
                for o in range(nO):
                    for a in range(nA):
                        idx = [mu_soa[t, s, o, a]] + mu_pair[t, :, :, s, o, a].ravel().tolist()
                        val = [-1.0] + [1.0] * (nS * nA)
                        lp.add_constraint((idx, val), "=", 0.0, f"cutA[{t}][{s}][{o}][{a}]")
            for sp_ in range(nS):
                for ap in range(nA):
                    for s in range(nS):
                        for o in range(nO):
                            coef = float(E[s, o] * P[sp_, ap, s])
                            idx = mu_pair[t, sp_, ap, s, o, :].tolist() + [mu_sa[t - 1, sp_, ap]]
                            val = [1.0] * nA + [-coef]
                            lp.add_constraint((idx, val), "=", 0.0,
                                              f"cutB[{t}][{sp_}][{ap}][{s}][{o}]")
            for sp_ in range(nS):
                for ap in range(nA):
                    for o in range(nO):
                        post = cond[sp_, ap, o]
                        for a in range(nA):
                            block = mu_pair[t, sp_, ap, :, o, a]
                            for s in range(nS):
                                val = np.full(nS, -post[s])
                                val[s] += 1.0
                                lp.add_constraint((block.tolist(), val.tolist()), "=", 0.0,
                                                  f"cutC[{t}][{sp_}][{ap}][{s}][{o}][{a}]")

    index = PomdpMilpIndex(mu_s, mu_sa, mu_soa, delta, mu_pair)
    return MilpProblem(lp, frozenset(delta.ravel().tolist())), index


def measures_from_solution(x, index: PomdpMilpIndex) -> OccupancyMeasures:
    pair = None
    if index.mu_pair is not None:
        pair = np.where(index.mu_pair >= 0, x[np.maximum(index.mu_pair, 0)], 0.0)
    return OccupancyMeasures(x[index.mu_s], x[index.mu_sa], x[index.mu_soa], pair)


def solution_vector(index: PomdpMilpIndex, num_variables, measures: OccupancyMeasures, rules):
    """Assemble a full variable vector from measures and a decision-rule tensor."""
    x = np.zeros(num_variables)
    x[index.mu_s] = measures.mu_s
    x[index.mu_sa] = measures.mu_sa
    x[index.mu_soa] = measures.mu_soa
    x[index.delta] = rules
    if index.mu_pair is not None and measures.mu_pair is not None:
        ok = index.mu_pair >= 0
        x[index.mu_pair[ok]] = measures.mu_pair[ok]
    return x


def pair_measures(instance: PomdpInstance, mu_sa, rules):
    """``mupair[t] = delta^t_{a|o} p(o|s) p(s|s',a') mu^{t-1}_{s'a'}`` for ``t >= 1``."""
    nS, nO, nA, T = instance.dims
    out = np.zeros((T, nS, nA, nS, nO, nA))
    P, E = instance.transition, instance.emission
    for t in range(1, T):
        out[t] = np.einsum("pq,pqs,so,oa->pqsoa", mu_sa[t - 1], P, E, rules[t])
    return out


def extract_policy(instance: PomdpInstance, result, index: PomdpMilpIndex) -> Policy:
    """Round the incumbent's decision rules to a deterministic policy."""
    x = result.x if hasattr(result, "x") else np.asarray(result)
    if x is None:
        raise NonIntegralIncumbent("result has no incumbent")
    rules = x[index.delta]
    if np.any(np.abs(rules - np.round(rules)) > 1e-4):
        raise NonIntegralIncumbent("incumbent decision rules are not integral")
    rules = np.round(rules)
    return Policy(rules, deterministic=True)


def policy_rounding_heuristic(instance: PomdpInstance, index: PomdpMilpIndex, num_variables,
                              with_cuts=False):
    """Incumbent heuristic: argmax action per (t, o), occupancy by forward recursion."""
    from .oracle import occupancy_from_policy

    tried = set()

    def heuristic(x):
        actions = np.argmax(x[index.delta], axis=2)
        key = actions.tobytes()
        if key in tried:
            return None
        tried.add(key)
        policy = Policy.from_actions(actions, instance.num_actions)
        fwd = occupancy_from_policy(instance, policy)
        pair = pair_measures(instance, fwd.mu_sa, policy.rules) if with_cuts else None
        meas = OccupancyMeasures(fwd.mu_s, fwd.mu_sa, fwd.mu_soa, pair)
        return solution_vector(index, num_variables, meas, policy.rules)

    return heuristic


@dataclass
class PomdpSolveReport:
    result: MilpResult
    index: PomdpMilpIndex
    problem: MilpProblem

    @property
    def policy(self):
        return extract_policy(None, self.result, self.index)


def solve_pomdp_milp(instance: PomdpInstance, with_cuts=False, time_limit=float("inf"),
                     gap_tolerance=1e-6, use_heuristic=True, **kwargs) -> PomdpSolveReport:
    problem, index = build_pomdp_milp(instance, with_cuts)
    heuristic = None
    if use_heuristic:
        heuristic = policy_rounding_heuristic(instance, index, problem.base.num_variables, with_cuts)
    result = solve_milp(problem, time_limit, gap_tolerance, heuristic=heuristic, **kwargs)
    return PomdpSolveReport(result, index, problem)


def solve_relaxation(instance: PomdpInstance, with_cuts=False):
    """LP relaxation value ``z_LR`` and its occupancy measures."""
    problem, index = build_pomdp_milp(instance, with_cuts)
    sol = solve_lp(problem.base)
    if sol.status != LpStatus.OPTIMAL:
        raise RuntimeError(f"relaxation ended with status {sol.status.value}")
    return sol.objective, measures_from_solution(sol.x, index)
