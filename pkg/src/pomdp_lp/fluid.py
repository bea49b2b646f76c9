"""Fluid LP relaxation for decomposable POMDPs.

Each component keeps its own occupancy measures; the only coupling is that
every component must agree on the action marginal ``taua[t][a]``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ProductTooLarge
from .lp import LpProblem, LpStatus, solve_lp
from .model import (
    MAX_PRODUCT_CELLS,
    DecomposablePomdp,
    PomdpInstance,
    Policy,
    conditional_state_table,
    posterior_given_observation,
)

ACHIEVABLE_TOL = 1e-6


@dataclass
class FluidIndex:
    tau_s: list  # per component, [t, s]
    tau_sa: list  # [t, s, a]
    tau_soa: list  # [t, s, o, a]
    tau_a: np.ndarray  # [t, a]
    tau_pair: list | None  # [t, s', a', s, o, a], -1 at t = 0


@dataclass
class FluidMeasures:
    tau_s: list
    tau_sa: list
    tau_soa: list
    tau_a: np.ndarray
    tau_pair: list | None = None

    @property
    def num_components(self):
        return len(self.tau_s)


@dataclass
class FluidSolveReport:
    objective: float
    measures: FluidMeasures
    with_cuts: bool
    conditioned_observation: tuple | None
    wall_time: float
    status: LpStatus = LpStatus.OPTIMAL


def fluid_variable_count(dec: DecomposablePomdp, with_cuts=False):
    T, nA = dec.horizon, dec.num_actions
    count = T * nA
    for c in dec.components:
        nS, nO = c.num_states, c.num_observations
        count += T * (nS + nS * nA + nS * nO * nA)
        if with_cuts:
            count += (T - 1) * nS * nA * nS * nO * nA
    return count


def _check_obs(dec: DecomposablePomdp, initial_obs):
    if initial_obs is None:
        return None
    obs = tuple(int(o) for o in initial_obs)
    if len(obs) != dec.num_components:
        raise DimensionMismatch(
            f"initial observation has {len(obs)} entries for {dec.num_components} components"
        )
    for m, (o, c) in enumerate(zip(obs, dec.components)):
        if not 0 <= o < c.num_observations:
            raise DimensionMismatch(f"observation {o} out of range for component {m}")
    return obs


def build_fluid_lp(dec: DecomposablePomdp, with_cuts: bool = False, initial_obs=None):
    """Return ``(LpProblem, FluidIndex)``.

    With ``initial_obs`` (one 0-based observation per component) every
    probability is conditioned on the first observation: each component
    starts from its Bayes posterior and the first-period emission row is the
    indicator of the observed symbol. Raises ``ImpossibleObservation`` when
    the observation has probability zero.
    """
    obs = _check_obs(dec, initial_obs)
    total = fluid_variable_count(dec, with_cuts)
    if total > MAX_PRODUCT_CELLS:
        raise ProductTooLarge(f"fluid LP would have {total} variables")
    T, nA = dec.horizon, dec.num_actions
    lp = LpProblem("fluid")
    comps = dec.components
    idx_s = [np.empty((T, c.num_states), dtype=np.intp) for c in comps]
    idx_sa = [np.empty((T, c.num_states, nA), dtype=np.intp) for c in comps]
    idx_soa = [np.empty((T, c.num_states, c.num_observations, nA), dtype=np.intp) for c in comps]
    idx_a = np.empty((T, nA), dtype=np.intp)
    for t in range(T):
        for m, c in enumerate(comps):
            nS, nO = c.num_states, c.num_observations
            for s in range(nS):
                idx_s[m][t, s] = lp.add_variable(f"tau[{t}][{m}][{s}]")
            for s in range(nS):
                for a in range(nA):
                    idx_sa[m][t, s, a] = lp.add_variable(f"tau[{t}][{m}][{s}][{a}]")
            for s in range(nS):
                for o in range(nO):
                    for a in range(nA):
                        idx_soa[m][t, s, o, a] = lp.add_variable(f"tau[{t}][{m}][{s}][{o}][{a}]")
        for a in range(nA):
            idx_a[t, a] = lp.add_variable(f"taua[{t}][{a}]")
    idx_pair = None
    if with_cuts:
        idx_pair = []
        for m, c in enumerate(comps):
            nS, nO = c.num_states, c.num_observations
            arr = np.full((T, nS, nA, nS, nO, nA), -1, dtype=np.intp)
            for t in range(1, T):
                for sp_ in range(nS):
                    for ap in range(nA):
                        for s in range(nS):
                            for o in range(nO):
                                for a in range(nA):
                                    arr[t, sp_, ap, s, o, a] = lp.add_variable(
                                        f"taupair[{t}][{m}][{sp_}][{ap}][{s}][{o}][{a}]"
                                    )
            idx_pair.append(arr)

    objective = {}
    for m, c in enumerate(comps):
        R = c.expected_reward()
        for t in range(T):
            for s in range(c.num_states):
                for a in range(nA):
                    objective[int(idx_sa[m][t, s, a])] = float(R[s, a])
    lp.set_objective(objective)

    for m, c in enumerate(comps):
        nS, nO = c.num_states, c.num_observations
        P, E = c.transition, c.emission
        prior = c.initial
        first_emission = E
        if obs is not None:
            prior = posterior_given_observation(c.initial, E, obs[m])
            first_emission = np.zeros_like(E)
            first_emission[:, obs[m]] = 1.0
        for s in range(nS):
            lp.add_constraint({int(idx_s[m][0, s]): 1.0}, "=", float(prior[s]), f"init[{m}][{s}]")
        for t in range(T - 1):
            for s2 in range(nS):
                idx = [idx_s[m][t + 1, s2]] + idx_sa[m][t].ravel().tolist()
                val = [1.0] + (-P[:, :, s2]).ravel().tolist()
                lp.add_constraint((idx, val), "=", 0.0, f"flow[{t}][{m}][{s2}]")
        for t in range(T):
            emis = first_emission if t == 0 else E
            for s in range(nS):
                for a in range(nA):
                    idx = [idx_sa[m][t, s, a]] + idx_soa[m][t, s, :, a].tolist()
                    lp.add_constraint((idx, [1.0] + [-1.0] * nO), "=", 0.0, f"obs[{t}][{m}][{s}][{a}]")
            for a in range(nA):
                idx = idx_sa[m][t, :, a].tolist() + [idx_a[t, a]]
                lp.add_constraint((idx, [1.0] * nS + [-1.0]), "=", 0.0, f"couple[{t}][{m}][{a}]")
            for s in range(nS):
                for o in range(nO):
                    idx = idx_soa[m][t, s, o].tolist() + [idx_s[m][t, s]]
                    val = [1.0] * nA + [-float(emis[s, o])]
                    lp.add_constraint((idx, val), "=", 0.0, f"indep[{t}][{m}][{s}][{o}]")

        if with_cuts:
            pair = idx_pair[m]
            cond = conditional_state_table(c)
            for t in range(1, T):
                for s in range(nS):
                    for o in range(nO):
                        for a in range(nA):
                            idx = [idx_soa[m][t, s, o, a]] + pair[t, :, :, s, o, a].ravel().tolist()
                            val = [-1.0] + [1.0] * (nS * nA)
                            lp.add_constraint((idx, val), "=", 0.0, f"cutA[{t}][{m}][{s}][{o}][{a}]")
                for sp_ in range(nS):
                    for ap in range(nA):
                        for s in range(nS):
                            for o in range(nO):
                                coef = float(E[s, o] * P[sp_, ap, s])
                                idx = pair[t, sp_, ap, s, o, :].tolist() + [idx_sa[m][t - 1, sp_, ap]]
                                lp.add_constraint((idx, [1.0] * nA + [-coef]), "=", 0.0,
                                                  f"cutB[{t}][{m}][{sp_}][{ap}][{s}][{o}]")
                for sp_ in range(nS):
                    for ap in range(nA):
                        for o in range(nO):
                            post = cond[sp_, ap, o]
                            for a in range(nA):
                                block = pair[t, sp_, ap, :, o, a].tolist()
                                for s in range(nS):
                                    val = np.full(nS, -post[s])
                                    val[s] += 1.0
                                    lp.add_constraint((block, val.tolist()), "=", 0.0,
                                                      f"cutC[{t}][{m}][{sp_}][{ap}][{s}][{o}][{a}]")

    return lp, FluidIndex(idx_s, idx_sa, idx_soa, idx_a, idx_pair)


def measures_from_solution(x, index: FluidIndex) -> FluidMeasures:
    pair = None
    if index.tau_pair is not None:
        pair = [np.where(p >= 0, x[np.maximum(p, 0)], 0.0) for p in index.tau_pair]
    return FluidMeasures(
        [x[i] for i in index.tau_s],
        [x[i] for i in index.tau_sa],
        [x[i] for i in index.tau_soa],
        x[index.tau_a],
        pair,
    )


def measures_to_vector(index: FluidIndex, num_variables, measures: FluidMeasures):
    x = np.zeros(num_variables)
    for m in range(len(index.tau_s)):
        x[index.tau_s[m]] = measures.tau_s[m]
        x[index.tau_sa[m]] = measures.tau_sa[m]
        x[index.tau_soa[m]] = measures.tau_soa[m]
        if index.tau_pair is not None and measures.tau_pair is not None:
            ok = index.tau_pair[m] >= 0
            x[index.tau_pair[m][ok]] = measures.tau_pair[m][ok]
    x[index.tau_a] = measures.tau_a
    return x


def solve_fluid(dec: DecomposablePomdp, with_cuts=False, initial_obs=None, *, backend=None,
                iteration_limit=None) -> FluidSolveReport:
    start = time.perf_counter()
    lp, index = build_fluid_lp(dec, with_cuts, initial_obs)
    sol = solve_lp(lp, iteration_limit, backend=backend)
    if sol.status != LpStatus.OPTIMAL:
        raise RuntimeError(f"fluid LP ended with status {sol.status.value}")
    obs = None if initial_obs is None else tuple(int(o) for o in initial_obs)
    return FluidSolveReport(sol.objective, measures_from_solution(sol.x, index), with_cuts, obs,
                            time.perf_counter() - start)


def project_occupancy(dec: DecomposablePomdp, mu_s, mu_sa, mu_soa, mu_pair=None) -> FluidMeasures:
    """Marginalize joint-space occupancy measures of ``compose(dec)`` onto components."""
    M = dec.num_components
    T, nA = dec.horizon, dec.num_actions
    sshape, oshape = dec.state_shape, dec.observation_shape
    js = np.asarray(mu_s).reshape((T,) + sshape)
    jsa = np.asarray(mu_sa).reshape((T,) + sshape + (nA,))
    jsoa = np.asarray(mu_soa).reshape((T,) + sshape + oshape + (nA,))
    tau_s, tau_sa, tau_soa, tau_pair = [], [], [], []
    for m in range(M):
        others = tuple(1 + k for k in range(M) if k != m)
        tau_s.append(js.sum(axis=others))
        tau_sa.append(jsa.sum(axis=others))
        oth_o = tuple(1 + M + k for k in range(M) if k != m)
        tau_soa.append(jsoa.sum(axis=others + oth_o))
        if mu_pair is not None:
            jp = np.asarray(mu_pair).reshape((T,) + sshape + (nA,) + sshape + oshape + (nA,))
            # axes: 0 t | 1..M prev states | M+1 prev action | M+2..2M+1 states | 2M+2..3M+1 obs | a
            drop = tuple(1 + k for k in range(M) if k != m)
            drop += tuple(M + 2 + k for k in range(M) if k != m)
            drop += tuple(2 * M + 2 + k for k in range(M) if k != m)
            tau_pair.append(jp.sum(axis=drop))
    tau_a = jsa.sum(axis=tuple(range(1, M + 1)))
    return FluidMeasures(tau_s, tau_sa, tau_soa, tau_a, tau_pair if mu_pair is not None else None)


def check_achievable(dec: DecomposablePomdp, measures: FluidMeasures, tolerance: float = ACHIEVABLE_TOL):
    """Return the joint-observation policy realizing ``measures``, or ``None``.

    Per component and observation the conditional action distribution
    ``tau_soa / sum_a tau_soa`` must not depend on the state, and every
    component must imply the same rule for each joint observation. Cells
    whose denominator is at most ``tolerance`` are skipped; a joint
    observation constrained by no component gets the uniform rule.
    """
    T, nA = dec.horizon, dec.num_actions
    oshape = dec.observation_shape
    # comp_rules[m][t][o] -> rule vector or None
    comp_rules = []
    for m, c in enumerate(dec.components):
        soa = measures.tau_soa[m]
        rules = [[None] * c.num_observations for _ in range(T)]
        for t in range(T):
            for o in range(c.num_observations):
                block = soa[t, :, o, :]
                den = block.sum(axis=1)
                ok = den > tolerance
                if not ok.any():
                    continue
                ratios = block[ok] / den[ok, None]
                if np.abs(ratios - ratios[0]).max() > tolerance:
                    return None
                rules[t][o] = ratios[0]
        comp_rules.append(rules)

    n_joint = int(np.prod(oshape))
    out = np.full((T, n_joint, nA), 1.0 / nA)
    for t in range(T):
        for j in range(n_joint):
            parts = np.unravel_index(j, oshape)
            rule = None
            for m, o in enumerate(parts):
                r = comp_rules[m][t][int(o)]
                if r is None:
                    continue
                if rule is None:
                    rule = r
                elif np.abs(rule - r).max() > tolerance:
                    return None
            if rule is not None:
                out[t, j] = rule
    out = np.clip(out, 0.0, None)
    out /= out.sum(axis=2, keepdims=True)
    rounded = np.round(out)
    if np.all(np.abs(out - rounded) <= tolerance) and np.all(rounded.sum(axis=2) == 1):
        return Policy(rounded, deterministic=True)
    return Policy(out)


def extract_first_action(measures: FluidMeasures, tie_tol: float = 1e-9) -> int:
    """``argmax_a tau_a`` at the first period, lowest index among near-ties."""
    first = np.asarray(measures.tau_a)[0]
    return int(np.flatnonzero(first >= first.max() - tie_tol)[0])


def fluid_feasibility_residual(dec: DecomposablePomdp, measures: FluidMeasures, with_cuts=False,
                               initial_obs=None) -> float:
    """Largest constraint violation of ``measures`` in the fluid LP."""
    from .lp import check_feasibility

    lp, index = build_fluid_lp(dec, with_cuts, initial_obs)
    x = measures_to_vector(index, lp.num_variables, measures)
    rep = check_feasibility(lp, x)
    return max(rep.max_constraint_violation, rep.max_bound_violation)


def single_component(instance: PomdpInstance) -> DecomposablePomdp:
    return DecomposablePomdp(instance.num_actions, instance.horizon, (instance,))
