"""Scenario simulation of decomposable POMDPs under rolling policies.

Randomness is common across policies: the uniforms used at step ``t`` of a
scenario come from a stream keyed by ``(seed, t)``, and states and
observations are drawn from them by inverse CDF. Two policies facing the
same seed therefore see the same noise and diverge only through their
actions.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ImpossibleObservation
from .fluid import extract_first_action, solve_fluid
from .model import Belief, DecomposablePomdp

HEURISTICS = ("alg1", "greedy")


@dataclass(frozen=True)
class StepRecord:
    t: int
    state: tuple
    observation: tuple
    action: int
    reward: float


@dataclass
class Scenario:
    seed: int
    log: list = field(default_factory=list)
    decision_times: list = field(default_factory=list)
    impossible_observation: bool = False

    @property
    def total_reward(self) -> float:
        return float(sum(r.reward for r in self.log))

    @property
    def actions(self):
        return [r.action for r in self.log]

    @property
    def mean_step_seconds(self) -> float:
        return float(np.mean(self.decision_times)) if self.decision_times else 0.0


@dataclass
class SolveOptions:
    with_cuts: bool = False
    fixed_window: int | None = None
    backend: str | None = None


@dataclass
class ScenarioResult:
    k: int
    seed: int
    bound: float
    total_reward: float
    mean_step_seconds: float
    impossible_observation: bool

    @property
    def gap_percent(self) -> float:
        return gap_percent(self.bound, self.total_reward)


@dataclass
class SimulationReport:
    heuristic: str
    scenarios: list

    @property
    def rewards(self):
        return np.array([s.total_reward for s in self.scenarios])

    @property
    def bounds(self):
        return np.array([s.bound for s in self.scenarios])

    @property
    def nonpositive_bounds(self) -> int:
        return int(sum(1 for s in self.scenarios if not s.bound > 0))

    @property
    def average_gap_percent(self) -> float:
        gaps = [s.gap_percent for s in self.scenarios if s.bound > 0]
        return float(np.mean(gaps)) if gaps else math.nan

    @property
    def mean_step_seconds(self) -> float:
        return float(np.mean([s.mean_step_seconds for s in self.scenarios]))

    @property
    def mean_reward(self) -> float:
        return float(self.rewards.mean())

    def to_csv(self, timing: bool = False) -> str:
        """One row per scenario plus a summary row.

        Timing columns are left empty unless ``timing`` is set, so the
        output is byte-identical across runs.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "seed", "z_Mk", "R_k", "gap_pct", "mean_step_seconds"])
        for s in self.scenarios:
            gap = s.gap_percent
            w.writerow([s.k, s.seed, repr(s.bound), repr(s.total_reward),
                        repr(gap) if s.bound > 0 else "",
                        repr(s.mean_step_seconds) if timing else ""])
        w.writerow(["summary", self.heuristic, repr(float(self.bounds.mean())),
                    repr(self.mean_reward), repr(self.average_gap_percent),
                    repr(self.mean_step_seconds) if timing else ""])
        return buf.getvalue()


def gap_percent(bound: float, reward: float) -> float:
    """``100 (z - R) / z``; NaN when the bound is not positive."""
    if not bound > 0:
        return math.nan
    return 100.0 * (bound - reward) / bound


def step_uniforms(seed: int, t: int, num_components: int) -> np.ndarray:
    """Uniforms for step ``t``: rows are (initial state, observation, transition) per component."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(t)])))
    return rng.random((3, num_components))


def _draw(p, u) -> int:
    cdf = np.cumsum(p)
    return int(min(np.searchsorted(cdf, u * cdf[-1], side="right"), len(p) - 1))


def scenario_seed(master_seed: int, k: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), int(k)]).generate_state(1, np.uint64)[0])


def _filter(beliefs, observation, dec):
    out, ok = [], True
    for m, c in enumerate(dec.components):
        b = np.asarray(beliefs[m], dtype=float)
        post = c.emission[:, observation[m]] * b
        total = post.sum()
        if total > 0.0:
            out.append(post / total)
        else:
            out.append(b)
            ok = False
    return out, ok


def _predict(vectors, action, dec):
    out = []
    for m, c in enumerate(dec.components):
        nxt = vectors[m] @ c.transition[:, action, :]
        out.append(nxt / nxt.sum())
    return out


def belief_update(beliefs, observation, action, dec: DecomposablePomdp, *, return_flag=False):
    """Filter each component belief on its observation, then predict through the action.

    If an observation has zero likelihood under a component belief, that
    component is predicted from its unfiltered belief and the returned flag
    (with ``return_flag=True``) is False.
    """
    filtered, ok = _filter(beliefs, observation, dec)
    new = Belief(tuple(_predict(filtered, int(action), dec)))
    return (new, ok) if return_flag else new


def initial_belief(dec: DecomposablePomdp) -> Belief:
    return Belief(tuple(c.initial for c in dec.components))


def _simulate(dec: DecomposablePomdp, seed: int, choose) -> Scenario:
    M, T = dec.num_components, dec.horizon
    comps = dec.components
    scen = Scenario(int(seed))
    belief = initial_belief(dec)
    state = None
    for t in range(T):
        u = step_uniforms(seed, t, M)
        if t == 0:
            state = tuple(_draw(c.initial, u[0, m]) for m, c in enumerate(comps))
        obs = tuple(_draw(c.emission[state[m]], u[1, m]) for m, c in enumerate(comps))
        start = time.perf_counter()
        action = choose(t, belief, obs)
        scen.decision_times.append(time.perf_counter() - start)
        nxt = tuple(_draw(c.transition[state[m], action], u[2, m]) for m, c in enumerate(comps))
        reward = float(sum(c.reward[state[m], action, nxt[m]] for m, c in enumerate(comps)))
        scen.log.append(StepRecord(t, state, obs, int(action), reward))
        belief, ok = belief_update(belief, obs, action, dec, return_flag=True)
        if not ok:
            scen.impossible_observation = True
        state = nxt
    return scen


def run_heuristic_policy(dec: DecomposablePomdp, seed: int, options: SolveOptions | None = None) -> Scenario:
    """Rolling fluid policy: re-solve from the current beliefs each step, act on the first action."""
    opts = options or SolveOptions()
    T = dec.horizon

    def choose(t, belief, obs):
        horizon = T - t
        if opts.fixed_window is not None:
            horizon = min(horizon, int(opts.fixed_window))
        sub = dec.with_initials(belief.vectors).with_horizon(horizon)
        try:
            rep = solve_fluid(sub, opts.with_cuts, obs, backend=opts.backend)
        except ImpossibleObservation:
            rep = solve_fluid(sub, opts.with_cuts, None, backend=opts.backend)
        return extract_first_action(rep.measures)

    return _simulate(dec, seed, choose)


def greedy_action(dec: DecomposablePomdp, filtered) -> int:
    """Most probable state per component, then the best expected immediate reward."""
    total = np.zeros(dec.num_actions)
    for m, c in enumerate(dec.components):
        s_hat = int(np.argmax(filtered[m]))
        total += c.expected_reward()[s_hat]
    return int(np.argmax(total))


def run_greedy_policy(dec: DecomposablePomdp, seed: int, options: SolveOptions | None = None) -> Scenario:
    def choose(t, belief, obs):
        filtered, _ = _filter(belief.vectors, obs, dec)
        return greedy_action(dec, filtered)

    return _simulate(dec, seed, choose)


def first_observation(dec: DecomposablePomdp, seed: int) -> tuple:
    u = step_uniforms(seed, 0, dec.num_components)
    state = [_draw(c.initial, u[0, m]) for m, c in enumerate(dec.components)]
    return tuple(_draw(c.emission[state[m]], u[1, m]) for m, c in enumerate(dec.components))


class BoundCache:
    """Fluid upper bounds with cuts, keyed by the conditioning observation."""

    def __init__(self, dec: DecomposablePomdp, condition=True, backend=None):
        self.dec = dec
        self.condition = condition
        self.backend = backend
        self._cache = {}

    def __call__(self, obs) -> float:
        key = tuple(obs) if self.condition else None
        if key not in self._cache:
            self._cache[key] = solve_fluid(self.dec, True, key, backend=self.backend).objective
        return self._cache[key]


def monte_carlo(dec: DecomposablePomdp, heuristic: str, K: int, master_seed: int,
                options: SolveOptions | None = None, *, bounds: BoundCache | None = None) -> SimulationReport:
    """Simulate ``K`` scenarios and compare each return with its fluid bound."""
    if heuristic not in HEURISTICS:
        raise ValueError(f"unknown heuristic {heuristic!r}; expected one of {HEURISTICS}")
    if int(K) < 1:
        raise ValueError("K must be >= 1")
    opts = options or SolveOptions()
    bounds = bounds or BoundCache(dec, backend=opts.backend)
    run = run_heuristic_policy if heuristic == "alg1" else run_greedy_policy
    rows = []
    for k in range(int(K)):
        seed = scenario_seed(master_seed, k)
        z = bounds(first_observation(dec, seed))
        scen = run(dec, seed, opts)
        rows.append(ScenarioResult(k, seed, float(z), scen.total_reward, scen.mean_step_seconds,
                                   scen.impossible_observation))
    return SimulationReport(heuristic, rows)
