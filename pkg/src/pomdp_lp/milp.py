"""Best-bound branch and bound over binary variables."""

from __future__ import annotations

import heapq
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import PomdpLpError
from .lp import LpProblem, LpSolution, LpStatus, check_feasibility, solve_lp

INTEGER_TOL = 1e-6


@dataclass
class MilpProblem:
    base: LpProblem
    binaries: frozenset

    def __post_init__(self):
        self.binaries = frozenset(int(j) for j in self.binaries)
        lo, hi = self.base.bounds()
        for j in self.binaries:
            if not 0 <= j < self.base.num_variables:
                raise PomdpLpError(f"binary variable {j} does not exist")
            if lo[j] < 0.0 or hi[j] > 1.0:
                raise PomdpLpError(f"binary {self.base.labels[j]} has bounds outside [0, 1]")


@dataclass
class MilpResult:
    status: str  # "Optimal" | "TimeLimit" | "Infeasible"
    objective: float
    best_bound: float
    x: np.ndarray | None
    root_bound: float
    node_count: int
    branch_count: int
    wall_time: float
    node_log: list = field(default_factory=list, repr=False)

    @property
    def final_gap_percent(self):
        return _gap(self.best_bound, self.objective)

    @property
    def integrality_gap_percent(self):
        return _gap(self.root_bound, self.objective)

    @property
    def has_incumbent(self):
        return self.x is not None


def _gap(bound, value):
    if not (math.isfinite(bound) and math.isfinite(value)):
        return math.inf
    return 100.0 * (bound - value) / max(abs(value), 1e-9)


def root_relaxation(problem: MilpProblem, **kwargs) -> LpSolution:
    """LP relaxation with binaries relaxed to their [0, 1] bounds."""
    return solve_lp(problem.base, **kwargs)


def _fractional(x, binaries):
    frac = np.minimum(x[binaries] - np.floor(x[binaries]), np.ceil(x[binaries]) - x[binaries])
    return frac


def solve_milp(
    problem: MilpProblem,
    time_limit: float = math.inf,
    gap_tolerance: float = 1e-6,
    *,
    node_limit: int | None = None,
    warm_start: bool = True,
    heuristic=None,
    log_nodes: bool = False,
    backend: str | None = None,
) -> MilpResult:
    """Maximize ``problem`` by branch and bound.

    Nodes are explored best-bound first (ties by creation order); the
    branching variable is the most fractional binary, lowest index on ties.
    ``heuristic(x)`` may return a candidate integer point built from a node
    relaxation; it is accepted only if it passes :func:`check_feasibility`.
    """
    if not time_limit > 0:
        raise ValueError("time_limit must be positive")
    backend = backend or os.environ.get("POMDP_LP_BACKEND", "builtin")
    if backend == "external":
        return _solve_milp_external(problem, time_limit, gap_tolerance)
    start = time.perf_counter()
    base = problem.base
    binaries = np.array(sorted(problem.binaries), dtype=np.intp)
    lo0, hi0 = base.bounds()

    deadline = start + time_limit
    root = solve_lp(base, backend=backend, deadline=deadline)
    if root.status == LpStatus.TIME_LIMIT:
        return MilpResult("TimeLimit", -math.inf, math.inf, None, math.nan, 0, 0,
                          time.perf_counter() - start)
    if root.status == LpStatus.INFEASIBLE:
        return MilpResult("Infeasible", math.nan, math.nan, None, math.nan, 1, 0,
                          time.perf_counter() - start)
    if root.status != LpStatus.OPTIMAL:
        raise PomdpLpError(f"root relaxation ended with status {root.status.value}")
    z_lr = root.objective

    incumbent = -math.inf
    best_x = None
    log = []
    counter = 0
    nodes = 0
    branched = 0
    # heap entries: (-bound, seq, depth, lower, upper, solution or None, warm basis)
    heap = [(-z_lr, counter, 0, lo0, hi0, root, None)]
    status = "Optimal"
    best_bound = z_lr

    def try_candidate(cand):
        nonlocal incumbent, best_x
        if cand is None:
            return
        cand = np.asarray(cand, dtype=float)
        if np.any(_fractional(cand, binaries) > INTEGER_TOL):
            return
        if not check_feasibility(base, cand).ok():
            return
        value = float(base.objective_vector() @ cand)
        if value > incumbent + 1e-12:
            incumbent, best_x = value, cand

    while heap:
        neg_bound, seq, depth, lo, hi, sol, warm = heap[0]
        bound = -neg_bound
        best_bound = max(bound, incumbent)
        if best_x is not None and (bound - incumbent) <= gap_tolerance * max(abs(incumbent), 1e-9):
            break
        if time.perf_counter() - start > time_limit or (node_limit is not None and nodes >= node_limit):
            status = "TimeLimit"
            break
        heapq.heappop(heap)
        if sol is None:
            sol = solve_lp(base, lower=lo, upper=hi, warm_start=warm if warm_start else None,
                           backend=backend, deadline=deadline)
            if sol.status == LpStatus.TIME_LIMIT:
                status = "TimeLimit"
                break
        nodes += 1
        if sol.status != LpStatus.OPTIMAL:
            if sol.status != LpStatus.INFEASIBLE:
                raise PomdpLpError(f"node relaxation ended with status {sol.status.value}")
            continue
        node_bound = min(sol.objective, bound) if seq else sol.objective
        if log_nodes:
            log.append((nodes, depth, best_bound, incumbent))
        if node_bound <= incumbent + gap_tolerance * max(abs(incumbent), 1e-9):
            continue
        x = sol.x
        frac = _fractional(x, binaries)
        if frac.size == 0 or frac.max() <= INTEGER_TOL:
            cand = x.copy()
            cand[binaries] = np.round(cand[binaries])
            if sol.objective > incumbent:
                incumbent, best_x = sol.objective, cand
            continue
        if heuristic is not None:
            try_candidate(heuristic(x))
        pick = int(np.argmax(frac))  # first maximal entry, i.e. lowest index
        j = binaries[pick]
        branched += 1
        for side in (0.0, 1.0):
            nlo, nhi = lo.copy(), hi.copy()
            nlo[j] = nhi[j] = side
            counter += 1
            heapq.heappush(heap, (-node_bound, counter, depth + 1, nlo, nhi, None, sol.basis))
    else:
        best_bound = incumbent

    if best_x is None:
        if status == "TimeLimit":
            return MilpResult("TimeLimit", -math.inf, best_bound, None, z_lr, nodes, branched,
                              time.perf_counter() - start, log)
        return MilpResult("Infeasible", math.nan, math.nan, None, z_lr, nodes, branched,
                          time.perf_counter() - start, log)
    best_bound = max(best_bound, incumbent)
    return MilpResult(status, incumbent, best_bound, best_x, z_lr, nodes, branched,
                      time.perf_counter() - start, log)


def _solve_milp_external(problem: MilpProblem, time_limit, gap_tolerance) -> MilpResult:
    """HiGHS branch and cut via :func:`scipy.optimize.milp` (cross-checks only)."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    start = time.perf_counter()
    base = problem.base
    M = base.matrix()
    rel = np.array(base.relations, dtype=object)
    rhs = np.array(base.rhs)
    lo_c = np.where(rel == "<=", -np.inf, rhs)
    hi_c = np.where(rel == ">=", np.inf, rhs)
    integrality = np.zeros(base.num_variables)
    integrality[list(problem.binaries)] = 1
    lo, hi = base.bounds()
    opts = {"mip_rel_gap": gap_tolerance}
    if math.isfinite(time_limit):
        opts["time_limit"] = time_limit
    res = milp(-base.objective_vector(), constraints=LinearConstraint(M, lo_c, hi_c),
               integrality=integrality, bounds=Bounds(lo, hi), options=opts)
    root = solve_lp(base, backend="external")
    elapsed = time.perf_counter() - start
    if res.x is None:
        return MilpResult("Infeasible", math.nan, math.nan, None, root.objective, 0, 0, elapsed)
    value = float(base.objective_vector() @ res.x)
    bound = -float(res.mip_dual_bound) if res.mip_dual_bound is not None else value
    status = "Optimal" if res.status == 0 else "TimeLimit"
    return MilpResult(status, value, max(bound, value), res.x, root.objective,
                      int(getattr(res, "mip_node_count", 0) or 0), 0, elapsed)
