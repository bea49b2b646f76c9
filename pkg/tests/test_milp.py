import itertools
import math

import numpy as np
import pytest

from pomdp_lp.errors import PomdpLpError
from pomdp_lp.lp import LpProblem, check_feasibility, solve_lp
from pomdp_lp.milp import MilpProblem, root_relaxation, solve_milp


def knapsack(seed, n=8):
    rng = np.random.default_rng(seed)
    w = rng.integers(1, 10, size=n)
    v = rng.integers(1, 10, size=n)
    cap = int(w.sum() // 2)
    p = LpProblem()
    for j in range(n):
        p.add_variable(f"x{j}", 0, 1)
    p.add_constraint(dict(enumerate(w.tolist())), "<=", cap)
    p.set_objective(dict(enumerate(v.tolist())))
    best = max(v @ np.array(c) for c in itertools.product((0, 1), repeat=n) if w @ np.array(c) <= cap)
    return MilpProblem(p, range(n)), float(best)


def mixed(seed):
    """Binary and continuous variables; brute force over the binaries."""
    rng = np.random.default_rng(seed)
    nb, nc = 4, 3
    p = LpProblem()
    for j in range(nb):
        p.add_variable(f"b{j}", 0, 1)
    for j in range(nc):
        p.add_variable(f"y{j}", 0, 5)
    for i in range(4):
        coeffs = rng.normal(size=nb + nc)
        p.add_constraint(dict(enumerate(coeffs)), "<=", float(abs(rng.normal()) + 1))
    p.set_objective(dict(enumerate(rng.normal(size=nb + nc))))
    best = -math.inf
    for c in itertools.product((0.0, 1.0), repeat=nb):
        lo, hi = p.bounds()
        lo[:nb] = hi[:nb] = c
        sol = solve_lp(p, lower=lo, upper=hi)
        if sol.optimal:
            best = max(best, sol.objective)
    return MilpProblem(p, range(nb)), best


def test_empty_binary_set_equals_lp():
    prob, _ = knapsack(0)
    plain = MilpProblem(prob.base, [])
    res = solve_milp(plain)
    lp = solve_lp(prob.base)
    assert res.status == "Optimal" and res.branch_count == 0
    assert res.objective == pytest.approx(lp.objective)
    assert root_relaxation(plain).objective == pytest.approx(lp.objective)


def test_two_binaries():
    p = LpProblem()
    x = p.add_variable("x", 0, 1)
    y = p.add_variable("y", 0, 1)
    p.add_constraint({x: 1, y: 1}, "<=", 1)
    p.set_objective({x: 1, y: 1})
    res = solve_milp(MilpProblem(p, [x, y]))
    assert res.status == "Optimal" and res.objective == pytest.approx(1.0)


def test_binary_bounds_checked():
    p = LpProblem()
    p.add_variable("x", 0, 2)
    with pytest.raises(PomdpLpError):
        MilpProblem(p, [0])


def test_infeasible_root():
    p = LpProblem()
    x = p.add_variable("x", 0, 1)
    p.add_constraint({x: 1}, ">=", 2)
    res = solve_milp(MilpProblem(p, [x]))
    assert res.status == "Infeasible" and not res.has_incumbent


def test_integer_infeasible_after_branching():
    p = LpProblem()
    x = p.add_variable("x", 0, 1)
    y = p.add_variable("y", 0, 1)
    p.add_constraint({x: 1, y: 1}, "=", 1)
    p.add_constraint({x: 1, y: -1}, "=", 0)
    p.set_objective({x: 1})
    res = solve_milp(MilpProblem(p, [x, y]))
    assert res.status == "Infeasible"


@pytest.mark.parametrize("seed", range(10))
def test_knapsack_matches_enumeration(seed, kernel_backend):
    prob, best = knapsack(seed)
    res = solve_milp(prob, log_nodes=True)
    assert res.status == "Optimal"
    assert res.objective == pytest.approx(best, abs=1e-6)
    assert res.objective <= res.best_bound + 1e-6
    assert res.final_gap_percent >= -1e-6
    assert res.integrality_gap_percent >= res.final_gap_percent - 1e-9
    bounds = [row[2] for row in res.node_log]
    assert all(b2 <= b1 + 1e-9 for b1, b2 in zip(bounds, bounds[1:]))


@pytest.mark.parametrize("seed", range(10))
def test_mixed_matches_enumeration(seed):
    prob, best = mixed(seed)
    res = solve_milp(prob)
    assert res.objective == pytest.approx(best, abs=1e-6)
    x = res.x
    assert check_feasibility(prob.base, x).ok()
    b = np.array(sorted(prob.binaries))
    assert np.all(np.abs(x[b] - np.round(x[b])) <= 1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_reproducible(seed):
    prob, _ = knapsack(seed, n=12)
    a, b = solve_milp(prob), solve_milp(prob)
    assert a.node_count == b.node_count
    assert np.array_equal(a.x, b.x)


def test_cold_nodes_agree_with_warm_nodes():
    prob, best = knapsack(3, n=10)
    warm = solve_milp(prob)
    cold = solve_milp(prob, warm_start=False)
    assert warm.objective == pytest.approx(cold.objective) == pytest.approx(best)


def test_node_limit_reports_time_limit_status():
    prob, _ = knapsack(1, n=14)
    res = solve_milp(prob, node_limit=2)
    assert res.status == "TimeLimit"
    assert res.node_count <= 2
    if res.has_incumbent:
        assert res.objective <= res.best_bound + 1e-9


def test_time_limit_covers_the_root_relaxation():
    prob, _ = knapsack(1, n=14)
    res = solve_milp(prob, time_limit=1e-9)
    assert res.status == "TimeLimit"
    assert not res.has_incumbent
    assert res.node_count == 0


def test_rejects_nonpositive_time_limit():
    prob, _ = knapsack(0)
    with pytest.raises(ValueError):
        solve_milp(prob, time_limit=0)


def test_heuristic_candidates_validated():
    prob, best = next(kb for kb in map(knapsack, range(50))
                      if solve_milp(kb[0]).branch_count > 0)
    calls = []

    def bogus(x):
        calls.append(1)
        return np.full_like(x, 1.0)  # infeasible for the capacity row

    res = solve_milp(prob, heuristic=bogus)
    assert res.objective == pytest.approx(best)
    assert calls


def test_external_backend_agrees():
    prob, best = mixed(2)
    res = solve_milp(prob, backend="external")
    assert res.objective == pytest.approx(best, abs=1e-6)
