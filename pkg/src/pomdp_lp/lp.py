"""Linear programs and a self-contained bounded revised simplex solver.

Problems are stated in maximization form::

    max  c^T x
    s.t. a_i^T x  (<=, =, >=)  b_i
         l <= x <= u

The solver works on the standard form ``A x = b`` obtained by adding a
slack column per inequality row and an artificial column per row.
Artificials are fixed to zero; phase 1 minimizes the sum of bound
infeasibilities of the basic variables, phase 2 the (negated) objective.
The basis is factorized with SuperLU every ``REFACTOR_EVERY`` pivots and
updated in product form in between.
"""

from __future__ import annotations

import enum
import math
import os
import time
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .errors import BasisSingular, MissingVariable, PomdpLpError

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
OPT_TOL = 1e-7
REFACTOR_EVERY = 50

BASIC, AT_LOWER, AT_UPPER, FREE, FIXED = 0, 1, 2, 3, 4

LE, EQ, GE = "<=", "=", ">="
_RELATIONS = {"<=": LE, "≤": LE, "le": LE, "=": EQ, "==": EQ, "eq": EQ, ">=": GE, "≥": GE, "ge": GE}


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"
    TIME_LIMIT = "TimeLimit"


class LpProblem:
    """Maximization LP with labelled variables and constraints."""

    def __init__(self, name=""):
        self.name = name
        self.labels: list[str] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.objective: dict[int, float] = {}
        self.row_labels: list[str] = []
        self.relations: list[str] = []
        self.rhs: list[float] = []
        self._row_idx: list[np.ndarray] = []
        self._row_val: list[np.ndarray] = []
        self._var_index: dict[str, int] = {}
        self._row_index: dict[str, int] = {}
        self._std = None

    # -- construction ------------------------------------------------------

    @property
    def num_variables(self):
        return len(self.labels)

    @property
    def num_constraints(self):
        return len(self.rhs)

    def add_variable(self, label, lower=0.0, upper=math.inf) -> int:
        label = str(label)
        if label in self._var_index:
            raise ValueError(f"duplicate variable label {label!r}")
        lower, upper = float(lower), float(upper)
        if math.isnan(lower) or math.isnan(upper) or lower > upper:
            raise ValueError(f"invalid bounds [{lower}, {upper}] for {label!r}")
        self._var_index[label] = len(self.labels)
        self.labels.append(label)
        self.lower.append(lower)
        self.upper.append(upper)
        self._std = None
        return len(self.labels) - 1

    def add_constraint(self, coeffs, relation, rhs, label=None) -> int:
        """Add ``sum coeffs[j] x_j (relation) rhs``.

        ``coeffs`` is a mapping ``{variable index: coefficient}`` or a pair of
        sequences ``(indices, values)``; repeated indices are summed.
        """
        rel = _RELATIONS.get(relation)
        if rel is None:
            raise ValueError(f"unknown relation {relation!r}")
        if isinstance(coeffs, Mapping):
            idx = np.fromiter(coeffs.keys(), dtype=np.intp, count=len(coeffs))
            val = np.fromiter(coeffs.values(), dtype=float, count=len(coeffs))
        else:
            idx = np.asarray(coeffs[0], dtype=np.intp)
            val = np.asarray(coeffs[1], dtype=float)
        if idx.size and (idx.min() < 0 or idx.max() >= self.num_variables):
            raise MissingVariable(f"constraint references unknown variable in {idx.tolist()}")
        if not np.all(np.isfinite(val)) or not math.isfinite(float(rhs)):
            raise ValueError("constraint coefficients and right-hand side must be finite")
        if label is None:
            label = f"c{len(self.rhs)}"
        label = str(label)
        if label in self._row_index:
            raise ValueError(f"duplicate constraint label {label!r}")
        self._row_index[label] = len(self.rhs)
        self.row_labels.append(label)
        self.relations.append(rel)
        self.rhs.append(float(rhs))
        self._row_idx.append(idx)
        self._row_val.append(val)
        self._std = None
        return len(self.rhs) - 1

    def set_objective(self, coeffs: Mapping[int, float]):
        for j, v in coeffs.items():
            if not 0 <= j < self.num_variables:
                raise MissingVariable(f"objective references unknown variable {j}")
            if not math.isfinite(v):
                raise ValueError("objective coefficients must be finite")
        self.objective = {int(j): float(v) for j, v in coeffs.items() if v != 0.0}
        self._std = None

    def index(self, label) -> int:
        try:
            return self._var_index[label]
        except KeyError:
            raise MissingVariable(label) from None

    def row(self, label) -> int:
        return self._row_index[label]

    def constraint(self, i):
        return self._row_idx[i], self._row_val[i], self.relations[i], self.rhs[i]

    def copy(self) -> "LpProblem":
        out = LpProblem(self.name)
        out.labels = list(self.labels)
        out.lower = list(self.lower)
        out.upper = list(self.upper)
        out.objective = dict(self.objective)
        out.row_labels = list(self.row_labels)
        out.relations = list(self.relations)
        out.rhs = list(self.rhs)
        out._row_idx = list(self._row_idx)
        out._row_val = list(self._row_val)
        out._var_index = dict(self._var_index)
        out._row_index = dict(self._row_index)
        return out

    # -- matrix views --------------------------------------------------------

    def matrix(self) -> sp.csr_matrix:
        """Constraint matrix (rows in insertion order), duplicates summed."""
        m, n = self.num_constraints, self.num_variables
        cached = getattr(self, "_matrix_cache", None)
        if cached is not None and cached[0] == (m, n):
            return cached[1]
        lens = [len(i) for i in self._row_idx]
        rows = np.repeat(np.arange(m), lens)
        cols = np.concatenate(self._row_idx) if m else np.zeros(0, dtype=np.intp)
        vals = np.concatenate(self._row_val) if m else np.zeros(0)
        mat = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
        self._matrix_cache = ((m, n), mat)
        return mat

    def objective_vector(self):
        c = np.zeros(self.num_variables)
        for j, v in self.objective.items():
            c[j] = v
        return c

    def bounds(self):
        return np.array(self.lower, dtype=float), np.array(self.upper, dtype=float)

    def standard_form(self) -> "StandardForm":
        if self._std is None:
            self._std = StandardForm.build(self)
        return self._std

    # -- text dump -----------------------------------------------------------

    def dump(self) -> str:
        """Fixed-format LP text: objective, one constraint per line, bounds."""

        def term_list(pairs):
            parts = []
            for j, v in pairs:
                sign = "-" if v < 0 else "+"
                parts.append(f"{sign} {abs(v):.17g} {self.labels[j]}")
            text = " ".join(parts)
            return text[2:] if text.startswith("+ ") else text or "0"

        lines = ["Maximize", f" obj: {term_list(sorted(self.objective.items()))}", "Subject To"]
        for i in range(self.num_constraints):
            pairs = list(zip(self._row_idx[i].tolist(), self._row_val[i].tolist()))
            lines.append(
                f" {self.row_labels[i]}: {term_list(pairs)} {self.relations[i]} {self.rhs[i]:.17g}"
            )
        lines.append("Bounds")
        for j, label in enumerate(self.labels):
            lo, hi = self.lower[j], self.upper[j]
            lo_s = "-inf" if lo == -math.inf else f"{lo:.17g}"
            hi_s = "+inf" if hi == math.inf else f"{hi:.17g}"
            lines.append(f" {lo_s} <= {label} <= {hi_s}")
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class StandardForm:
    """``A x = b`` with structurals, then slacks, then one artificial per row."""

    A: sp.csc_matrix
    AT: sp.csr_matrix
    b: np.ndarray
    cost: np.ndarray  # minimization costs, zero outside the structurals
    lower: np.ndarray
    upper: np.ndarray
    kept_rows: np.ndarray
    slack_of_row: np.ndarray  # column index or -1
    slack_sign: np.ndarray
    num_structural: int
    infeasible_empty_row: bool = False

    @classmethod
    def build(cls, problem: LpProblem) -> "StandardForm":
        n = problem.num_variables
        M = problem.matrix().tocsr()
        rhs = np.array(problem.rhs, dtype=float)
        rel = np.array(problem.relations, dtype=object) if problem.num_constraints else np.zeros(0, dtype=object)
        nnz_row = np.diff(M.indptr)
        nonempty = nnz_row > 0
        # presolve: empty rows must hold as 0 (rel) rhs
        bad = False
        for i in np.flatnonzero(~nonempty):
            r, b = rel[i], rhs[i]
            if (r == EQ and abs(b) > FEAS_TOL) or (r == LE and b < -FEAS_TOL) or (r == GE and b > FEAS_TOL):
                bad = True
        kept = np.flatnonzero(nonempty)
        M = M[kept]
        rhs = rhs[kept]
        rel = rel[kept]
        m = len(kept)
        ineq = np.flatnonzero(rel != EQ)
        n_slack = len(ineq)
        slack_of_row = np.full(m, -1, dtype=np.intp)
        slack_of_row[ineq] = n + np.arange(n_slack)
        slack_sign = np.zeros(m)
        slack_sign[ineq] = np.where(rel[ineq] == LE, 1.0, -1.0)
        S = sp.csr_matrix((slack_sign[ineq], (ineq, np.arange(n_slack))), shape=(m, n_slack))
        A = sp.hstack([M, S, sp.identity(m, format="csr")], format="csc")
        A.sort_indices()
        lo, hi = problem.bounds()
        lower = np.concatenate([lo, np.zeros(n_slack), np.zeros(m)])
        upper = np.concatenate([hi, np.full(n_slack, np.inf), np.zeros(m)])
        cost = np.zeros(A.shape[1])
        cost[:n] = -problem.objective_vector()
        return cls(A, A.T.tocsr(), rhs, cost, lower, upper, kept, slack_of_row,
                   slack_sign, n, bad)

    @property
    def shape(self):
        return self.A.shape

    @property
    def first_artificial(self):
        return self.A.shape[1] - self.A.shape[0]


@dataclass
class LpSolution:
    status: LpStatus
    objective: float
    x: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int
    basis: "BasisState | None" = field(default=None, repr=False)

    @property
    def optimal(self):
        return self.status == LpStatus.OPTIMAL

    def value(self, problem: LpProblem, label):
        return float(self.x[problem.index(label)])


@dataclass
class BasisState:
    """Warm-start data: basic column per row and nonbasic status per column."""

    basis: np.ndarray
    status: np.ndarray


class _Engine:
    def __init__(self, std: StandardForm, lower, upper, kern, iteration_limit):
        self.std = std
        self.A = std.A
        self.AT = std.AT
        self.m, self.N = std.A.shape
        self.lb = lower
        self.ub = upper
        self.k = kern
        self.limit = iteration_limit
        self.deadline = math.inf
        self.iterations = 0
        self.x = np.zeros(self.N)
        self.status = np.full(self.N, AT_LOWER, dtype=np.int8)
        self.basis = np.zeros(self.m, dtype=np.intp)
        self.eta_rows = np.zeros(REFACTOR_EVERY, dtype=np.intp)
        self.etas = np.zeros((REFACTOR_EVERY, self.m))
        self.n_eta = 0
        self.lu = None
        self.bland = False
        self.stall_limit = 3 * (self.m + self.N)

    # -- basis bookkeeping ---------------------------------------------------

    def _nonbasic_status(self, j, preferred=AT_LOWER):
        lo, hi = self.lb[j], self.ub[j]
        if lo == hi:
            return FIXED
        if preferred == AT_UPPER and np.isfinite(hi):
            return AT_UPPER
        if np.isfinite(lo):
            return AT_LOWER
        if np.isfinite(hi):
            return AT_UPPER
        return FREE

    def _place_nonbasic(self):
        nb = self.status != BASIC
        st = self.status
        self.x[nb & ((st == AT_LOWER) | (st == FIXED))] = self.lb[nb & ((st == AT_LOWER) | (st == FIXED))]
        self.x[nb & (st == AT_UPPER)] = self.ub[nb & (st == AT_UPPER)]
        self.x[nb & (st == FREE)] = 0.0

    def crash(self):
        """Slack/artificial starting basis."""
        std = self.std
        for j in range(self.N):
            self.status[j] = self._nonbasic_status(j)
        self._place_nonbasic()
        n = std.num_structural
        resid = std.b - self.A[:, :n] @ self.x[:n]
        art0 = std.first_artificial
        for i in range(self.m):
            s = std.slack_of_row[i]
            if s >= 0 and resid[i] * std.slack_sign[i] >= 0.0:
                self.basis[i] = s
            else:
                self.basis[i] = art0 + i
        self.status[self.basis] = BASIC

    def warm(self, state: BasisState):
        self.basis = state.basis.copy()
        st = state.status.copy()
        nb = st != BASIC
        lo_fin, hi_fin = np.isfinite(self.lb), np.isfinite(self.ub)
        new = np.where(lo_fin, AT_LOWER, np.where(hi_fin, AT_UPPER, FREE))
        new = np.where((st == AT_UPPER) & hi_fin, AT_UPPER, new)
        new = np.where(self.lb == self.ub, FIXED, new)
        st[nb] = new[nb]
        self.status = st
        self._place_nonbasic()

    def _basis_matrix(self):
        A = self.A
        start = A.indptr[self.basis]
        lens = A.indptr[self.basis + 1] - start
        indptr = np.zeros(self.m + 1, dtype=A.indptr.dtype)
        np.cumsum(lens, out=indptr[1:])
        pos = np.repeat(start - indptr[:-1], lens) + np.arange(indptr[-1])
        return sp.csc_matrix((A.data[pos], A.indices[pos], indptr), shape=(self.m, self.m))

    def factor(self):
        try:
            self.lu = splu(self._basis_matrix(), permc_spec="COLAMD", diag_pivot_thresh=0.1)
        except RuntimeError as exc:
            raise BasisSingular(str(exc)) from None
        self.n_eta = 0
        x_nb = self.x.copy()
        x_nb[self.basis] = 0.0
        self.x[self.basis] = self.lu.solve(self.std.b - self.A @ x_nb)

    def refresh(self):
        """Recompute basic values through the current factors and eta file."""
        x_nb = self.x.copy()
        x_nb[self.basis] = 0.0
        self.x[self.basis] = self.ftran(self.std.b - self.A @ x_nb)

    def ftran(self, v):
        out = self.lu.solve(v)
        if self.n_eta:
            self.k.eta_ftran(out, self.eta_rows, self.etas, self.n_eta)
        return out

    def btran(self, c):
        w = np.array(c, dtype=float)
        if self.n_eta:
            self.k.eta_btran(w, self.eta_rows, self.etas, self.n_eta)
        return self.lu.solve(w, trans="T")

    def column(self, j):
        A = self.A
        v = np.zeros(self.m)
        lo, hi = A.indptr[j], A.indptr[j + 1]
        v[A.indices[lo:hi]] = A.data[lo:hi]
        return v

    def infeasibility(self):
        xb = self.x[self.basis]
        lo = self.lb[self.basis]
        hi = self.ub[self.basis]
        return np.maximum(lo - xb, 0.0) + np.maximum(xb - hi, 0.0)

    # -- main loop -------------------------------------------------------------

    def run(self, phase):
        """Iterate one phase. Returns 'optimal', 'infeasible', 'unbounded' or 'limit'."""
        stall = 0
        self.bland = False
        refactor_tries = 0
        while True:
            if self.iterations >= self.limit:
                return "limit"
            if self.iterations % 32 == 0 and time.perf_counter() > self.deadline:
                return "time"
            if self.n_eta >= REFACTOR_EVERY:
                self.factor()
            basis = self.basis
            xb = self.x[basis]
            lb_b = self.lb[basis]
            ub_b = self.ub[basis]
            if phase == 1:
                cb = np.where(xb < lb_b - FEAS_TOL, -1.0, np.where(xb > ub_b + FEAS_TOL, 1.0, 0.0))
                if not cb.any():
                    return "optimal"
                y = self.btran(cb)
                d = -(self.AT @ y)
            else:
                y = self.btran(self.std.cost[basis])
                d = self.std.cost - self.AT @ y
            q = self.k.select_entering(d, self.status, OPT_TOL, self.bland)
            if q < 0:
                if self.n_eta and refactor_tries == 0:
                    # confirm optimality after recomputing x_B from scratch
                    refactor_tries = 1
                    self.refresh()
                    continue
                return "infeasible" if phase == 1 else "optimal"
            refactor_tries = 0
            direction = 1.0 if d[q] < 0.0 else -1.0
            alpha = self.ftran(self.column(q))
            r, theta, to_upper = self.k.ratio_test(
                xb, lb_b, ub_b, alpha, direction, phase == 1, FEAS_TOL, PIVOT_TOL,
                self.bland, basis,
            )
            span = self.ub[q] - self.lb[q]
            self.iterations += 1
            if span <= theta and np.isfinite(span):
                # bound flip, no basis change
                theta = span
                self.x[basis] = xb - theta * direction * alpha
                self.x[q] = self.ub[q] if direction > 0 else self.lb[q]
                self.status[q] = AT_UPPER if direction > 0 else AT_LOWER
                stall = 0
                continue
            if r < 0:
                if phase == 2:
                    return "unbounded"
                # phase 1 cannot be unbounded; treat as numerical trouble
                self.factor()
                self.bland = True
                continue
            if abs(alpha[r]) < PIVOT_TOL:
                self.factor()
                self.bland = True
                continue
            leaving = basis[r]
            self.x[basis] = xb - theta * direction * alpha
            self.x[q] = self.x[q] + direction * theta
            self.x[leaving] = self.ub[leaving] if to_upper else self.lb[leaving]
            if self.lb[leaving] == self.ub[leaving]:
                self.status[leaving] = FIXED
            else:
                self.status[leaving] = AT_UPPER if to_upper else AT_LOWER
            self.status[q] = BASIC
            basis[r] = q
            self.eta_rows[self.n_eta] = r
            self.etas[self.n_eta] = alpha
            self.n_eta += 1
            if theta <= 1e-12:
                stall += 1
                if stall > self.stall_limit:
                    self.bland = True
            else:
                stall = 0

    def reduced_costs(self):
        y = self.btran(self.std.cost[self.basis])
        return self.std.cost - self.AT @ y

    def make_dual_feasible(self):
        """Flip boxed nonbasics onto the bound their reduced cost prefers.

        Returns False when some unboxed column has the wrong sign, in which
        case the basis is left untouched.
        """
        d = self.reduced_costs()
        st = self.status
        bad_lo = (st == AT_LOWER) & (d < -OPT_TOL)
        bad_hi = (st == AT_UPPER) & (d > OPT_TOL)
        bad_free = (st == FREE) & (np.abs(d) > OPT_TOL)
        boxed = np.isfinite(self.lb) & np.isfinite(self.ub)
        if np.any((bad_lo | bad_hi) & ~boxed) or bad_free.any():
            return False
        if bad_lo.any() or bad_hi.any():
            st[bad_lo] = AT_UPPER
            st[bad_hi] = AT_LOWER
            self._place_nonbasic()
            self.refresh()
        return True

    def run_dual(self):
        """Dual simplex from a dual feasible basis.

        Returns 'optimal', 'infeasible', 'limit' or 'stall'; the last means
        the caller should fall back to the primal method.
        """
        d = self.reduced_costs()
        stall = 0
        confirmed = False
        while True:
            if self.iterations >= self.limit:
                return "limit"
            if self.iterations % 32 == 0 and time.perf_counter() > self.deadline:
                return "time"
            if self.n_eta >= REFACTOR_EVERY:
                self.factor()
                d = self.reduced_costs()
            basis = self.basis
            xb = self.x[basis]
            lo_b = self.lb[basis]
            hi_b = self.ub[basis]
            below = lo_b - xb
            above = xb - hi_b
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= FEAS_TOL:
                return "optimal"
            p = basis[r]
            to_lower = below[r] > above[r]
            e = np.zeros(self.m)
            e[r] = 1.0
            rho = self.btran(e)
            alpha_row = self.AT @ rho
            q = self.k.dual_ratio_test(alpha_row, d, self.status, 1.0 if to_lower else -1.0,
                                       OPT_TOL, PIVOT_TOL)
            if q < 0:
                if confirmed:
                    return "infeasible"
                confirmed = True
                self.factor()
                d = self.reduced_costs()
                continue
            confirmed = False
            alpha = self.ftran(self.column(q))
            a_rq = alpha[r]
            if abs(a_rq) < PIVOT_TOL or abs(a_rq - alpha_row[q]) > 1e-6 * (1.0 + abs(a_rq)):
                # row and column disagree: numerical drift, start over from fresh factors
                self.factor()
                d = self.reduced_costs()
                stall += 1
                if stall > 20:
                    return "stall"
                continue
            theta_d = d[q] / a_rq
            d -= theta_d * alpha_row
            d[q] = 0.0
            d[p] = -theta_d
            bound = lo_b[r] if to_lower else hi_b[r]
            t = (xb[r] - bound) / a_rq
            self.x[basis] = xb - t * alpha
            self.x[q] += t
            self.x[p] = bound
            if self.lb[p] == self.ub[p]:
                self.status[p] = FIXED
            else:
                self.status[p] = AT_LOWER if to_lower else AT_UPPER
            self.status[q] = BASIC
            basis[r] = q
            self.eta_rows[self.n_eta] = r
            self.etas[self.n_eta] = alpha
            self.n_eta += 1
            self.iterations += 1
            if abs(theta_d) <= 1e-12:
                stall += 1
                if stall > self.stall_limit:
                    return "stall"
            else:
                stall = 0

    def solve(self, try_dual=False):
        self.factor()
        if try_dual and self.make_dual_feasible():
            outcome = self.run_dual()
            if outcome == "time":
                return LpStatus.TIME_LIMIT
            if outcome == "limit":
                return LpStatus.ITERATION_LIMIT
            if outcome == "infeasible":
                return LpStatus.INFEASIBLE
        for _ in range(5):
            outcome = self.run(1)
            if outcome == "time":
                return LpStatus.TIME_LIMIT
            if outcome == "limit":
                return LpStatus.ITERATION_LIMIT
            if outcome == "infeasible":
                if self.infeasibility().max(initial=0.0) > FEAS_TOL:
                    return LpStatus.INFEASIBLE
            outcome = self.run(2)
            if outcome == "time":
                return LpStatus.TIME_LIMIT
            if outcome == "limit":
                return LpStatus.ITERATION_LIMIT
            if outcome == "unbounded":
                return LpStatus.UNBOUNDED
            if self.n_eta:
                self.refresh()
            if self.infeasibility().max(initial=0.0) <= FEAS_TOL:
                return LpStatus.OPTIMAL
        raise BasisSingular("simplex could not restore primal feasibility")


def _default_limit(std):
    m, N = std.shape
    return max(20000, 20 * (m + N))


def solve_lp(problem: LpProblem, iteration_limit=None, *, lower=None, upper=None,
             warm_start: BasisState | None = None, backend=None,
             deadline: float = math.inf) -> LpSolution:
    """Solve ``problem``; never raises on infeasibility or iteration limits.

    ``lower``/``upper`` override the structural bounds (used by branch and
    bound), ``warm_start`` restarts from a previous basis. ``deadline`` is a
    ``time.perf_counter()`` instant after which the solve stops with
    ``TIME_LIMIT``.
    """
    backend = backend or os.environ.get("POMDP_LP_BACKEND", "builtin")
    if backend == "external":
        return solve_lp_external(problem, lower=lower, upper=upper)
    if backend != "builtin":
        raise ValueError(f"unknown LP backend {backend!r}")
    std = problem.standard_form()
    n = std.num_structural
    lb = std.lower.copy()
    ub = std.upper.copy()
    if lower is not None:
        lb[:n] = lower
    if upper is not None:
        ub[:n] = upper
    nan = np.full(n, np.nan)
    if std.infeasible_empty_row or np.any(lb > ub):
        return LpSolution(LpStatus.INFEASIBLE, math.nan, nan, np.zeros(problem.num_constraints),
                          np.zeros(n), 0)
    limit = _default_limit(std) if iteration_limit is None else int(iteration_limit)
    eng = _Engine(std, lb, ub, kernels.active, limit)
    eng.deadline = deadline
    if warm_start is not None:
        eng.warm(warm_start)
        try:
            status = eng.solve(try_dual=True)
        except BasisSingular:
            eng = _Engine(std, lb, ub, kernels.active, limit)
            eng.deadline = deadline
            eng.crash()
            status = eng.solve()
    else:
        eng.crash()
        try:
            status = eng.solve()
        except BasisSingular:
            # one retry from a fresh crash basis under Bland's rule
            eng = _Engine(std, lb, ub, kernels.active, limit)
            eng.deadline = deadline
            eng.crash()
            eng.stall_limit = 0
            status = eng.solve()
    return _package(problem, std, eng, status)


def _package(problem, std, eng, status):
    n = std.num_structural
    x = eng.x[:n].copy()
    duals = np.zeros(problem.num_constraints)
    rc = np.zeros(n)
    if status == LpStatus.OPTIMAL:
        y = eng.btran(std.cost[eng.basis])
        d = std.cost - eng.AT @ y
        duals[std.kept_rows] = -y
        rc = -d[:n]
        rc[eng.status[:n] == BASIC] = 0.0
        # clean tiny bound drift so reported points are feasible to 1e-9
        lo, hi = std.lower[:n], std.upper[:n]
        lo = np.where(np.isfinite(eng.lb[:n]), eng.lb[:n], lo)
        hi = np.where(np.isfinite(eng.ub[:n]), eng.ub[:n], hi)
        x = np.minimum(np.maximum(x, lo), hi)
        objective = float(problem.objective_vector() @ x)
    elif status == LpStatus.UNBOUNDED:
        objective = math.inf
    else:
        objective = math.nan
    state = BasisState(eng.basis.copy(), eng.status.copy())
    return LpSolution(status, objective, x, duals, rc, eng.iterations, state)


def solve_lp_external(problem: LpProblem, lower=None, upper=None) -> LpSolution:
    """Cross-check adapter backed by HiGHS through :func:`scipy.optimize.linprog`."""
    from scipy.optimize import linprog

    M = problem.matrix()
    rel = np.array(problem.relations, dtype=object)
    rhs = np.array(problem.rhs)
    le = rel == LE
    ge = rel == GE
    eq = rel == EQ
    A_ub = sp.vstack([M[le], -M[ge]]) if (le.any() or ge.any()) else None
    b_ub = np.concatenate([rhs[le], -rhs[ge]]) if A_ub is not None else None
    lo, hi = problem.bounds()
    if lower is not None:
        lo = np.asarray(lower, dtype=float)
    if upper is not None:
        hi = np.asarray(upper, dtype=float)
    bounds = np.column_stack([np.where(np.isfinite(lo), lo, -np.inf), np.where(np.isfinite(hi), hi, np.inf)])
    res = linprog(
        -problem.objective_vector(), A_ub=A_ub, b_ub=b_ub,
        A_eq=M[eq] if eq.any() else None, b_eq=rhs[eq] if eq.any() else None,
        bounds=bounds, method="highs",
    )
    n = problem.num_variables
    status = {0: LpStatus.OPTIMAL, 1: LpStatus.ITERATION_LIMIT, 2: LpStatus.INFEASIBLE,
              3: LpStatus.UNBOUNDED}.get(res.status)
    if status is None:
        raise PomdpLpError(f"external solver failed: {res.message}")
    duals = np.zeros(problem.num_constraints)
    if status == LpStatus.OPTIMAL:
        if A_ub is not None:
            marg = -res.ineqlin.marginals
            k = int(le.sum())
            duals[le] = marg[:k]
            duals[ge] = -marg[k:]
        if eq.any():
            duals[eq] = -res.eqlin.marginals
        x = res.x
        objective = float(problem.objective_vector() @ x)
    else:
        x = np.full(n, np.nan)
        objective = math.inf if status == LpStatus.UNBOUNDED else math.nan
    return LpSolution(status, objective, x, duals, np.zeros(n), int(res.nit))


@dataclass
class FeasibilityReport:
    max_constraint_violation: float
    worst_constraint: str | None
    max_bound_violation: float
    worst_variable: str | None
    residuals: np.ndarray

    def ok(self, tol=FEAS_TOL):
        return self.max_constraint_violation <= tol and self.max_bound_violation <= tol


def _as_point(problem: LpProblem, point):
    n = problem.num_variables
    if isinstance(point, Mapping):
        x = np.full(n, np.nan)
        for key, v in point.items():
            j = problem.index(key) if isinstance(key, str) else int(key)
            if not 0 <= j < n:
                raise MissingVariable(key)
            x[j] = float(v)
    else:
        x = np.asarray(point, dtype=float)
        if x.shape != (n,):
            raise MissingVariable(f"point has {x.shape} entries, expected ({n},)")
    if np.isnan(x).any():
        missing = problem.labels[int(np.flatnonzero(np.isnan(x))[0])]
        raise MissingVariable(missing)
    return x


def check_feasibility(problem: LpProblem, point) -> FeasibilityReport:
    """Largest constraint and bound violations of ``point``.

    ``point`` is an array over variables or a mapping keyed by label or index.
    """
    x = _as_point(problem, point)
    lhs = problem.matrix() @ x
    rhs = np.array(problem.rhs)
    rel = np.array(problem.relations, dtype=object)
    viol = np.zeros(problem.num_constraints)
    if problem.num_constraints:
        viol = np.where(rel == EQ, np.abs(lhs - rhs),
                        np.where(rel == LE, np.maximum(lhs - rhs, 0.0), np.maximum(rhs - lhs, 0.0)))
    lo, hi = problem.bounds()
    bviol = np.maximum(lo - x, 0.0) + np.maximum(x - hi, 0.0)
    ci = int(np.argmax(viol)) if viol.size else -1
    bi = int(np.argmax(bviol)) if bviol.size else -1
    cmax = float(viol[ci]) if ci >= 0 else 0.0
    bmax = float(bviol[bi]) if bi >= 0 else 0.0
    return FeasibilityReport(
        cmax, problem.row_labels[ci] if cmax > 0 else None,
        bmax, problem.labels[bi] if bmax > 0 else None,
        viol,
    )
