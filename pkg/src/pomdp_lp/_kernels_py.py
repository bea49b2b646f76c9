"""Pure numpy implementations of the hot loops.

Mirrors ``_kernels.pyx`` function for function; :mod:`pomdp_lp.kernels`
picks whichever is available.
"""

import numpy as np

BASIC, AT_LOWER, AT_UPPER, FREE, FIXED = 0, 1, 2, 3, 4


def select_entering(d, status, tol, bland):
    """Index of the entering column for a minimization, or -1 at optimality.

    Dantzig rule (largest |d_j|, lowest index on ties) unless ``bland``,
    in which case the lowest eligible index wins.
    """
    elig = ((status == AT_LOWER) & (d < -tol)) | ((status == AT_UPPER) & (d > tol))
    elig |= (status == FREE) & (np.abs(d) > tol)
    if bland:
        nz = np.flatnonzero(elig)
        return int(nz[0]) if nz.size else -1
    score = np.where(elig, np.abs(d), 0.0)
    j = int(np.argmax(score))
    return j if score[j] > 0.0 else -1


def ratio_test(x_b, lb_b, ub_b, alpha, direction, phase1, ftol, piv_tol, bland, basis):
    """Bounded ratio test along ``x_B(theta) = x_B - theta * direction * alpha``.

    Returns ``(row, theta, leave_at_upper)``; ``row == -1`` when no basic
    variable blocks. Harris two-pass selection unless ``bland``.
    In phase 1 an infeasible basic variable blocks where it becomes
    feasible and never blocks while moving away from its bounds.
    """
    m = x_b.shape[0]
    rate = -direction * alpha
    big = np.abs(alpha) > piv_tol
    dec = big & (rate < 0.0)
    inc = big & (rate > 0.0)
    if phase1:
        above = x_b > ub_b + ftol
        below = x_b < lb_b - ftol
        feas = ~(above | below)
    else:
        above = below = np.zeros(m, dtype=bool)
        feas = np.ones(m, dtype=bool)

    theta = np.full(m, np.inf)
    slack = np.full(m, np.inf)
    to_upper = np.zeros(m, dtype=bool)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        mask = dec & feas & np.isfinite(lb_b)
        theta[mask] = (x_b[mask] - lb_b[mask]) / -rate[mask]
        slack[mask] = (x_b[mask] - lb_b[mask] + ftol) / -rate[mask]
        mask = dec & above
        theta[mask] = (x_b[mask] - ub_b[mask]) / -rate[mask]
        slack[mask] = (x_b[mask] - ub_b[mask] + ftol) / -rate[mask]
        to_upper[mask] = True
        mask = inc & feas & np.isfinite(ub_b)
        theta[mask] = (ub_b[mask] - x_b[mask]) / rate[mask]
        slack[mask] = (ub_b[mask] - x_b[mask] + ftol) / rate[mask]
        to_upper[mask] = True
        mask = inc & below
        theta[mask] = (lb_b[mask] - x_b[mask]) / rate[mask]
        slack[mask] = (lb_b[mask] - x_b[mask] + ftol) / rate[mask]

    if bland:
        tmin = theta.min()
        if not np.isfinite(tmin):
            return -1, np.inf, False
        cand = np.flatnonzero(theta <= tmin + 1e-12)
        r = int(cand[np.argmin(basis[cand])])
    else:
        tmax = slack.min()
        if not np.isfinite(tmax):
            return -1, np.inf, False
        cand = theta <= tmax
        r = int(np.argmax(np.where(cand, np.abs(alpha), -1.0)))
    return r, max(float(theta[r]), 0.0), bool(to_upper[r])


def eta_ftran(v, rows, etas, count):
    """Apply the product-form eta file to ``v`` in place (oldest first)."""
    for k in range(count):
        r = rows[k]
        e = etas[k]
        vr = v[r] / e[r]
        if vr != 0.0:
            v -= e * vr
        v[r] = vr


def eta_btran(w, rows, etas, count):
    """Transpose solve through the eta file in place (newest first)."""
    for k in range(count - 1, -1, -1):
        r = rows[k]
        e = etas[k]
        wr = w[r]
        w[r] = 0.0
        w[r] = (wr - e @ w) / e[r]


def policy_values(initial, transition, expected_reward, emission, horizon, rules):
    """Value of every deterministic memoryless policy, lexicographic order.

    ``rules[k, o]`` lists the per-step decision rules; policy index is the
    base-``K`` number whose most significant digit is the t=0 rule.
    """
    K = rules.shape[0]
    nS, nA = expected_reward.shape
    # weight[k, s, a] = P(A = a | S = s) under rule k
    weight = np.zeros((K, nS, nA))
    for k in range(K):
        for o in range(rules.shape[1]):
            weight[k, :, rules[k, o]] += emission[:, o]
    mus = initial[None, :].copy()
    values = np.zeros(1)
    for _ in range(horizon):
        mu_sa = mus[:, None, :, None] * weight[None, :, :, :]
        values = (values[:, None] + np.einsum("bksa,sa->bk", mu_sa, expected_reward)).ravel()
        mus = np.einsum("bksa,sap->bkp", mu_sa, transition).reshape(-1, nS)
    return values


def dual_ratio_test(alpha_row, d, status, sign, opt_tol, piv_tol):
    """Entering column for a dual simplex pivot, or -1 if the dual is unbounded.

    ``sign`` is +1 when the leaving variable goes to its lower bound and -1
    for the upper bound. Harris two-pass selection on ``|d_j / alpha_j|``.
    """
    at = -sign * alpha_row
    elig = ((status == AT_LOWER) & (at > piv_tol)) | ((status == AT_UPPER) & (at < -piv_tol))
    elig |= (status == FREE) & (np.abs(at) > piv_tol)
    cand = np.flatnonzero(elig)
    if cand.size == 0:
        return -1
    a = np.abs(at[cand])
    dd = np.abs(d[cand])
    tmax = ((dd + opt_tol) / a).min()
    ok = dd / a <= tmax
    return int(cand[np.argmax(np.where(ok, a, -1.0))])
