# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the simplex and enumeration hot loops.

Same signatures and results as ``_kernels_py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY, isfinite

cnp.import_array()

cdef enum:
    BASIC = 0
    AT_LOWER = 1
    AT_UPPER = 2
    FREE = 3


def select_entering(const double[::1] d, const signed char[::1] status, double tol, bint bland):
    cdef Py_ssize_t j, n = d.shape[0], best = -1
    cdef double score, best_score = 0.0
    cdef signed char st
    for j in range(n):
        st = status[j]
        if st == AT_LOWER:
            score = -d[j] if d[j] < -tol else 0.0
        elif st == AT_UPPER:
            score = d[j] if d[j] > tol else 0.0
        elif st == FREE:
            score = fabs(d[j]) if fabs(d[j]) > tol else 0.0
        else:
            continue
        if score > 0.0:
            if bland:
                return j
            if score > best_score:
                best_score = score
                best = j
    return best


def ratio_test(const double[::1] x_b, const double[::1] lb_b, const double[::1] ub_b,
               const double[::1] alpha, double direction, bint phase1, double ftol,
               double piv_tol, bint bland, const cnp.intp_t[::1] basis):
    cdef Py_ssize_t i, m = x_b.shape[0], r = -1
    cdef double rate, th, sl, tmax = INFINITY, tmin = INFINITY, best_abs = -1.0
    cdef bint above, below
    # pass 1: Harris bound (or exact minimum under Bland)
    for i in range(m):
        if fabs(alpha[i]) <= piv_tol:
            continue
        rate = -direction * alpha[i]
        above = phase1 and x_b[i] > ub_b[i] + ftol
        below = phase1 and x_b[i] < lb_b[i] - ftol
        th = INFINITY
        sl = INFINITY
        if rate < 0.0:
            if above:
                th = (x_b[i] - ub_b[i]) / -rate
                sl = (x_b[i] - ub_b[i] + ftol) / -rate
            elif not below and isfinite(lb_b[i]):
                th = (x_b[i] - lb_b[i]) / -rate
                sl = (x_b[i] - lb_b[i] + ftol) / -rate
        else:
            if below:
                th = (lb_b[i] - x_b[i]) / rate
                sl = (lb_b[i] - x_b[i] + ftol) / rate
            elif not above and isfinite(ub_b[i]):
                th = (ub_b[i] - x_b[i]) / rate
                sl = (ub_b[i] - x_b[i] + ftol) / rate
        if th < tmin:
            tmin = th
        if sl < tmax:
            tmax = sl
    if bland:
        if not isfinite(tmin):
            return -1, INFINITY, False
    elif not isfinite(tmax):
        return -1, INFINITY, False

    # pass 2: pick the row
    cdef double chosen_th = 0.0
    cdef bint chosen_upper = False, upper
    cdef cnp.intp_t best_var = -1
    for i in range(m):
        if fabs(alpha[i]) <= piv_tol:
            continue
        rate = -direction * alpha[i]
        above = phase1 and x_b[i] > ub_b[i] + ftol
        below = phase1 and x_b[i] < lb_b[i] - ftol
        th = INFINITY
        upper = False
        if rate < 0.0:
            if above:
                th = (x_b[i] - ub_b[i]) / -rate
                upper = True
            elif not below and isfinite(lb_b[i]):
                th = (x_b[i] - lb_b[i]) / -rate
        else:
            if below:
                th = (lb_b[i] - x_b[i]) / rate
            elif not above and isfinite(ub_b[i]):
                th = (ub_b[i] - x_b[i]) / rate
                upper = True
        if bland:
            if th <= tmin + 1e-12 and (best_var < 0 or basis[i] < best_var):
                best_var = basis[i]
                r = i
                chosen_th = th
                chosen_upper = upper
        elif th <= tmax and fabs(alpha[i]) > best_abs:
            best_abs = fabs(alpha[i])
            r = i
            chosen_th = th
            chosen_upper = upper
    if chosen_th < 0.0:
        chosen_th = 0.0
    return r, chosen_th, chosen_upper


def eta_ftran(double[::1] v, const cnp.intp_t[::1] rows, const double[:, ::1] etas, Py_ssize_t count):
    cdef Py_ssize_t k, i, r, m = v.shape[0]
    cdef double vr
    for k in range(count):
        r = rows[k]
        vr = v[r] / etas[k, r]
        if vr != 0.0:
            for i in range(m):
                v[i] -= etas[k, i] * vr
        v[r] = vr


def eta_btran(double[::1] w, const cnp.intp_t[::1] rows, const double[:, ::1] etas, Py_ssize_t count):
    cdef Py_ssize_t k, i, r, m = w.shape[0]
    cdef double acc
    for k in range(count - 1, -1, -1):
        r = rows[k]
        acc = 0.0
        for i in range(m):
            if i != r:
                acc += etas[k, i] * w[i]
        w[r] = (w[r] - acc) / etas[k, r]


def policy_values(const double[::1] initial, const double[:, :, ::1] transition,
                  const double[:, ::1] expected_reward, const double[:, ::1] emission,
                  Py_ssize_t horizon, const cnp.intp_t[:, ::1] rules):
    """Depth-first enumeration sharing the state distribution of each prefix."""
    cdef Py_ssize_t K = rules.shape[0], nO = rules.shape[1]
    cdef Py_ssize_t nS = expected_reward.shape[0], nA = expected_reward.shape[1]
    cdef Py_ssize_t total = 1, t, s, a, p, o, leaf = 0
    for t in range(horizon):
        total *= K
    values_arr = np.empty(total, dtype=np.float64)
    cdef double[::1] values = values_arr
    # weight[k, s, a]
    w_arr = np.zeros((K, nS, nA), dtype=np.float64)
    cdef double[:, :, ::1] weight = w_arr
    cdef Py_ssize_t k
    for k in range(K):
        for o in range(nO):
            for s in range(nS):
                weight[k, s, rules[k, o]] += emission[s, o]
    mu_arr = np.zeros((horizon + 1, nS), dtype=np.float64)
    cdef double[:, ::1] mu = mu_arr
    val_arr = np.zeros(horizon + 1, dtype=np.float64)
    cdef double[::1] val = val_arr
    digit_arr = np.zeros(horizon, dtype=np.intp)
    cdef Py_ssize_t[::1] digit = digit_arr
    cdef double msa, acc
    for s in range(nS):
        mu[0, s] = initial[s]
    t = 0
    digit[0] = 0
    while True:
        # expand level t with rule digit[t]
        k = digit[t]
        acc = 0.0
        for p in range(nS):
            mu[t + 1, p] = 0.0
        for s in range(nS):
            for a in range(nA):
                msa = mu[t, s] * weight[k, s, a]
                if msa != 0.0:
                    acc += msa * expected_reward[s, a]
                    for p in range(nS):
                        mu[t + 1, p] += msa * transition[s, a, p]
        val[t + 1] = val[t] + acc
        if t + 1 == horizon:
            values[leaf] = val[t + 1]
            leaf += 1
            # advance the odometer
            while t >= 0:
                digit[t] += 1
                if digit[t] < K:
                    break
                t -= 1
            if t < 0:
                break
        else:
            t += 1
            digit[t] = 0
    return values_arr


def dual_ratio_test(const double[::1] alpha_row, const double[::1] d, const signed char[::1] status,
                    double sign, double opt_tol, double piv_tol):
    cdef Py_ssize_t j, n = d.shape[0], best = -1
    cdef double at, a, tmax = INFINITY, best_a = -1.0, r
    cdef signed char st
    for j in range(n):
        st = status[j]
        at = -sign * alpha_row[j]
        if (st == AT_LOWER and at > piv_tol) or (st == AT_UPPER and at < -piv_tol) or \
                (st == FREE and fabs(at) > piv_tol):
            r = (fabs(d[j]) + opt_tol) / fabs(at)
            if r < tmax:
                tmax = r
    if not isfinite(tmax):
        return -1
    for j in range(n):
        st = status[j]
        at = -sign * alpha_row[j]
        if (st == AT_LOWER and at > piv_tol) or (st == AT_UPPER and at < -piv_tol) or \
                (st == FREE and fabs(at) > piv_tol):
            a = fabs(at)
            if fabs(d[j]) / a <= tmax and a > best_a:
                best_a = a
                best = j
    return best
