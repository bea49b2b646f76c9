import numpy as np
import pytest
from hypothesis import given, strategies as st

from pomdp_lp import kernels

py = kernels.python_kernels
cy = kernels.compiled_kernels
needs_compiled = pytest.mark.skipif(cy is None, reason="compiled kernels not built")

seeds = st.integers(0, 2**32 - 1)


def random_state(seed, n):
    rng = np.random.default_rng(seed)
    d = np.round(rng.normal(size=n), 2)
    status = rng.integers(0, 5, size=n).astype(np.int8)
    return rng, d, status


def test_backend_flag():
    assert kernels.BACKEND in ("compiled", "python")
    assert "python" in kernels.available_backends()


@needs_compiled
@given(seeds, st.integers(1, 40), st.booleans())
def test_select_entering_agrees(seed, n, bland):
    _, d, status = random_state(seed, n)
    assert py.select_entering(d, status, 1e-7, bland) == cy.select_entering(d, status, 1e-7, bland)


@needs_compiled
@given(seeds, st.integers(1, 30), st.booleans(), st.booleans())
def test_ratio_test_agrees(seed, m, phase1, bland):
    rng = np.random.default_rng(seed)
    lb = np.where(rng.random(m) < 0.8, 0.0, -np.inf)
    ub = np.where(rng.random(m) < 0.5, rng.integers(1, 4, size=m).astype(float), np.inf)
    x = np.round(rng.normal(size=m) * 2, 1)
    alpha = np.round(rng.normal(size=m), 1)
    basis = rng.permutation(3 * m)[:m].astype(np.intp)
    direction = 1.0 if rng.random() < 0.5 else -1.0
    a = py.ratio_test(x, lb, ub, alpha, direction, phase1, 1e-7, 1e-9, bland, basis)
    b = cy.ratio_test(x, lb, ub, alpha, direction, phase1, 1e-7, 1e-9, bland, basis)
    assert a[0] == b[0] and a[2] == b[2]
    assert a[1] == pytest.approx(b[1], rel=1e-12) or a[1] == b[1]


@needs_compiled
@given(seeds, st.integers(1, 30), st.sampled_from([1.0, -1.0]))
def test_dual_ratio_test_agrees(seed, n, sign):
    rng, d, status = random_state(seed, n)
    alpha = np.round(rng.normal(size=n), 1)
    assert (py.dual_ratio_test(alpha, d, status, sign, 1e-7, 1e-9)
            == cy.dual_ratio_test(alpha, d, status, sign, 1e-7, 1e-9))


@pytest.mark.parametrize("name", sorted(kernels.available_backends()))
@given(seed=seeds, m=st.integers(1, 12), count=st.integers(0, 6))
def test_eta_file_inverts_product_form(name, seed, m, count):
    k = kernels.available_backends()[name]
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, m, size=max(count, 1)).astype(np.intp)
    etas = rng.normal(size=(max(count, 1), m))
    etas[np.arange(len(rows)), rows] = rng.uniform(1.0, 2.0, size=len(rows))
    # explicit product of eta matrices E_1 ... E_k (each is the identity with column r replaced)
    B = np.eye(m)
    for j in range(count):
        E = np.eye(m)
        E[:, rows[j]] = etas[j]
        B = B @ E
    v = rng.normal(size=m)
    x = v.copy()
    k.eta_ftran(x, rows, etas, count)
    assert np.allclose(B @ x, v, atol=1e-9)
    w = v.copy()
    k.eta_btran(w, rows, etas, count)
    assert np.allclose(B.T @ w, v, atol=1e-9)


@needs_compiled
@given(seeds, st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_policy_values_agree(seed, nS, nO, nA, T):
    from pomdp_lp.model import generate_random_instance
    from pomdp_lp.oracle import enumerate_policy_values

    inst = generate_random_instance(seed, nS, nO, nA, T)
    a = enumerate_policy_values(inst, kern=py)
    b = enumerate_policy_values(inst, kern=cy)
    assert np.allclose(a, b, atol=1e-12, rtol=0)
