import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vpfplab import _kernels_py as py
from vpfplab import kernels

try:
    from vpfplab import _kernels as cy
except ImportError:  # pragma: no cover
    cy = None

needs_cy = pytest.mark.skipif(cy is None, reason="compiled extension not built")


def _bands(rng, m, n):
    lo = -rng.random((m, n))
    up = -rng.random((m, n))
    d = 1.0 + np.abs(lo) + np.abs(up) + rng.random((m, n))
    return lo, d, up


def test_thomas_matches_dense(rng):
    lo, d, up = _bands(rng, 5, 12)
    rhs = rng.standard_normal((5, 12))
    x, ok = kernels.thomas_batched(lo, d, up, rhs)
    assert ok
    for k in range(5):
        A = np.diag(d[k]) + np.diag(up[k, :-1], 1) + np.diag(lo[k, 1:], -1)
        np.testing.assert_allclose(A @ x[k], rhs[k], atol=1e-13)


def test_thomas_zero_pivot_flag():
    d = np.zeros((1, 4))
    x, ok = py.thomas_batched(np.zeros((1, 4)), d, np.zeros((1, 4)), np.ones((1, 4)))
    assert not ok
    assert np.isnan(x).any()


@given(alpha=st.floats(-3.0, 3.0), seed=st.integers(0, 2**16))
def test_periodic_shift_conserves_and_stays_positive(alpha, seed):
    r = np.random.default_rng(seed)
    f = r.random((3, 32)) ** 3
    out = kernels.pfc_shift_periodic(f, np.full(3, alpha))
    assert out.min() >= 0.0
    np.testing.assert_allclose(out.sum(axis=1), f.sum(axis=1), rtol=1e-13)


@pytest.mark.parametrize("k", [-2, 1, 3])
def test_integer_shift_is_exact_roll(rng, k):
    f = rng.random((2, 16))
    out = kernels.pfc_shift_periodic(f, np.full(2, float(k)))
    np.testing.assert_array_equal(out, np.roll(f, k, axis=1))


def test_open_shift_leak_bookkeeping(rng):
    f = rng.random((4, 20))
    out, leak = kernels.pfc_shift_open(f, np.array([0.7, -0.7, 2.5, -3.2]))
    np.testing.assert_allclose(f.sum(axis=1) - out.sum(axis=1), leak, atol=1e-14)
    assert np.all(leak >= -1e-15)


@needs_cy
@given(seed=st.integers(0, 2**16), alpha=st.floats(-2.0, 2.0))
def test_backends_agree_bitwise(seed, alpha):
    r = np.random.default_rng(seed)
    f = r.random((4, 24))
    s = alpha * r.random(4)
    np.testing.assert_array_equal(py.pfc_shift_periodic(f, s), cy.pfc_shift_periodic(f, s))
    a, la = py.pfc_shift_open(f, s)
    b, lb = cy.pfc_shift_open(f, s)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(la, lb)
    lo, d, up = _bands(r, 4, 24)
    xa, oka = py.thomas_batched(lo, d, up, f)
    xb, okb = cy.thomas_batched(lo, d, up, f)
    assert oka == okb
    np.testing.assert_array_equal(xa, xb)


@needs_cy
def test_backend_accepts_readonly_inputs(rng):
    f = rng.random((2, 8))
    f.setflags(write=False)
    cy.pfc_shift_periodic(f, np.array([0.3, -0.3]))
