import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from pinnbarrier import mms

X, NU = sp.symbols("x nu", positive=True)


def _symbolic(log_fn):
    L = log_fn(1 / NU)
    u = sp.sin(2 * sp.pi * X) + sp.Rational(1, 2) * L * sp.sin(6 * sp.pi * X) + L + 2
    du = sp.diff(u, X)
    d2u = sp.diff(du, X)
    S = u * du - NU * d2u
    return [sp.lambdify((X, NU), e, "numpy") for e in (u, du, d2u, S)]


SYM = {
    "natural": _symbolic(sp.log),
    "base10": _symbolic(lambda z: sp.log(z, 10)),
}

xs = st.floats(-1.0, 1.0)
nus = st.floats(1e-6, 1e-1)


@settings(max_examples=200, deadline=None)
@given(xs, nus, st.sampled_from(mms.LOG_BASES))
def test_derivatives_match_symbolic_oracle(x, nu, base):
    u, du, d2u, S = SYM[base]
    ev = mms.eval_mms_derivs(x, nu, base)
    assert ev.u == pytest.approx(u(x, nu), rel=1e-13, abs=1e-13)
    assert ev.du == pytest.approx(du(x, nu), rel=1e-12, abs=1e-11)
    assert ev.d2u == pytest.approx(d2u(x, nu), rel=1e-12, abs=1e-10)
    assert ev.source == pytest.approx(S(x, nu), rel=1e-12, abs=1e-10)
    assert mms.eval_mms(x, nu, base) == ev.u


def test_exact_triple_has_zero_residual():
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, 1000)
    nu = 10 ** rng.uniform(-6, -1, 1000)
    ev = mms.eval_mms_derivs(x, nu)
    r = mms.residual_of_field(ev.u, ev.du, ev.d2u, x, nu)
    assert np.max(np.abs(r)) < 1e-11


def test_inflow_value_and_log_bases():
    # u(-1) = L + 2 because both sines vanish at integer multiples of pi
    assert mms.eval_mms(-1.0, 1e-2) == pytest.approx(np.log(100.0) + 2.0, abs=1e-14)
    assert mms.eval_mms(-1.0, 1e-2, "base10") == pytest.approx(4.0, abs=1e-14)
    with pytest.raises(ValueError, match="log base"):
        mms.eval_mms(0.0, 1e-2, "base2")


@pytest.mark.parametrize("bad", [0.0, -1e-3])
def test_nonpositive_viscosity_rejected(bad):
    with pytest.raises(ValueError):
        mms.eval_mms(0.0, bad)


def test_array_broadcasting():
    x = np.linspace(-1, 1, 7)
    out = mms.eval_mms(x, 1e-3)
    assert out.shape == x.shape
    assert np.array_equal(out, np.array([mms.eval_mms(v, 1e-3) for v in x]))


@settings(max_examples=100, deadline=None)
@given(nus)
def test_field_stays_above_positive_bound(nu):
    x = np.linspace(-1, 1, 2001)
    u = mms.eval_mms(x, nu)
    assert np.min(u) >= mms.min_bound(nu) - 1e-12
    assert mms.min_bound(nu) > 0
