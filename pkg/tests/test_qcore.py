import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qensemble.errors import DivisionByVanishingProduct, DomainError, NonConvergent, PoleError, ZeroArgument
from qensemble.qcore import (
    LatticePoint,
    QContext,
    jackson_integral,
    jackson_integral_bilateral,
    jackson_integral_two_sided,
    q_bracket,
    q_difference,
    q_gamma,
    q_poch_finite,
    q_poch_general,
    q_poch_infinite,
)

# q near 1 needs more than the default 256 factors; that case has its own test
qs = st.floats(min_value=0.05, max_value=0.8)


def test_context_validation():
    with pytest.raises(DomainError):
        QContext(1.0)
    with pytest.raises(DomainError):
        QContext(0.5, trunc_depth=4)
    with pytest.raises(DomainError):
        QContext(0.5, tail_tol=0.0)
    assert QContext(0.25).base == 0.5


def test_context_from_env(monkeypatch):
    monkeypatch.setenv("QENSEMBLE_TAIL_TOL", "1e-12")
    ctx, env = QContext.from_env(0.3, cmp_tol=1e-9)
    assert env == {"tail_tol": 1e-12}
    assert ctx.tail_tol == 1e-12 and ctx.cmp_tol == 1e-9
    # explicit arguments beat the environment
    ctx, _ = QContext.from_env(0.3, tail_tol=1e-13)
    assert ctx.tail_tol == 1e-13


def test_lattice_point_value_and_parity():
    pt = LatticePoint(-0.2, 3)
    assert pt.value(0.25) == pytest.approx(-0.2 * 0.125)
    assert pt.parity == "half" and not pt.is_integer
    assert LatticePoint(1.0, -2).is_integer


def test_bracket_and_finite_pochhammer():
    assert q_bracket(3, 0.5) == pytest.approx(1 + 0.5 + 0.25)
    assert q_poch_finite(0.3, 0.5, 0) == 1.0
    assert q_poch_finite(0.3, 0.5, 2) == pytest.approx((1 - 0.3) * (1 - 0.15))
    with pytest.raises(DomainError):
        q_poch_finite(0.3, 0.5, -1)


def test_euler_pentagonal_identity():
    q = 0.37
    ctx = QContext(q)
    pent = sum((-1) ** k * q ** (k * (3 * k - 1) / 2) for k in range(-40, 41))
    assert q_poch_infinite(q, ctx) == pytest.approx(pent, rel=1e-13)


def test_q_binomial_theorem():
    # sum_n (a;q)_n / (q;q)_n z^n = (az;q)_inf / (z;q)_inf
    q, a, z = 0.4, 0.7, 0.3
    ctx = QContext(q)
    series = sum(q_poch_finite(a, q, n) / q_poch_finite(q, q, n) * z**n for n in range(200))
    assert series == pytest.approx(q_poch_infinite(a * z, ctx) / q_poch_infinite(z, ctx), rel=1e-12)


@given(q=qs, a=st.floats(min_value=-2.0, max_value=0.9), n=st.integers(min_value=0, max_value=12))
def test_general_pochhammer_matches_finite(q, a, n):
    ctx = QContext(q)
    assert q_poch_general(a, float(n), ctx) == pytest.approx(q_poch_finite(a, q, n), rel=1e-11, abs=1e-14)


@given(q=qs, a=st.floats(min_value=-1.0, max_value=0.5), nu=st.floats(min_value=0.1, max_value=4.0),
       mu=st.floats(min_value=0.1, max_value=4.0))
def test_general_pochhammer_splits(q, a, nu, mu):
    ctx = QContext(q)
    lhs = q_poch_general(a, nu + mu, ctx)
    rhs = q_poch_general(a, nu, ctx) * q_poch_general(a * q**nu, mu, ctx)
    assert lhs == pytest.approx(rhs, rel=1e-11)


def test_general_pochhammer_vanishing_denominator():
    ctx = QContext(0.5)
    # denominator (a q^nu; q)_inf with a q^nu = 1
    with pytest.raises(DivisionByVanishingProduct):
        q_poch_general(0.25, -2.0, ctx)


def test_infinite_pochhammer_depth_cap():
    ctx = QContext(0.999, trunc_depth=16)
    with pytest.raises(NonConvergent):
        q_poch_infinite(0.5, ctx)


@given(q=qs, x=st.floats(min_value=0.2, max_value=5.0))
def test_q_gamma_recursion(q, x):
    ctx = QContext(q)
    assert q_gamma(x + 1, ctx) == pytest.approx(q_bracket(x, q) * q_gamma(x, ctx), rel=1e-11)


def test_q_gamma_values_and_poles():
    ctx = QContext(0.3)
    assert q_gamma(1.0, ctx) == pytest.approx(1.0)
    assert q_gamma(4.0, ctx) == pytest.approx(q_bracket(1, 0.3) * q_bracket(2, 0.3) * q_bracket(3, 0.3))
    with pytest.raises(PoleError):
        q_gamma(-2.0, ctx)


def test_jackson_integral_monomials():
    q = 0.45
    ctx = QContext(q)
    for m in range(5):
        got = jackson_integral(lambda x, m=m: x**m, 1.0, q, ctx)
        assert got == pytest.approx((1 - q) / (1 - q ** (m + 1)), rel=1e-13)


def test_jackson_integral_q_beta():
    # int_0^1 x^(a-1) (qx; q)_inf / (q^b x; q)_inf d_q x = Gamma_q(a) Gamma_q(b) / Gamma_q(a + b)
    q, a, b = 0.3, 1.7, 2.4
    ctx = QContext(q)

    def f(x):
        return x ** (a - 1) * q_poch_infinite(q * x, ctx) / q_poch_infinite(q**b * x, ctx)

    want = q_gamma(a, ctx) * q_gamma(b, ctx) / q_gamma(a + b, ctx)
    assert jackson_integral(f, 1.0, q, ctx) == pytest.approx(want, rel=1e-12)


@given(q=qs)
def test_bilateral_integral_scale_invariance(q):
    ctx = QContext(q)

    def f(x):
        return x**1.5 / (1 + x) ** 4

    whole = jackson_integral_bilateral(f, q, ctx)
    scaled = jackson_integral_bilateral(lambda x: f(q * x), q, ctx)
    assert scaled == pytest.approx(whole / q, rel=1e-11)


def test_two_sided_integral_odd_and_even():
    q = 0.5
    ctx = QContext(q)
    assert jackson_integral_two_sided(lambda x: x, -1.0, 1.0, q, ctx) == pytest.approx(0.0, abs=1e-15)
    even = jackson_integral_two_sided(lambda x: x**2, -1.0, 1.0, q, ctx)
    assert even == pytest.approx(2 * (1 - q) / (1 - q**3), rel=1e-13)
    with pytest.raises(DomainError):
        jackson_integral_two_sided(lambda x: x, 1.0, 2.0, q, ctx)


def test_q_difference_of_monomial():
    base = 0.6
    assert q_difference(lambda x: x**3, 2.0, base) == pytest.approx(q_bracket(3, base) * 4.0)
    with pytest.raises(ZeroArgument):
        q_difference(lambda x: x, 0.0, base)


def test_jackson_sum_of_divergent_integrand():
    ctx = QContext(0.5)
    with pytest.raises(NonConvergent):
        jackson_integral_bilateral(lambda x: np.ones_like(x), 0.5, ctx)


def test_jackson_integral_is_linear():
    ctx = QContext(0.4)
    a = jackson_integral(np.sin, 1.0, 0.4, ctx)
    b = jackson_integral(np.cos, 1.0, 0.4, ctx)
    c = jackson_integral(lambda x: 2 * np.sin(x) - 3 * np.cos(x), 1.0, 0.4, ctx)
    assert c == pytest.approx(2 * a - 3 * b, rel=1e-13)
    assert math.isfinite(c)
