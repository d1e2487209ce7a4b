import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qensemble import families as fm
from qensemble import oracle as orc
from qensemble import skewengine as se
from qensemble.errors import DomainError, MixedEndpoint, NotSkew, OddDimension
from qensemble.qcore import LatticePoint, QContext

CTX = QContext(0.25)
C = (1 + CTX.base) ** 2

points = st.builds(LatticePoint, st.sampled_from([1.0, -0.5]), st.integers(min_value=-4, max_value=8))


@given(x=points, y=points)
def test_s_kernel_is_antisymmetric(x, y):
    assert se.s_kernel(x, y, CTX) == -se.s_kernel(y, x, CTX)


def test_s_kernel_rules():
    # same anchor: only a deeper half point pairs with an integer point
    assert se.s_kernel(LatticePoint(1.0, 3), LatticePoint(1.0, 2), CTX) == C
    assert se.s_kernel(LatticePoint(1.0, 2), LatticePoint(1.0, 3), CTX) == -C
    assert se.s_kernel(LatticePoint(1.0, 1), LatticePoint(1.0, 2), CTX) == 0.0
    assert se.s_kernel(LatticePoint(1.0, 2), LatticePoint(1.0, 4), CTX) == 0.0
    # opposite anchors: integer points only, by sign of the separation
    assert se.s_kernel(LatticePoint(-0.5, 2), LatticePoint(1.0, 4), CTX) == C
    assert se.s_kernel(LatticePoint(-0.5, 1), LatticePoint(1.0, 4), CTX) == 0.0
    with pytest.raises(MixedEndpoint):
        se.s_kernel(LatticePoint(1.0, 0), LatticePoint(2.0, 0), CTX)


def test_F_function():
    assert se.F_function(LatticePoint(1.0, 4), CTX) == 1.5
    assert se.F_function(LatticePoint(1.0, 5), CTX) == 0.0


def test_s_matrix_matches_pointwise(family_case):
    fam, ctx = family_case
    lat = fm.build_lattice(fam, ctx)
    S = se.s_matrix(fam, ctx)
    assert np.array_equal(S, -S.T)
    sel = [i for i in range(lat.size) if abs(lat.k[i]) <= 5]
    for i, j in itertools.product(sel, repeat=2):
        assert S[i, j] == se.s_kernel(lat.point(i), lat.point(j), ctx)


def test_skew_product_routes_and_antisymmetry(family_case):
    fam, ctx = family_case
    lat = fm.build_lattice(fam, ctx)
    S = np.abs(se.s_matrix(fam, ctx))
    d = np.abs(lat.w * lat.omega)
    p = [fm.monic_op(fam, i, ctx) for i in range(4)]
    for a, b in itertools.combinations(p, 2):
        # summed term magnitudes set the absolute scale; some products cancel to rounding level
        scale = float((d * np.abs(a(lat.x))) @ S @ (d * np.abs(b(lat.x))))
        ab = se.skew_product_beta1(fam, a, b, ctx)
        assert se.skew_product_beta1(fam, b, a, ctx) == pytest.approx(-ab, abs=1e-14 * scale)
        assert se.skew_product_nested(fam, a, b, ctx) == pytest.approx(ab, abs=1e-10 * scale)
        assert se.skew_product_symmetric(fam, a, b, ctx) == pytest.approx(ab, abs=1e-10 * scale)


def test_pfaffian_small_cases():
    assert se.pfaffian(np.zeros((0, 0))) == 1.0
    assert se.pfaffian(np.array([[0.0, 2.5], [-2.5, 0.0]])) == 2.5
    A = np.zeros((4, 4))
    A[0, 1], A[0, 2], A[0, 3], A[1, 2], A[1, 3], A[2, 3] = 1, 2, 3, 4, 5, 6
    A = A - A.T
    assert se.pfaffian(A) == pytest.approx(1 * 6 - 2 * 5 + 3 * 4)
    with pytest.raises(OddDimension):
        se.pfaffian(np.zeros((3, 3)))
    with pytest.raises(NotSkew):
        se.pfaffian(np.ones((2, 2)))


skew_seeds = arrays(np.float64, (8, 8), elements=st.floats(min_value=-3, max_value=3))


@given(X=skew_seeds, n=st.sampled_from([2, 4, 6, 8]))
def test_pfaffian_squared_is_determinant(X, n):
    A = (X - X.T)[:n, :n]
    pf = se.pfaffian(A)
    det = float(np.linalg.det(A))
    assert pf * pf == pytest.approx(det, rel=1e-8, abs=1e-8 * max(1.0, np.max(np.abs(A))) ** n)


@given(X=skew_seeds, B=arrays(np.float64, (6, 6), elements=st.floats(min_value=-2, max_value=2)))
def test_pfaffian_congruence(X, B):
    A = (X - X.T)[:6, :6]
    M = B.T @ A @ B
    lhs = se.pfaffian(0.5 * (M - M.T))
    rhs = float(np.linalg.det(B)) * se.pfaffian(A)
    scale = max(1.0, np.max(np.abs(A))) ** 3 * max(1.0, np.max(np.abs(B))) ** 6
    assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-9 * scale)


def test_pfaffian_matches_matching_expansion():
    rng = np.random.default_rng(3)
    for n in (2, 4, 6, 8):
        X = rng.normal(size=(n, n))
        A = X - X.T
        assert se.pfaffian(A) == pytest.approx(orc.brute_pfaffian(A), rel=1e-12)


def test_moment_matrix_and_tau(family_case):
    fam, ctx = family_case
    mm = se.moment_matrix(fam, 6, ctx)
    assert np.array_equal(mm.m, -mm.m.T)
    assert se.tau(fam, 0, ctx) == 1.0
    assert se.tau(fam, 4, ctx) == pytest.approx(se.partition(fam, 4, ctx), rel=1e-9)
    with pytest.raises(OddDimension):
        se.tau(fam, 3, ctx)
    with pytest.raises(DomainError):
        se.moment_matrix(fam, 13, ctx)


def test_sop_numeric_vs_closed(family_case):
    fam, ctx = family_case
    num = se.sop_numeric(fam, 8, ctx)
    clo = se.sop_closed(fam, 8, ctx)
    assert len(num) == len(clo) == 8
    assert se.sop_discrepancy(num, clo) < 1e-9
    assert np.allclose(num.u, clo.u, rtol=1e-9)
    assert clo.polys[0].coeffs == (1.0,)
    for i, p in enumerate(clo.polys):
        assert p.deg == i and p.monic


def test_sop_skew_orthogonality(family_case):
    fam, ctx = family_case
    clo = se.sop_closed(fam, 6, ctx)
    for i, j in itertools.product(range(6), repeat=2):
        val = se.skew_product_beta1(fam, clo.polys[i], clo.polys[j], ctx, check=False)
        want = 0.0
        if i % 2 == 0 and j == i + 1:
            want = clo.u[i // 2]
        elif j % 2 == 0 and i == j + 1:
            want = -clo.u[j // 2]
        assert val == pytest.approx(want, abs=1e-9 * np.sqrt(abs(clo.u[i // 2] * clo.u[j // 2])))


def test_normalizations_are_inverse_gammas(family_case):
    fam, ctx = family_case
    clo = se.sop_closed(fam, 8, ctx)
    for m, u in enumerate(clo.u):
        assert u == pytest.approx(1.0 / fm.gamma_closed(fam, 2 * m, ctx))


def test_gauges(family_case):
    fam, ctx = family_case
    p_form = se.sop_closed(fam, 6, ctx, gauge="p")
    mono = se.monomial_gauge(p_form)
    for m in range(3):
        assert mono.polys[2 * m + 1].array(2 * m + 2)[2 * m] == 0.0
    back = se.p_gauge(mono, fam, ctx)
    assert se.sop_discrepancy(back, p_form) < 1e-10
    with pytest.raises(DomainError):
        se.sop_closed(fam, 6, ctx, gauge="other")


def test_odd_sop_coefficient_is_gamma_ratio(family_case):
    fam, ctx = family_case
    for n in range(1, 4):
        ratio = fm.gamma_closed(fam, 2 * n - 1, ctx) / fm.gamma_closed(fam, 2 * n, ctx)
        assert se.sop_coefficient_closed(fam, n, ctx) == pytest.approx(ratio, rel=1e-10)


def test_orthogonal_polynomials_recovered_from_sops(family_case):
    fam, ctx = family_case
    ops = se.op_from_sop(fam, 8, ctx)
    for i, p in enumerate(ops):
        ref = fm.monic_op(fam, i, ctx).array(i + 1)
        assert np.allclose(p.array(i + 1), ref, rtol=1e-9, atol=1e-12 * np.max(np.abs(ref)))


def test_partition_routes(family_case):
    fam, ctx = family_case
    for n in range(4):
        assert se.partition_explicit(fam, n, ctx) == pytest.approx(se.partition_product_u(fam, n, ctx), rel=1e-10)
    assert se.partition(fam, 0, ctx) == 1.0
    for N in (1, 3, 5):
        bordered = se.pfaffian(se.moment_matrix(fam, N, ctx).bordered(N))
        assert se.partition(fam, N, ctx) == pytest.approx(bordered, rel=1e-9)
    with pytest.raises(OddDimension):
        se.partition_even_closed(fam, 3, ctx)
    with pytest.raises(DomainError):
        se.partition_odd(fam, 2, ctx)


def test_beta_products(family_case):
    fam, ctx = family_case
    direct = se.beta_values(fam, 5, ctx)
    for l in range(3):
        assert direct[2 * l] == pytest.approx(se.beta_product(fam, l, ctx), rel=1e-10)
        assert se.beta_coeff(fam, 2 * l, ctx) == pytest.approx(direct[2 * l])


@given(al=st.floats(min_value=-0.9, max_value=2.0), be=st.floats(min_value=-0.9, max_value=2.0),
       q=st.floats(min_value=0.1, max_value=0.6))
def test_selberg_evaluation_matches_products(al, be, q):
    ctx = QContext(q)
    fam = fm.little_q_jacobi(al, be)
    for N in (2, 4):
        assert se.aomoto_partition(al, be, N, ctx) == pytest.approx(se.partition(fam, N, ctx), rel=1e-9)


def test_laguerre_limit():
    rep = se.laguerre_limit_check(0.5, 1)
    assert rep["target"] == -5.0
    assert rep["relative_error"] < 0.02
    assert rep["coefficient"] == pytest.approx(rep["coefficient_gamma_ratio"], rel=1e-9)
    # farther from q = 1 the agreement is worse
    assert se.laguerre_limit_check(0.5, 1, q=0.9)["relative_error"] > rep["relative_error"]


def test_closed_forms_at_alpha_plus_beta_minus_one():
    # individual products in the closed forms vanish here; the combined values stay finite
    ctx = QContext(0.5, trunc_depth=4096)
    fam = fm.little_q_jacobi(-0.5, -0.5)
    for N in (2, 4):
        assert se.partition(fam, N, ctx) == pytest.approx(se.aomoto_partition(-0.5, -0.5, N, ctx), rel=1e-10)
    for n in range(3):
        assert fm.norm_closed(fam, n, ctx) == pytest.approx(fm.norm_numeric(fam, n, ctx), rel=1e-10)
        assert fm.gamma_coeff(fam, n, ctx) == pytest.approx(fm.gamma_closed(fam, n, ctx))
