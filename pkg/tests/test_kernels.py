import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qensemble import families as fm
from qensemble import kernels as kn
from qensemble import oracle as orc
from qensemble import skewengine as se
from qensemble.errors import DomainError, NotSelfDual
from qensemble.qcore import LatticePoint, QContext

components = st.lists(st.floats(min_value=-3, max_value=3), min_size=4, max_size=4)


@given(a=components, b=components)
def test_quaternion_matrix_representation_is_multiplicative(a, b):
    qa, qb = kn.Quaternion(*a), kn.Quaternion(*b)
    prod = qa * qb
    assert np.allclose(prod.matrix(), qa.matrix() @ qb.matrix(), atol=1e-12)
    back = kn.Quaternion.from_matrix(qa.matrix())
    assert np.allclose(back.components(), qa.components(), atol=1e-14)


@given(a=components)
def test_quaternion_dual_and_norm(a):
    q = kn.Quaternion(*a)
    assert q.norm2() == pytest.approx(sum(v * v for v in a), abs=1e-12)
    assert q.dual().dual() == q
    # the matrix of the dual is the symplectic transpose
    Z = np.array([[0, 1], [-1, 0]])
    assert np.allclose(q.dual().matrix(), Z.T @ q.matrix().T @ Z, atol=1e-14)


def _random_self_dual(rng, n):
    C = np.zeros((n, n, 4))
    for i in range(n):
        C[i, i, 0] = rng.normal()
        for j in range(i + 1, n):
            C[i, j] = rng.normal(size=4)
            C[j, i] = C[i, j] * np.array([1, -1, -1, -1])
    return C


@given(seed=st.integers(min_value=0, max_value=2**32 - 1), n=st.integers(min_value=1, max_value=4))
def test_qdet_matches_cycle_expansion(seed, n):
    C = _random_self_dual(np.random.default_rng(seed), n)
    assert kn.qdet(C) == pytest.approx(orc.brute_qdet(C), rel=1e-10, abs=1e-12)


def test_qdet_special_cases():
    C = np.zeros((3, 3, 4))
    C[[0, 1, 2], [0, 1, 2], 0] = [2.0, -3.0, 0.5]
    assert kn.qdet(C) == pytest.approx(-3.0)
    assert kn.qdet(np.zeros((0, 0, 4))) == 1.0
    # a scalar self-dual quaternion matrix is a real symmetric matrix and qdet is det
    rng = np.random.default_rng(1)
    X = rng.normal(size=(4, 4))
    C = np.zeros((4, 4, 4))
    C[..., 0] = X + X.T
    assert kn.qdet(C) == pytest.approx(np.linalg.det(X + X.T), rel=1e-12)
    bad = np.zeros((2, 2, 4))
    bad[0, 1, 1] = 1.0
    bad[1, 0, 1] = 1.0
    with pytest.raises(NotSelfDual):
        kn.qdet(bad)


def test_quaternion_objects_accepted_by_qdet():
    M = [[kn.Quaternion(2.0), kn.Quaternion(0.5, 1.0, 0.0, 0.0)],
         [kn.Quaternion(0.5, -1.0, 0.0, 0.0), kn.Quaternion(3.0)]]
    # 2 * 3 - (q q^dual) with |q|^2 = 1.25
    assert kn.qdet(M) == pytest.approx(6.0 - 1.25)


def test_christoffel_darboux_reproduces(family_case):
    fam, ctx = family_case
    lat = fm.build_lattice(fam, ctx)
    Sm = kn.cd_matrix(fam, 4, ctx)
    meas = lat.w * lat.rho
    assert np.allclose((Sm * meas) @ Sm, Sm, atol=1e-9 * np.max(np.abs(Sm)))
    assert np.trace(Sm * meas) == pytest.approx(4.0)
    x, y = lat.point(3), lat.point(6)
    assert kn.cd_kernel(fam, 4, x, y, ctx) == Sm[3, 6]


def test_skew_kernel_reproducing(family_case):
    fam, ctx = family_case
    # degree-6 polynomials at q = 0.3 lose a few digits to cancellation
    for n in (1, 2, 3):
        assert kn.reproducing_residual(fam, n, ctx) < 1e-7


def test_even_kernel_tables(family_case):
    fam, ctx = family_case
    t = kn.even_kernel_set(fam, 2, ctx)
    assert np.allclose(t.K, -t.K.T) and np.allclose(t.I, -t.I.T)
    J_def, scale = kn.j_even_definition(fam, 2, ctx)
    assert np.max(kn.relative_residual(J_def - t.J, scale)) < 1e-8
    assert np.max(kn.relative_residual(J_def - kn.j_even_rank_one(fam, 2, ctx, explicit=True), scale)) < 1e-8


def test_pointwise_kernel_functions(family_case):
    fam, ctx = family_case
    lat = fm.build_lattice(fam, ctx)
    t = kn.even_kernel_set(fam, 2, ctx)
    x, y = lat.point(2), lat.point(5)
    i, j = 2, 5
    assert kn.skew_K(fam, 4, x, y, ctx) == t.K[i, j]
    assert kn.skew_J_even(fam, 4, x, y, ctx) == t.J[i, j]
    assert kn.skew_I_even(fam, 4, x, y, ctx) == t.I[i, j]
    assert kn.skew_J_even_explicit(fam, 4, x, y, ctx) == pytest.approx(t.J[i, j], rel=1e-8, abs=1e-12)
    b = t.block(x, y)
    assert (b.K, b.J_xy, b.J_yx, b.I) == (t.K[i, j], t.J[i, j], t.J[j, i], t.I[i, j])
    p = fm.monic_op(fam, 2, ctx)
    assert kn.s_x_apply(fam, p, y, ctx) == pytest.approx(se.s_x_values(fam, p(lat.x), ctx)[j])


def test_odd_matrix_kernel_identities(family_case):
    fam, ctx = family_case
    for N in (1, 3, 5):
        rep = kn.fodd_identities_check(fam, N, ctx)
        assert rep["passed"], rep


def test_density_normalizations(family_case):
    fam, ctx = family_case
    for N in (2, 3, 4, 5):
        rep = kn.normalization_check(fam, N, ctx)
        assert rep["one_point"] == pytest.approx(N, rel=1e-8)
        assert rep["two_point"] == pytest.approx(N * (N - 1), rel=1e-8)


def test_correlation_routes_agree(family_case):
    fam, ctx = family_case
    lat = fm.build_lattice(fam, ctx)
    pts = [lat.point(i) for i in (1, 4, 6)]
    for N in (3, 4):
        rho = kn.correlation_rho(fam, N, 3, pts, ctx)
        # densities here are O(1) or vanish to rounding
        assert kn.correlation_qdet(fam, N, pts, ctx) == pytest.approx(rho, rel=1e-9, abs=1e-10)
        M = kn.correlation_matrix(fam, N, pts, ctx)
        assert np.array_equal(M, -M.T)
    dens1 = kn.one_point_density(fam, 3, ctx)
    dens2 = kn.two_point_density(fam, 3, ctx)
    assert kn.correlation_rho(fam, 3, 1, pts[:1], ctx) == pytest.approx(dens1[1], rel=1e-12)
    assert kn.correlation_rho(fam, 3, 2, pts[:2], ctx) == pytest.approx(dens2[1, 4], rel=1e-9, abs=1e-14)
    assert np.allclose(dens2, dens2.T, atol=1e-12 * np.max(np.abs(dens2)))


def test_correlation_of_all_particles_is_joint_density(family_case):
    # rho_{N,N} is N! times the normalized joint density; sum against weights gives N!
    fam, ctx = family_case
    lat = fm.build_lattice(fam, ctx)
    dens2 = kn.two_point_density(fam, 2, ctx)
    assert float(lat.w @ dens2 @ lat.w) == pytest.approx(2.0, rel=1e-8)


def test_correlation_argument_checks():
    fam = fm.little_q_jacobi(0.5, 1.5)
    ctx = QContext(0.3)
    pt = LatticePoint(1.0, 2)
    with pytest.raises(DomainError):
        kn.correlation_rho(fam, 2, 3, [pt, pt, pt], ctx)
    with pytest.raises(DomainError):
        kn.correlation_rho(fam, 2, 2, [pt, pt], ctx)
    with pytest.raises(DomainError):
        kn.correlation_rho(fam, 2, 2, [pt], ctx)
    assert kn.correlation_rho(fam, 2, 0, [], ctx) == 1.0


def test_relative_residual_floor():
    scale = np.array([1.0, 1e-12, 0.0])
    res = kn.relative_residual(np.array([1e-9, 1e-9, 1e-9]), scale)
    assert res[0] == pytest.approx(1e-9)
    # entries with a tiny own scale are measured against the floored scale
    assert res[1] == pytest.approx(1e-9 / kn.EDGE_FLOOR)
    assert np.all(np.isfinite(res))


def test_pairs_are_indexed_consistently(family_case):
    fam, ctx = family_case
    lat = fm.build_lattice(fam, ctx)
    t = kn.kernel_set(fam, 3, ctx)
    for i, j in itertools.product((0, 3), repeat=2):
        b = t.block(lat.point(i), lat.point(j))
        assert b.J_yx == t.J[j, i]
