import numpy as np
import pytest

from qensemble import families as fm
from qensemble import kernels as kn
from qensemble import oracle as orc
from qensemble import skewengine as se
from qensemble.errors import DomainError, NotSelfDual, OddDimension, TermBudgetExceeded
from qensemble.qcore import LatticePoint, QContext
from qensemble.suites import sample_points


def test_config_validation():
    with pytest.raises(DomainError):
        orc.OracleConfig(max_particles=5)
    with pytest.raises(DomainError):
        orc.OracleConfig(depth=0)
    with pytest.raises(DomainError):
        orc.OracleConfig(pool_depth=2)
    assert orc.OracleConfig().depth_for(3) == orc.DEFAULT_DEPTH[3]
    assert orc.OracleConfig(depth=17).depth_for(4) == 17


def test_direct_omega_matches_lattice(family_case):
    fam, ctx = family_case
    lat = fm.build_lattice(fam, ctx)
    for e in orc.oracle_anchors(fam, ctx.q):
        on = lat.branch == lat.anchors.index(e)
        ks = lat.k[on][:30]
        got = orc.oracle_omega(fam, e, ks, ctx.q)
        assert np.allclose(got, lat.omega[on][:30], rtol=1e-10, atol=0)


def test_brute_partition_matches_closed_forms(family_case):
    fam, ctx = family_case
    cfg = orc.OracleConfig()
    for N in (1, 2, 3):
        assert orc.brute_partition(fam, N, cfg, ctx) == pytest.approx(se.partition(fam, N, ctx), rel=1e-8)


def test_brute_partition_limits():
    fam = fm.little_q_jacobi(0.5, 1.5)
    ctx = QContext(0.3)
    with pytest.raises(DomainError):
        orc.brute_partition(fam, 5, orc.OracleConfig(), ctx)
    with pytest.raises(TermBudgetExceeded):
        orc.brute_partition(fam, 4, orc.OracleConfig(depth=400), ctx)


def test_brute_pfaffian():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(6, 6))
    A = X - X.T
    assert orc.brute_pfaffian(A) ** 2 == pytest.approx(np.linalg.det(A), rel=1e-10)
    assert orc.brute_pfaffian(np.zeros((0, 0))) == 1.0
    with pytest.raises(OddDimension):
        orc.brute_pfaffian(np.zeros((3, 3)))
    with pytest.raises(DomainError):
        orc.brute_pfaffian(np.ones((2, 2)))
    with pytest.raises(DomainError):
        orc.brute_pfaffian(np.zeros((12, 12)))


def test_brute_qdet_checks_input():
    with pytest.raises(DomainError):
        orc.brute_qdet(np.zeros((5, 5, 4)))
    with pytest.raises(DomainError):
        orc.brute_qdet(np.zeros((2, 3, 4)))
    bad = np.zeros((2, 2, 4))
    bad[0, 1, 2] = 1.0
    bad[1, 0, 2] = 1.0
    with pytest.raises(NotSelfDual):
        orc.brute_qdet(bad)
    # a diagonal scalar matrix has the product of its entries as determinant
    C = np.zeros((3, 3, 4))
    C[[0, 1, 2], [0, 1, 2], 0] = [2.0, 3.0, -1.0]
    assert orc.brute_qdet(C) == pytest.approx(-6.0)


def test_one_point_density_integrates_to_particle_number(family_case):
    fam, ctx = family_case
    cfg = orc.OracleConfig()
    for N in (2, 3):
        assert orc.brute_one_point_integral(fam, N, cfg, ctx) == pytest.approx(N, rel=1e-8)


def test_brute_correlation_matches_engine(family_case):
    fam, ctx = family_case
    cfg = orc.OracleConfig()
    pts = sample_points(fam, ctx.q, 3)
    for N, k in ((2, 1), (3, 1), (3, 2)):
        want = kn.correlation_rho(fam, N, k, pts[:k], ctx)
        got = orc.brute_correlation(fam, N, k, pts[:k], cfg, ctx)
        assert got == pytest.approx(want, rel=1e-8, abs=1e-12)


def test_full_correlation_is_scaled_density():
    fam = fm.little_q_jacobi(0.5, 1.5)
    ctx = QContext(0.3)
    cfg = orc.OracleConfig()
    pts = [LatticePoint(1.0, 0), LatticePoint(1.0, 2)]
    tau = orc.brute_partition(fam, 2, cfg, ctx)
    total = orc.brute_density_sum(fam, 2, pts, cfg, ctx)
    # with every particle pinned nothing is summed and the result is the density over tau
    assert orc.brute_correlation(fam, 2, 2, pts, cfg, ctx, tau=tau) == total / tau
    assert total / tau == pytest.approx(kn.correlation_rho(fam, 2, 2, pts, ctx), rel=1e-8)


def test_brute_correlation_argument_checks():
    fam = fm.little_q_jacobi(0.5, 1.5)
    ctx = QContext(0.3)
    cfg = orc.OracleConfig()
    pt = LatticePoint(1.0, 0)
    with pytest.raises(DomainError):
        orc.brute_correlation(fam, 2, 3, [pt, pt, pt], cfg, ctx)
    with pytest.raises(DomainError):
        orc.brute_correlation(fam, 2, 2, [pt, pt], cfg, ctx)
