"""Verification suites run by ``qensemble verify``.

Each check returns a record with a residual, its tolerance and a pass flag.
Exceptions raised inside a check (route mismatches, non-convergence) are
recorded as failures with the error message.
"""

from __future__ import annotations

import math

import numpy as np

from . import families as fm
from . import kernels as kn
from . import oracle as orc
from . import skewengine as se
from .qcore import LatticePoint, QContext, jackson_integral, q_bracket, q_gamma, q_poch_infinite

STANDARD_FAMILIES = (
    (fm.little_q_jacobi(0.5, 1.5), 0.3),
    (fm.little_q_jacobi(0.0, 0.0), 0.25),
    (fm.al_salam_carlitz(-1.0), 0.25),
    (fm.q_laguerre(0.5), 0.25),
    (fm.big_q_jacobi(0.3, 0.2, -0.4), 0.25),
)

SUITES = ("qcore", "families", "operators", "pfaffian", "sop", "partition", "kernels", "correlation",
          "quaternion", "limit")


def _record(suite, name, residual, tol, detail=None):
    residual = float(residual)
    finite = bool(np.isfinite(residual))
    # a check that raised has no residual; null keeps the JSON payload standard
    return {"suite": suite, "name": name, "residual": residual if finite else None, "tol": tol,
            "passed": finite and residual <= tol, "detail": detail}


def _rel(a, b, scale=None):
    scale = max(abs(a), abs(b)) if scale is None else scale
    return abs(a - b) / scale if scale > 0 else abs(a - b)


def _label(fam):
    return f"{fam.tag}{tuple(fam.params)}"


def _guard(suite, name, tol, fn):
    try:
        return fn()
    except Exception as exc:  # every failure mode becomes a failed record
        return _record(suite, name, math.inf, tol, f"{type(exc).__name__}: {exc}")


# --------------------------------------------------------------- suites


def suite_qcore(fams, overrides):
    ctx = QContext(0.5).with_overrides(**overrides)
    out = []

    def euler():
        q = ctx.q
        pent = 0.0
        for k in range(-60, 61):
            pent += (-1) ** k * q ** (k * (3 * k - 1) / 2)
        return _record("qcore", "euler function vs pentagonal series", _rel(q_poch_infinite(q, ctx), pent),
                       ctx.cmp_tol)

    def gamma_rec():
        x = 1.7
        return _record("qcore", "q-gamma recursion", _rel(q_gamma(x + 1, ctx), q_bracket(x, ctx.q) * q_gamma(x, ctx)),
                       ctx.cmp_tol)

    def jackson():
        q = ctx.q
        val = jackson_integral(lambda x: x**3, 1.0, q, ctx)
        return _record("qcore", "Jackson integral of x^3", _rel(val, (1 - q) / (1 - q**4)), ctx.cmp_tol)

    for name, fn in (("euler", euler), ("gamma", gamma_rec), ("jackson", jackson)):
        out.append(_guard("qcore", name, ctx.cmp_tol, fn))
    return out


def suite_families(fams, overrides):
    out = []
    for fam, q in fams:
        ctx = QContext(q).with_overrides(**overrides)
        lab = _label(fam)

        def norms():
            res = max(_rel(fm.norm_numeric(fam, n, ctx), fm.norm_closed(fam, n, ctx)) for n in range(5))
            return _record("families", f"norms h_n closed vs numeric {lab}", res, ctx.cmp_tol)

        def gammas():
            res = max(_rel(fm.c_numeric(fam, j, ctx) / ((1 + ctx.base) ** 2 * fm.norm_numeric(fam, j, ctx)
                                                         * fm.norm_numeric(fam, j + 1, ctx)),
                           fm.gamma_closed(fam, j, ctx)) for j in range(4))
            return _record("families", f"gamma_j closed vs numeric {lab}", res, ctx.cmp_tol)

        def pearson():
            lat = fm.build_lattice(fam, ctx)
            x = lat.x[(lat.k < 12) & (lat.k > -12)]
            x = x[np.abs(fm.pearson_pair(fam, ctx).f(ctx.base * x)) > 1e-12]
            return _record("families", f"Pearson relation on lattice points {lab}",
                           float(np.max(np.abs(fm.pearson_residual(fam, x, ctx)))), ctx.cmp_tol)

        for name, fn in (("norms", norms), ("gamma", gammas), ("pearson", pearson)):
            out.append(_guard("families", f"{name} {lab}", ctx.cmp_tol, fn))
        if fam.tag == fm.LITTLE_Q_JACOBI:
            def series():
                al, be = fam.params
                a = fm.little_q_jacobi_series(al, be, 3, ctx).array(4)
                b = fm.monic_op(fam, 3, ctx).array(4)
                return _record("families", f"series formula vs monic_op(3) {lab}",
                               float(np.max(np.abs(a - b)) / np.max(np.abs(b))), ctx.cmp_tol)
            out.append(_guard("families", f"series {lab}", ctx.cmp_tol, series))
    return out


def suite_operators(fams, overrides):
    out = []
    for fam, q in fams:
        ctx = QContext(q).with_overrides(**overrides)
        lab = _label(fam)

        def ops():
            lat = fm.build_lattice(fam, ctx)
            w1 = w2 = 0.0
            for i in range(5):
                for j in range(5):
                    phi = fm.PolySeries.from_array(np.eye(5)[i])
                    psi = fm.PolySeries.from_array(np.eye(5)[j])
                    terms = lat.w * lat.rho * phi(lat.x) * fm.b_q_values(fam, psi(lat.x), ctx)
                    lhs = float(np.sum(terms))
                    rhs = -se.skew_product_beta1(fam, phi, psi, ctx)
                    w1 = max(w1, abs(lhs - rhs) / max(float(np.sum(np.abs(terms))), 1e-300))
                    aterms = lat.w * lat.rho * phi(lat.x) * fm.apply_A_q(fam, psi, ctx)(lat.x)
                    w2 = max(w2, abs(float(np.sum(aterms)) - se.skew_product_beta4(fam, phi, psi, ctx))
                             / max(float(np.sum(np.abs(aterms))), 1e-300))
            return w1, w2

        try:
            w1, w2 = ops()
            out.append(_record("operators", f"<phi, B psi>_2 = -<phi, psi>_1 {lab}", w1, ctx.cmp_tol))
            out.append(_record("operators", f"<phi, A psi>_2 = <phi, psi>_4 {lab}", w2, ctx.cmp_tol))
        except Exception as exc:
            out.append(_record("operators", f"operator identities {lab}", math.inf, ctx.cmp_tol,
                               f"{type(exc).__name__}: {exc}"))
    return out


def suite_pfaffian(fams, overrides, seed=20240611):
    rng = np.random.default_rng(seed)
    sq = cong = brute = 0.0
    for _ in range(50):
        n = 2 * int(rng.integers(1, 6))
        X = rng.normal(size=(n, n))
        A = X - X.T
        pf = se.pfaffian(A)
        det = float(np.linalg.det(A))
        sq = max(sq, _rel(pf * pf, det))
        B = rng.normal(size=(n, n))
        cong = max(cong, _rel(se.pfaffian(B.T @ A @ B), float(np.linalg.det(B)) * pf))
        if n <= 8:
            brute = max(brute, _rel(pf, orc.brute_pfaffian(A)))
    return [_record("pfaffian", "Pf(A)^2 = det(A)", sq, 1e-9),
            _record("pfaffian", "Pf(B^T A B) = det(B) Pf(A)", cong, 1e-9),
            _record("pfaffian", "elimination vs matching expansion", brute, 1e-10)]


def suite_sop(fams, overrides):
    out = []
    for fam, q in fams:
        ctx = QContext(q).with_overrides(**overrides)
        lab = _label(fam)

        def coeffs():
            num = se.sop_numeric(fam, 8, ctx)
            clo = se.sop_closed(fam, 8, ctx)
            return _record("sop", f"numeric vs closed SOP coefficients {lab}", se.sop_discrepancy(num, clo),
                           ctx.cmp_tol)

        def norms():
            num = se.sop_numeric(fam, 8, ctx)
            res = max(_rel(u, 1.0 / fm.gamma_closed(fam, 2 * m, ctx)) for m, u in enumerate(num.u))
            return _record("sop", f"u_m = 1/gamma_2m {lab}", res, ctx.cmp_tol)

        def skew_orth():
            clo = se.sop_closed(fam, 8, ctx)
            worst = 0.0
            for i in range(8):
                for j in range(8):
                    val = se.skew_product_beta1(fam, clo.polys[i], clo.polys[j], ctx, check=False)
                    want = 0.0
                    if i % 2 == 0 and j == i + 1:
                        want = clo.u[i // 2]
                    elif j % 2 == 0 and i == j + 1:
                        want = -clo.u[j // 2]
                    worst = max(worst, abs(val - want) / math.sqrt(abs(clo.u[i // 2] * clo.u[j // 2])))
            return _record("sop", f"skew orthogonality {lab}", worst, ctx.cmp_tol)

        def roundtrip():
            ops = se.op_from_sop(fam, 8, ctx)
            res = 0.0
            for i, p in enumerate(ops):
                ref = fm.monic_op(fam, i, ctx).array(8)
                res = max(res, float(np.max(np.abs(p.array(8) - ref)) / np.max(np.abs(ref))))
            return _record("sop", f"orthogonal polynomials from SOPs {lab}", res, ctx.cmp_tol)

        for name, fn in (("coeffs", coeffs), ("u", norms), ("orth", skew_orth), ("roundtrip", roundtrip)):
            out.append(_guard("sop", f"{name} {lab}", ctx.cmp_tol, fn))
    return out


def suite_partition(fams, overrides):
    out = []
    cfg = orc.OracleConfig()
    for fam, q in fams:
        ctx = QContext(q).with_overrides(**overrides)
        lab = _label(fam)
        for N in (1, 2, 3, 4):
            def check(N=N):
                closed = se.partition(fam, N, ctx)
                brute = orc.brute_partition(fam, N, cfg, ctx)
                return _record("partition", f"tau_{N} closed vs nested oracle {lab}", _rel(closed, brute), 1e-8)
            out.append(_guard("partition", f"tau_{N} {lab}", 1e-8, check))
        if fam.tag == fm.LITTLE_Q_JACOBI:
            def aomoto():
                al, be = fam.params
                res = max(_rel(se.aomoto_partition(al, be, N, ctx), se.partition(fam, N, ctx)) for N in (2, 4))
                return _record("partition", f"q-Selberg evaluation {lab}", res, ctx.cmp_tol)
            out.append(_guard("partition", f"aomoto {lab}", ctx.cmp_tol, aomoto))
        if fam.tag != fm.Q_LAGUERRE:
            def moments():
                m = se.moment_matrix(fam, 4, ctx).m
                brute = orc.brute_partition(fam, 4, cfg, ctx)
                return _record("partition", f"Pf(4x4 bimoments) vs 4-particle oracle {lab}",
                               _rel(se.pfaffian(m), brute), 1e-7)
            out.append(_guard("partition", f"bimoments {lab}", 1e-7, moments))
    return out


def suite_kernels(fams, overrides):
    out = []
    for fam, q in fams:
        ctx = QContext(q).with_overrides(**overrides)
        lab = _label(fam)
        for n in (1, 2):
            def rank_one(n=n):
                J_def, scale = kn.j_even_definition(fam, n, ctx)
                res = kn.relative_residual(J_def - kn.j_even_rank_one(fam, n, ctx), scale)
                res_x = kn.relative_residual(J_def - kn.j_even_rank_one(fam, n, ctx, explicit=True), scale)
                return _record("kernels", f"J_{2 * n} definition vs rank-one and explicit {lab}",
                               max(float(np.max(res)), float(np.max(res_x))), 10 * ctx.cmp_tol)
            out.append(_guard("kernels", f"rank-one n={n} {lab}", 10 * ctx.cmp_tol, rank_one))

            def repro(n=n):
                return _record("kernels", f"reproducing K_{2 * n} {lab}", kn.reproducing_residual(fam, n, ctx),
                               10 * ctx.cmp_tol)
            out.append(_guard("kernels", f"reproducing n={n} {lab}", 10 * ctx.cmp_tol, repro))

        def fodd():
            rep = kn.fodd_identities_check(fam, 3, ctx)
            return _record("kernels", f"odd matrix-kernel identities N=3 {lab}",
                           max(max(rep["semigroup_residuals"]), rep["trace_residual"]), 1e-6)
        out.append(_guard("kernels", f"fodd {lab}", 1e-6, fodd))

        def norm():
            worst = 0.0
            for N in (2, 3):
                rep = kn.normalization_check(fam, N, ctx)
                worst = max(worst, abs(rep["one_point"] - N) / N, abs(rep["two_point"] - N * (N - 1)) / (N * (N - 1)))
            return _record("kernels", f"density normalizations N=2,3 {lab}", worst, 1e-5)
        out.append(_guard("kernels", f"normalization {lab}", 1e-5, norm))

        def beta():
            res = max(_rel(se.beta_values(fam, 2 * l + 1, ctx)[2 * l], se.beta_product(fam, l, ctx))
                      for l in range(3))
            return _record("kernels", f"beta_2l product vs direct {lab}", res, ctx.cmp_tol)
        out.append(_guard("kernels", f"beta {lab}", ctx.cmp_tol, beta))
    return out


def sample_points(fam, q: float, count: int):
    """Deterministic lattice points near the anchors, where densities are sizable."""
    anchors = orc.oracle_anchors(fam, q)
    pts = []
    k = 1
    while len(pts) < count:
        for e in anchors:
            pts.append(LatticePoint(e, k))
        k += 1
    return pts[:count]


def suite_correlation(fams, overrides):
    out = []
    cfg = orc.OracleConfig()
    for fam, q in fams:
        ctx = QContext(q).with_overrides(**overrides)
        lab = _label(fam)
        for N, k in ((2, 1), (2, 2), (3, 1), (3, 2), (4, 1)):
            def check(N=N, k=k):
                pts = sample_points(fam, q, 4)
                tau = orc.brute_partition(fam, N, cfg, ctx)
                pairs = []
                for start in range(3):
                    tup = pts[start: start + k]
                    pairs.append((kn.correlation_rho(fam, N, k, tup, ctx),
                                  orc.brute_correlation(fam, N, k, tup, cfg, ctx, tau=tau)))
                # some tuples carry an exact zero density; measure those against the largest one
                floor = 1e-6 * max(abs(b) for _, b in pairs)
                worst = max(abs(a - b) / max(abs(b), floor, 1e-300) for a, b in pairs)
                return _record("correlation", f"rho_{{{N},{k}}} kernel vs oracle {lab}", worst, 1e-6)
            out.append(_guard("correlation", f"rho N={N} k={k} {lab}", 1e-6, check))
    return out


def random_self_dual(rng, n):
    """Random self-dual quaternion matrix as an (n, n, 4) component array."""
    C = np.zeros((n, n, 4))
    for i in range(n):
        C[i, i, 0] = rng.normal()
        for j in range(i + 1, n):
            C[i, j] = rng.normal(size=4)
            C[j, i] = C[i, j] * np.array([1, -1, -1, -1])
    return C


def suite_quaternion(fams, overrides, seed=7):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        C = random_self_dual(rng, int(rng.integers(1, 5)))
        worst = max(worst, _rel(kn.qdet(C), orc.brute_qdet(C)))
    return [_record("quaternion", "qdet Pfaffian route vs cycle expansion", worst, 1e-10)]


def suite_limit(fams, overrides):
    rep = se.laguerre_limit_check(0.5, 1)
    return [_record("limit", "q-Laguerre odd-SOP coefficient near q = 1", rep["relative_error"], 0.02),
            _record("limit", "coefficient product form vs gamma ratio",
                    _rel(rep["coefficient"], rep["coefficient_gamma_ratio"]), 1e-8)]


_SUITE_FUNCS = {
    "qcore": suite_qcore, "families": suite_families, "operators": suite_operators, "pfaffian": suite_pfaffian,
    "sop": suite_sop, "partition": suite_partition, "kernels": suite_kernels, "correlation": suite_correlation,
    "quaternion": suite_quaternion, "limit": suite_limit,
}


def run_suites(names=None, fams=None, overrides=None) -> list:
    """Run the named suites (all by default) and return their records."""
    names = list(SUITES) if not names or names == ["all"] else names
    fams = STANDARD_FAMILIES if fams is None else fams
    overrides = overrides or {}
    records = []
    for name in names:
        if name not in _SUITE_FUNCS:
            raise ValueError(f"unknown suite {name!r}")
        records.extend(_SUITE_FUNCS[name](fams, overrides))
    return records

