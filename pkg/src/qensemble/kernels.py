"""Christoffel-Darboux and skew kernels, quaternion determinants and correlation functions.

Kernels are tabulated once per (family, n, context) as matrices over the
materialized lattice; pointwise functions index into these tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, NotSelfDual, RouteMismatch, VanishingBeta
from .families import (
    WeightFamily,
    build_lattice,
    gamma_closed,
    gamma_coeff,
    lattice_values,
    monic_op,
    norm_numeric,
    rho_over_omega_closed,
)
from .qcore import LatticePoint, QContext
from .skewengine import F_values, pfaffian, s_matrix, s_x_values, sop_closed

# --------------------------------------------------------------- types


@dataclass(frozen=True)
class KernelBlock:
    """The four entries of the 2x2 matrix kernel at (x, y)."""

    K: float
    J_xy: float
    J_yx: float
    I: float


@dataclass(frozen=True)
class Quaternion:
    """a0 + a1 e1 + a2 e2 + a3 e3, represented by a complex 2x2 matrix."""

    a0: complex
    a1: complex = 0.0
    a2: complex = 0.0
    a3: complex = 0.0

    def components(self) -> np.ndarray:
        return np.array([self.a0, self.a1, self.a2, self.a3])

    def matrix(self) -> np.ndarray:
        a0, a1, a2, a3 = self.a0, self.a1, self.a2, self.a3
        return np.array([[a0 + 1j * a1, a2 + 1j * a3], [-a2 + 1j * a3, a0 - 1j * a1]])

    @classmethod
    def from_matrix(cls, m) -> "Quaternion":
        m = np.asarray(m, dtype=complex)
        a0 = (m[0, 0] + m[1, 1]) / 2
        a1 = (m[0, 0] - m[1, 1]) / 2j
        a2 = (m[0, 1] - m[1, 0]) / 2
        a3 = (m[0, 1] + m[1, 0]) / 2j
        return cls(*(_real_if_close(v) for v in (a0, a1, a2, a3)))

    def dual(self) -> "Quaternion":
        return Quaternion(self.a0, -self.a1, -self.a2, -self.a3)

    def scalar(self):
        return self.a0

    def norm2(self):
        """v * dual(v), a scalar quaternion; returns its scalar part."""
        return (self * self.dual()).a0

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return Quaternion.from_matrix(self.matrix() @ other.matrix())
        return Quaternion(*(self.components() * other))

    def __add__(self, other):
        return Quaternion(*(self.components() + other.components()))


def _real_if_close(v):
    return float(v.real) if abs(v.imag) <= 1e-15 * max(abs(v), 1.0) else complex(v)


def _as_components(M) -> np.ndarray:
    """Quaternion matrix as an (N, N, 4) array of components."""
    if isinstance(M, np.ndarray) and M.ndim == 3 and M.shape[2] == 4:
        return M
    rows = [[q.components() if isinstance(q, Quaternion) else np.asarray(q) for q in row] for row in M]
    return np.array(rows)


def quaternion_expand(M) -> np.ndarray:
    """Complex 2N x 2N matrix of an N x N quaternion matrix."""
    C = _as_components(M)
    n = C.shape[0]
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            out[2 * i: 2 * i + 2, 2 * j: 2 * j + 2] = Quaternion(*C[i, j]).matrix()
    return out


def check_self_dual(M, tol: float = 1e-12) -> np.ndarray:
    """Return the component array after checking M[j, i] = dual(M[i, j])."""
    C = _as_components(M)
    if C.ndim != 3 or C.shape[0] != C.shape[1]:
        raise DomainError("quaternion matrix must be square")
    dual_T = np.transpose(C, (1, 0, 2)) * np.array([1, -1, -1, -1])
    scale = max(float(np.max(np.abs(C))), 1e-300) if C.size else 1.0
    if C.size and np.max(np.abs(C - dual_T)) > tol * scale:
        raise NotSelfDual("quaternion matrix is not self-dual")
    return C


def _z_inverse(n: int) -> np.ndarray:
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def qdet(M):
    """Quaternion determinant of a self-dual matrix as Pf(expanded M times Z^{-1})."""
    C = check_self_dual(M)
    n = C.shape[0]
    if n == 0:
        return 1.0
    A = quaternion_expand(C) @ _z_inverse(n)
    A = 0.5 * (A - A.T)
    return _real_if_close(complex(pfaffian(A)))


# ------------------------------------------------------ even kernels


# Entries near the truncation edge lose their tail; they are compared against
# this fraction of the largest term scale instead of their own.
EDGE_FLOOR = 1e-6


def relative_residual(diff, scale) -> np.ndarray:
    """|diff| relative to the term scale, floored at EDGE_FLOOR times its maximum."""
    scale = np.asarray(scale, dtype=float)
    floor = EDGE_FLOOR * float(np.max(scale)) if scale.size else 0.0
    return np.abs(diff) / np.maximum(np.maximum(scale, floor), 1e-300)


def _scale_check(what, a, b, scale, tol):
    res = relative_residual(a - b, scale)
    if np.any(res > tol):
        i = np.unravel_index(int(np.argmax(res)), a.shape)
        raise RouteMismatch(f"{what} at index {tuple(int(v) for v in i)}", float(a[i]), float(b[i]), tol)


def _op_values(fam, ctx, count):
    lat = build_lattice(fam, ctx)
    return np.array([monic_op(fam, l, ctx)(lat.x) for l in range(count)])


@lru_cache(maxsize=64)
def cd_matrix(fam: WeightFamily, m: int, ctx: QContext) -> np.ndarray:
    """S_m(x, y) = sum_{l<m} p_l(x) p_l(y) / h_l over the lattice."""
    lat = build_lattice(fam, ctx)
    if m == 0:
        return np.zeros((lat.size, lat.size))
    P = _op_values(fam, ctx, m)
    h = np.array([norm_numeric(fam, l, ctx) for l in range(m)])
    return (P.T / h) @ P


def _sop_values(fam, n, ctx):
    lat = build_lattice(fam, ctx)
    sops = sop_closed(fam, 2 * n, ctx)
    return np.array([p(lat.x) for p in sops.polys]), np.array(sops.u)


def _s_x_matrix(fam, M, ctx):
    """Apply s_x to the first argument of a lattice kernel matrix."""
    lat = build_lattice(fam, ctx)
    return s_matrix(fam, ctx).T @ ((lat.w * lat.omega)[:, None] * M)


@dataclass(frozen=True, eq=False)
class KernelTables:
    """K, J, I over the lattice for N particles, with the lattice they live on."""

    fam: WeightFamily
    particles: int
    ctx: QContext
    K: np.ndarray
    J: np.ndarray
    I: np.ndarray
    beta: np.ndarray | None = None

    def block(self, x: LatticePoint, y: LatticePoint) -> KernelBlock:
        lat = build_lattice(self.fam, self.ctx)
        i, j = lat.index(x), lat.index(y)
        return KernelBlock(float(self.K[i, j]), float(self.J[i, j]), float(self.J[j, i]), float(self.I[i, j]))


@lru_cache(maxsize=64)
def _skew_K_matrix(fam: WeightFamily, n: int, ctx: QContext) -> np.ndarray:
    lat = build_lattice(fam, ctx)
    K = np.zeros((lat.size, lat.size))
    if n == 0:
        return K
    Q, u = _sop_values(fam, n, ctx)
    for i in range(n):
        K += (np.outer(Q[2 * i], Q[2 * i + 1]) - np.outer(Q[2 * i + 1], Q[2 * i])) / u[i]
    return K


def j_even_definition(fam: WeightFamily, n: int, ctx: QContext) -> tuple[np.ndarray, np.ndarray]:
    """J_{2n} = s_x K_{2n} and the matching scale of absolute term sizes."""
    lat = build_lattice(fam, ctx)
    K = _skew_K_matrix(fam, n, ctx)
    J = _s_x_matrix(fam, K, ctx)
    scale = np.abs(s_matrix(fam, ctx)).T @ (np.abs(lat.w * lat.omega)[:, None] * np.abs(K))
    return J, scale


def j_even_rank_one(fam: WeightFamily, n: int, ctx: QContext, include_correction: bool = True,
                    explicit: bool = False) -> np.ndarray:
    """(rho/omega)(x) S_{2n-1}(x, y) + gamma_{2n-2} (s_x p_{2n-2})(x) p_{2n-1}(y).

    With ``explicit`` the prefactor rho/omega and gamma use the closed forms of
    each family instead of lattice values and numeric gamma.
    """
    lat = build_lattice(fam, ctx)
    if explicit:
        ratio = rho_over_omega_closed(fam, lat.x, ctx)
        gam = gamma_closed(fam, 2 * n - 2, ctx)
    else:
        ratio = lat.rho / lat.omega
        gam = gamma_coeff(fam, 2 * n - 2, ctx)
    J = ratio[:, None] * cd_matrix(fam, 2 * n - 1, ctx)
    if include_correction:
        P = _op_values(fam, ctx, 2 * n)
        J = J + gam * np.outer(s_x_values(fam, P[2 * n - 2], ctx), P[2 * n - 1])
    return J


def _rank_one_scale(fam, n, ctx):
    lat = build_lattice(fam, ctx)
    P = _op_values(fam, ctx, 2 * n)
    h = np.array([norm_numeric(fam, l, ctx) for l in range(2 * n - 1)])
    cd_abs = (np.abs(P[: 2 * n - 1]).T / h) @ np.abs(P[: 2 * n - 1])
    sx_abs = np.abs(s_matrix(fam, ctx)).T @ np.abs(lat.w * lat.omega * P[2 * n - 2])
    gam = abs(gamma_coeff(fam, 2 * n - 2, ctx))
    return np.abs(lat.rho / lat.omega)[:, None] * cd_abs + gam * np.outer(sx_abs, np.abs(P[2 * n - 1]))


@lru_cache(maxsize=64)
def even_kernel_set(fam: WeightFamily, n: int, ctx: QContext) -> KernelTables:
    """K_{2n}, J_{2n}, I_{2n}; J is checked between the definition and rank-one routes."""
    lat = build_lattice(fam, ctx)
    S = s_matrix(fam, ctx)
    K = _skew_K_matrix(fam, n, ctx)
    if n == 0:
        return KernelTables(fam, 0, ctx, K, np.zeros_like(K), np.array(S))
    J_def, scale = j_even_definition(fam, n, ctx)
    J_r1 = j_even_rank_one(fam, n, ctx)
    scale = scale + _rank_one_scale(fam, n, ctx)
    _scale_check(f"J_{2 * n}", J_def, J_r1, scale, 10 * ctx.cmp_tol)
    D = lat.w * lat.omega
    I = S - S.T @ ((D[:, None] * K * D[None, :]) @ S)
    return KernelTables(fam, 2 * n, ctx, K, J_r1, I)


def _even_n(particles):
    if particles % 2 or particles < 0:
        raise DomainError("even kernels need an even particle number 2n >= 0")
    return particles // 2


def cd_kernel(fam: WeightFamily, m: int, x: LatticePoint, y: LatticePoint, ctx: QContext) -> float:
    """Christoffel-Darboux kernel S_m(x, y) = sum_{l<m} p_l(x) p_l(y) / h_l."""
    lat = build_lattice(fam, ctx)
    return float(cd_matrix(fam, m, ctx)[lat.index(x), lat.index(y)])


def skew_K(fam: WeightFamily, particles: int, x: LatticePoint, y: LatticePoint, ctx: QContext) -> float:
    lat = build_lattice(fam, ctx)
    return float(_skew_K_matrix(fam, _even_n(particles), ctx)[lat.index(x), lat.index(y)])


def s_x_apply(fam: WeightFamily, f, x: LatticePoint, ctx: QContext) -> float:
    """(s_x f)(x) = sum_z s(z, x) f(z) omega(z) w(z) for a polynomial, callable or value array."""
    lat = build_lattice(fam, ctx)
    vals = f if isinstance(f, np.ndarray) else lattice_values(f, lat)
    return float(s_x_values(fam, vals, ctx)[lat.index(x)])


def skew_J_even(fam: WeightFamily, particles: int, x: LatticePoint, y: LatticePoint, ctx: QContext) -> float:
    n = _even_n(particles)
    if n < 1:
        raise DomainError("J needs n >= 1")
    lat = build_lattice(fam, ctx)
    return float(even_kernel_set(fam, n, ctx).J[lat.index(x), lat.index(y)])


def skew_J_even_explicit(fam: WeightFamily, particles: int, x: LatticePoint, y: LatticePoint,
                         ctx: QContext) -> float:
    """Rank-one form with the family closed forms for rho/omega and gamma."""
    n = _even_n(particles)
    lat = build_lattice(fam, ctx)
    return float(j_even_rank_one(fam, n, ctx, explicit=True)[lat.index(x), lat.index(y)])


def skew_I_even(fam: WeightFamily, particles: int, x: LatticePoint, y: LatticePoint, ctx: QContext) -> float:
    lat = build_lattice(fam, ctx)
    return float(even_kernel_set(fam, _even_n(particles), ctx).I[lat.index(x), lat.index(y)])


# ------------------------------------------------------- odd kernels


def j_odd_rank_one(fam: WeightFamily, n: int, beta: np.ndarray, ctx: QContext) -> np.ndarray:
    """J^odd as the even rank-one form plus the F column and a two-term correction."""
    Fv = F_values(fam, ctx)
    P = _op_values(fam, ctx, 2 * n + 1)
    J = np.outer(Fv, P[2 * n]) / beta[2 * n]
    if n == 0:
        return J
    J += j_even_rank_one(fam, n, ctx)
    u_last = 1.0 / gamma_closed(fam, 2 * n - 2, ctx)
    sx_even = s_x_values(fam, P[2 * n], ctx)
    sx_odd = s_x_values(fam, P[2 * n - 1], ctx)
    coef = beta[2 * n - 2] / (u_last * beta[2 * n])
    J += coef * (np.outer(sx_odd, P[2 * n]) - np.outer(sx_even, P[2 * n - 1]))
    return J


@lru_cache(maxsize=64)
def _odd_tables(fam: WeightFamily, n: int, ctx: QContext) -> KernelTables:
    lat = build_lattice(fam, ctx)
    S = s_matrix(fam, ctx)
    Fv = F_values(fam, ctx)
    D = lat.w * lat.omega
    sops = sop_closed(fam, 2 * n + 2, ctx)
    Q = np.array([p(lat.x) for p in sops.polys[: 2 * n + 1]])
    u = np.array(sops.u[:n])
    beta = np.array([float(np.sum(Fv * Q[i] * D)) for i in range(2 * n + 1)])
    scale_b = float(np.sum(np.abs(Fv * Q[2 * n] * D)))
    if abs(beta[2 * n]) <= 1e3 * np.finfo(float).eps * scale_b:
        raise VanishingBeta(f"beta_{2 * n} vanishes ({beta[2 * n]!r})")
    Qh = np.array([Q[k] - beta[k] / beta[2 * n] * Q[2 * n] for k in range(2 * n)] + [Q[2 * n]])
    Phi = (S.T @ (D[:, None] * Qh.T)).T
    Phi_abs = (np.abs(S).T @ (np.abs(D)[:, None] * np.abs(Qh.T))).T
    m = lat.size
    K = np.zeros((m, m))
    J = np.outer(Fv, Qh[2 * n]) / beta[2 * n]
    Jscale = np.abs(J)
    I = np.array(S) + (np.outer(Phi[2 * n], Fv) - np.outer(Fv, Phi[2 * n])) / beta[2 * n]
    for k in range(n):
        e, o = 2 * k, 2 * k + 1
        K += (np.outer(Qh[e], Qh[o]) - np.outer(Qh[o], Qh[e])) / u[k]
        J += (np.outer(Phi[e], Qh[o]) - np.outer(Phi[o], Qh[e])) / u[k]
        Jscale += (np.outer(Phi_abs[e], np.abs(Qh[o])) + np.outer(Phi_abs[o], np.abs(Qh[e]))) / abs(u[k])
        I += (np.outer(Phi[o], Phi[e]) - np.outer(Phi[e], Phi[o])) / u[k]
    J_r1 = j_odd_rank_one(fam, n, beta, ctx)
    _scale_check(f"J^odd_{2 * n + 1}", J, J_r1, Jscale, 10 * ctx.cmp_tol)
    return KernelTables(fam, 2 * n + 1, ctx, K, J, I, beta)


def odd_kernel_set(fam: WeightFamily, particles: int, ctx: QContext) -> KernelTables:
    """K^odd, J^odd, I^odd for 2n+1 particles, with J checked against the rank-one-plus-correction form."""
    if particles % 2 == 0 or particles < 1:
        raise DomainError("odd kernels need an odd particle number 2n + 1")
    return _odd_tables(fam, particles // 2, ctx)


def kernel_set(fam: WeightFamily, particles: int, ctx: QContext) -> KernelTables:
    if particles % 2:
        return odd_kernel_set(fam, particles, ctx)
    return even_kernel_set(fam, particles // 2, ctx)


# ------------------------------------------------ matrix kernel checks


def matrix_kernel(tables: KernelTables) -> tuple:
    """Blocks of f(x, y) = [[J(x,y) w(y), I(x,y)], [K(x,y) w(x) w(y), J(y,x) w(x)]], w = omega."""
    om = build_lattice(tables.fam, tables.ctx).omega
    return (tables.J * om[None, :], tables.I, tables.K * om[:, None] * om[None, :], tables.J.T * om[:, None])


def fodd_identities_check(fam: WeightFamily, particles: int, ctx: QContext) -> dict:
    """Residuals of the odd matrix-kernel identities.

    Semigroup: sum_y w(y) f(x,y) f(y,z) = [[f11, 0], [2 f21, f22]].
    Trace: sum_x w(x) f(x,x) = (2n+1) times the identity.
    Residuals are relative to the summed magnitudes of the contributing terms.
    """
    tables = odd_kernel_set(fam, particles, ctx)
    lat = build_lattice(fam, ctx)
    W = lat.w
    f11, f12, f21, f22 = matrix_kernel(tables)

    def mm(A, B):
        return A @ (W[:, None] * B)

    def ma(A, B):
        return np.abs(A) @ (np.abs(W)[:, None] * np.abs(B))

    got = (mm(f11, f11) + mm(f12, f21), mm(f11, f12) + mm(f12, f22),
           mm(f21, f11) + mm(f22, f21), mm(f21, f12) + mm(f22, f22))
    scale = (ma(f11, f11) + ma(f12, f21), ma(f11, f12) + ma(f12, f22),
             ma(f21, f11) + ma(f22, f21), ma(f21, f12) + ma(f22, f22))
    want = (f11, np.zeros_like(f12), 2 * f21, f22)
    semigroup = [float(np.max(relative_residual(g - e, s))) for g, e, s in zip(got, want, scale)]
    trace = [float(np.sum(W * np.diag(b))) for b in (f11, f12, f21, f22)]
    expect = [particles, 0.0, 0.0, particles]
    trace_res = max(abs(t - e) for t, e in zip(trace, expect)) / particles
    tol = 10 * ctx.cmp_tol
    return {
        "particles": particles,
        "semigroup_residuals": semigroup,
        "trace": trace,
        "trace_residual": trace_res,
        "tolerance": tol,
        "passed": bool(max(semigroup) < tol and trace_res < tol),
    }


# ------------------------------------------------------- correlations


def _assemble(tables: KernelTables, idx) -> np.ndarray:
    k = len(idx)
    M = np.zeros((2 * k, 2 * k))
    for a, i in enumerate(idx):
        for b, j in enumerate(idx):
            M[2 * a, 2 * b] = tables.K[i, j]
            M[2 * a, 2 * b + 1] = tables.J[j, i]
            M[2 * a + 1, 2 * b] = -tables.J[i, j]
            M[2 * a + 1, 2 * b + 1] = -tables.I[i, j]
    return 0.5 * (M - M.T)


def correlation_matrix(fam: WeightFamily, particles: int, points, ctx: QContext) -> np.ndarray:
    """Skew 2k x 2k matrix whose Pfaffian times prod omega is the k-point correlation."""
    lat = build_lattice(fam, ctx)
    idx = [lat.index(p) for p in points]
    return _assemble(kernel_set(fam, particles, ctx), idx)


def correlation_qdet(fam: WeightFamily, particles: int, points, ctx: QContext):
    """k-point correlation as the quaternion determinant of the matrix kernel f(z_a, z_b)."""
    lat = build_lattice(fam, ctx)
    idx = [lat.index(p) for p in points]
    f11, f12, f21, f22 = matrix_kernel(kernel_set(fam, particles, ctx))
    C = np.zeros((len(idx), len(idx), 4), dtype=complex)
    for a, i in enumerate(idx):
        for b, j in enumerate(idx):
            m = np.array([[f11[i, j], f12[i, j]], [f21[i, j], f22[i, j]]])
            C[a, b] = Quaternion.from_matrix(m).components()
    return qdet(C)


def correlation_rho(fam: WeightFamily, particles: int, k: int, points, ctx: QContext) -> float:
    """k-point correlation rho_{N,k} at distinct lattice points."""
    if not 0 <= k <= particles <= 10:
        raise DomainError("need 0 <= k <= N <= 10")
    if len(points) != k:
        raise DomainError(f"expected {k} points, got {len(points)}")
    if len(set(points)) != k:
        raise DomainError("points must be distinct")
    if k == 0:
        return 1.0
    lat = build_lattice(fam, ctx)
    idx = [lat.index(p) for p in points]
    M = _assemble(kernel_set(fam, particles, ctx), idx)
    return float(pfaffian(M) * np.prod(lat.omega[idx]))


def one_point_density(fam: WeightFamily, particles: int, ctx: QContext) -> np.ndarray:
    """rho_{N,1}(x) = omega(x) J(x, x) over the whole lattice."""
    lat = build_lattice(fam, ctx)
    return lat.omega * np.diag(kernel_set(fam, particles, ctx).J)


def two_point_density(fam: WeightFamily, particles: int, ctx: QContext) -> np.ndarray:
    """rho_{N,2}(x, y) over all lattice pairs via the closed 4 x 4 Pfaffian."""
    lat = build_lattice(fam, ctx)
    t = kernel_set(fam, particles, ctx)
    d = np.diag(t.J)
    pf = np.outer(d, d) + t.K * t.I - t.J.T * t.J
    np.fill_diagonal(pf, 0.0)
    return pf * np.outer(lat.omega, lat.omega)


def normalization_check(fam: WeightFamily, particles: int, ctx: QContext) -> dict:
    """Lattice integrals of the one- and two-point densities against N and N(N-1)."""
    lat = build_lattice(fam, ctx)
    one = float(np.sum(lat.w * one_point_density(fam, particles, ctx)))
    two = float(lat.w @ two_point_density(fam, particles, ctx) @ lat.w)
    return {"one_point": one, "two_point": two, "expected_one": particles,
            "expected_two": particles * (particles - 1)}


def reproducing_residual(fam: WeightFamily, n: int, ctx: QContext) -> float:
    """Max relative residual of sum_{y,w} K(x,y) omega w s(y,w) w omega K(w,z) = -K(x,z)."""
    lat = build_lattice(fam, ctx)
    K = _skew_K_matrix(fam, n, ctx)
    D = lat.w * lat.omega
    S = s_matrix(fam, ctx)
    got = (K * D[None, :]) @ S @ (D[:, None] * K)
    scale = (np.abs(K) * np.abs(D)[None, :]) @ np.abs(S) @ (np.abs(D)[:, None] * np.abs(K))
    return float(np.max(relative_residual(got + K, scale)))


__all__ = [
    "KernelBlock", "Quaternion", "KernelTables", "quaternion_expand", "check_self_dual", "qdet",
    "cd_matrix", "cd_kernel", "skew_K", "s_x_apply", "skew_J_even", "skew_J_even_explicit", "skew_I_even",
    "j_even_definition", "j_even_rank_one", "j_odd_rank_one", "even_kernel_set", "odd_kernel_set", "kernel_set",
    "matrix_kernel", "fodd_identities_check", "correlation_matrix", "correlation_qdet", "correlation_rho",
    "one_point_density", "two_point_density", "normalization_check", "reproducing_residual",
]
