"""Skew inner product, bimoments, Pfaffians, skew-orthogonal polynomials and partition functions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _accel
from .errors import DomainError, MixedEndpoint, NotSkew, OddDimension, RouteMismatch, SingularTau, VanishingBeta
from .families import (
    AL_SALAM_CARLITZ,
    LITTLE_Q_JACOBI,
    Q_LAGUERRE,
    PolySeries,
    WeightFamily,
    _op_table,
    apply_A_q,
    build_lattice,
    gamma_closed,
    lattice_values,
    monic_op,
    norm_numeric,
    omega_tilde,
    q_derivative_poly,
)
from .qcore import LatticePoint, QContext, q_gamma, q_poch_general, q_poch_infinite


def _rel_close(a, b, tol, scale=None):
    scale = max(abs(a), abs(b)) if scale is None else scale
    return abs(a - b) <= tol * scale


# ------------------------------------------------------------- s and F


def s_kernel(x: LatticePoint, y: LatticePoint, ctx: QContext) -> float:
    """Skew kernel between two lattice points.

    Same anchor: nonzero only for mixed parity when the half point has the
    larger exponent, with value (1 + r)^2 sgn(y - x).  Opposite anchors (a
    two-sided support): integer points pair with (1 + r)^2 sgn(y - x).
    """
    c = (1 + ctx.base) ** 2
    xv, yv = x.value(ctx.q), y.value(ctx.q)
    if x.endpoint == y.endpoint:
        if x.is_integer == y.is_integer:
            return 0.0
        half, whole = (x, y) if not x.is_integer else (y, x)
        return c * float(np.sign(yv - xv)) if half.k > whole.k else 0.0
    if (x.endpoint > 0) == (y.endpoint > 0):
        raise MixedEndpoint(f"no s-kernel rule between anchors {x.endpoint} and {y.endpoint}")
    if x.is_integer and y.is_integer:
        return c * float(np.sign(yv - xv))
    return 0.0


def F_function(x: LatticePoint, ctx: QContext) -> float:
    """1 + sqrt(q) on integer exponents, 0 on half-integer exponents."""
    return 1.0 + ctx.base if x.is_integer else 0.0


@lru_cache(maxsize=32)
def s_matrix(fam: WeightFamily, ctx: QContext) -> np.ndarray:
    """Matrix S[i, j] = s(x_i, x_j) over the materialized lattice."""
    lat = build_lattice(fam, ctx)
    c = (1 + ctx.base) ** 2
    b, k, x = lat.branch, lat.k, lat.x
    even = lat.even
    same = b[:, None] == b[None, :]
    mixed = even[:, None] != even[None, :]
    k_half = np.where(even[:, None], k[None, :], k[:, None])
    k_int = np.where(even[:, None], k[:, None], k[None, :])
    sgn = np.sign(x[None, :] - x[:, None])
    S = np.where(same & mixed & (k_half > k_int), c * sgn, 0.0)
    S += np.where(~same & even[:, None] & even[None, :], c * sgn, 0.0)
    S.setflags(write=False)
    return S


def F_values(fam: WeightFamily, ctx: QContext) -> np.ndarray:
    lat = build_lattice(fam, ctx)
    return np.where(lat.even, 1.0 + ctx.base, 0.0)


def s_x_values(fam: WeightFamily, vals, ctx: QContext) -> np.ndarray:
    """(s_x f)(x) = sum_z s(z, x) f(z) omega(z) w(z), at every lattice x."""
    lat = build_lattice(fam, ctx)
    return s_matrix(fam, ctx).T @ (lat.w * lat.omega * vals)


# ------------------------------------------------------ skew products


@lru_cache(maxsize=32)
def _nested_weights(fam: WeightFamily, ctx: QContext) -> np.ndarray:
    """W[x, y] for the ordered double Jackson sum at base q.

    The outer variable y runs over integer points; the inner variable x over
    (lower limit, r y].  Lower limits on the negative anchor are expanded as
    int_0^u - int_0^lo, which gives signed weights.
    """
    lat = build_lattice(fam, ctx)
    q = ctx.q
    wq = (1 - q) * np.abs(np.array(lat.anchors)[lat.branch]) * ctx.base ** lat.k.astype(float)
    b, k = lat.branch, lat.k
    even = lat.even
    W = np.zeros((lat.size, lat.size))
    deeper_half = (b[:, None] == b[None, :]) & ~even[:, None] & even[None, :] & (k[:, None] > k[None, :])
    if len(lat.anchors) == 1:
        W[deeper_half] = 1.0
    else:
        pos = np.array(lat.anchors)[b] > 0
        # upper limit r*y on the y branch: + on the positive branch, - on the negative branch
        W[deeper_half & pos[None, :]] = 1.0
        W[deeper_half & ~pos[None, :]] = -1.0
        # minus the integral from 0 to the negative anchor: all negative integer points
        W[(~pos & even)[:, None] & even[None, :]] += 1.0
    return W * wq[:, None] * wq[None, :]


def _values(p, lat):
    return lattice_values(p, lat) if not isinstance(p, np.ndarray) else p


def skew_product_nested(fam: WeightFamily, phi, psi, ctx: QContext) -> float:
    lat = build_lattice(fam, ctx)
    a = _values(phi, lat) * lat.omega
    b = _values(psi, lat) * lat.omega
    W = _nested_weights(fam, ctx)
    return float(a @ W @ b - b @ W @ a)


def skew_product_symmetric(fam: WeightFamily, phi, psi, ctx: QContext) -> float:
    lat = build_lattice(fam, ctx)
    d = lat.w * lat.omega
    return float((d * _values(phi, lat)) @ s_matrix(fam, ctx) @ (d * _values(psi, lat)))


def skew_product_beta1(fam: WeightFamily, phi, psi, ctx: QContext, check: bool = True) -> float:
    """<phi, psi>_1 by the s-kernel double sum, cross-checked against the nested Jackson sum."""
    sym = skew_product_symmetric(fam, phi, psi, ctx)
    if check:
        nested = skew_product_nested(fam, phi, psi, ctx)
        lat = build_lattice(fam, ctx)
        d = np.abs(lat.w * lat.omega)
        scale = float((d * np.abs(_values(phi, lat))) @ np.abs(s_matrix(fam, ctx)) @ (d * np.abs(_values(psi, lat))))
        if not _rel_close(sym, nested, ctx.cmp_tol, scale):
            raise RouteMismatch("skew product", sym, nested, ctx.cmp_tol)
    return sym


def skew_product_beta4(fam: WeightFamily, phi: PolySeries, psi: PolySeries, ctx: QContext) -> float:
    """<phi, psi>_4 = sum w (phi D_r psi - psi D_r phi) f(r x) rho(r x)."""
    lat = build_lattice(fam, ctx)
    r = ctx.base
    dphi = q_derivative_poly(phi, r)(lat.x)
    dpsi = q_derivative_poly(psi, r)(lat.x)
    wt = omega_tilde(fam, lat.x, ctx)
    return float(np.sum(lat.w * (phi(lat.x) * dpsi - psi(lat.x) * dphi) * wt))


def a_q_pairing(fam: WeightFamily, phi: PolySeries, psi: PolySeries, ctx: QContext) -> float:
    """<phi, A_q psi>_2, the left side of the A_q relation."""
    lat = build_lattice(fam, ctx)
    return float(np.sum(lat.w * lat.rho * phi(lat.x) * apply_A_q(fam, psi, ctx)(lat.x)))


# ------------------------------------------------------ Pfaffian engine


def pfaffian(A) -> float:
    """Pfaffian of a skew-symmetric even-dimensional matrix (real or complex)."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError("Pfaffian needs a square matrix")
    n = A.shape[0]
    if n % 2:
        raise OddDimension(f"Pfaffian of odd dimension {n}")
    if n == 0:
        return 1.0
    scale = float(np.max(np.abs(A)))
    if np.max(np.abs(A + A.T)) > 1e-12 * max(scale, 1e-300):
        raise NotSkew("matrix is not skew-symmetric")
    dtype = complex if np.iscomplexobj(A) else float
    return _accel.pfaffian_kernel(np.asarray(A, dtype=dtype))


# ------------------------------------------------------ moments and tau


@dataclass(frozen=True, eq=False)
class SkewMomentMatrix:
    """Bimoments m[i, j] = <x^i, x^j>_1 and single moments xi[j] = int x^j omega d_q x."""

    m: np.ndarray
    xi: np.ndarray

    @property
    def size(self) -> int:
        return self.m.shape[0]

    def bordered(self, n: int) -> np.ndarray:
        """Odd-size (n) moment Pfaffian matrix with the single-moment border."""
        top = np.hstack([self.m[:n, :n], self.xi[:n, None]])
        return np.vstack([top, np.concatenate([-self.xi[:n], [0.0]])])


def moment_matrix(fam: WeightFamily, n_polys: int, ctx: QContext) -> SkewMomentMatrix:
    """Monomial bimoment matrix of size n_polys plus single moments."""
    if not 0 < n_polys <= 12:
        raise DomainError("n_polys must be in 1..12")
    lat = build_lattice(fam, ctx)
    X = np.array([lat.x**i for i in range(n_polys)])
    d = lat.w * lat.omega
    S = s_matrix(fam, ctx)
    m = (X * d) @ S @ (X * d).T
    m = 0.5 * (m - m.T)
    xi = (X * d) @ F_values(fam, ctx)
    m.setflags(write=False)
    return SkewMomentMatrix(m, xi)


def tau(fam: WeightFamily, size: int, ctx: QContext) -> float:
    """Pfaffian of the leading size x size bimoment minor (size even); tau_0 = 1."""
    if size % 2:
        raise OddDimension("tau is defined for even size")
    if size == 0:
        return 1.0
    return float(pfaffian(moment_matrix(fam, size, ctx).m[:size, :size]))


# ------------------------------------------------------------ SOPs


@dataclass(frozen=True, eq=False)
class SOPSet:
    """Skew-orthogonal polynomials Q_0..Q_{2N-1} with normalizations u_0..u_{N-1}."""

    polys: tuple
    u: tuple
    source: str

    def __len__(self):
        return len(self.polys)


def _p_basis(fam, ctx, size):
    coeffs, _ = _op_table(fam, ctx)
    return [np.asarray(c) for c in coeffs[:size]]


def _check_tau(t, m):
    # bimoment matrices are strongly graded, so norm-based bounds are far too loose;
    # only an exact zero or an overflow is treated as singular
    if t == 0 or not np.isfinite(t):
        raise SingularTau(f"tau_{2 * m} vanishes numerically ({t!r})")


def sop_numeric(fam: WeightFamily, size: int, ctx: QContext) -> SOPSet:
    """SOPs from bordered Pfaffians of bimoments.

    Bimoments are formed in the basis of monic orthogonal polynomials (a unit
    triangular change of basis, which leaves every Pfaffian unchanged), then
    coefficients are mapped back to monomials.  Odd polynomials are shifted by
    a multiple of Q_{2m} so that their degree-2m coefficient is zero.
    """
    if size % 2 or size <= 0:
        raise DomainError("size must be a positive even number")
    lat = build_lattice(fam, ctx)
    B = _p_basis(fam, ctx, size)
    V = np.array([np.polynomial.polynomial.polyval(lat.x, b) for b in B])
    d = lat.w * lat.omega
    M = (V * d) @ s_matrix(fam, ctx) @ (V * d).T
    M = 0.5 * (M - M.T)

    def comb(idx, co):
        out = np.zeros(size)
        for i, c in zip(idx, co):
            out[: len(B[i])] += c * B[i]
        return out

    def bordered(L, t):
        co = []
        for p in range(len(L)):
            sub = [L[i] for i in range(len(L)) if i != p]
            co.append((-1) ** p * (pfaffian(M[np.ix_(sub, sub)]) if sub else 1.0) / t)
        return comb(L, co)

    polys, u = [], []
    t_prev = 1.0
    for m in range(size // 2):
        _check_tau(t_prev, m)
        q_even = bordered(list(range(2 * m + 1)), t_prev)
        q_odd = bordered(list(range(2 * m)) + [2 * m + 1], t_prev)
        q_odd = q_odd - q_odd[2 * m] * q_even
        polys += [PolySeries.from_array(q_even), PolySeries.from_array(q_odd)]
        t_next = float(pfaffian(M[: 2 * m + 2, : 2 * m + 2]))
        _check_tau(t_next, m + 1)
        u.append(t_next / t_prev)
        t_prev = t_next
    return SOPSet(tuple(polys), tuple(u), "numeric")


def sop_coefficient_closed(fam: WeightFamily, n: int, ctx: QContext) -> float:
    """Closed a_n in Q_{2n+1} = p_{2n+1} - a_n p_{2n-1}; equals gamma_{2n-1} / gamma_{2n}."""
    q, r = ctx.q, ctx.base
    if fam.tag == LITTLE_Q_JACOBI:
        al, be = fam.params
        s = al + be
        return (q ** ((4 * n + al) / 2) * (1 - q ** (n + s / 2)) * (1 - q ** (n + al / 2)) * (1 - q ** (n + be / 2))
                * (1 - q**n) / ((1 - q ** (2 * n + (s + 2) / 2)) * (1 - q ** (2 * n + (s + 1) / 2))
                                * (1 - q ** (2 * n + s / 2)) * (1 - q ** (2 * n + (s - 1) / 2))))
    if fam.tag == AL_SALAM_CARLITZ:
        (al,) = fam.params
        return -al * q**n * (1 - q**n)
    if fam.tag == Q_LAGUERRE:
        (al,) = fam.params
        return q ** (-4 * n - al) * (1 - q**n) * (1 - q ** (n + al / 2))
    a, b, c = fam.params
    z = q**n
    return (-a * c * q ** (n + 1) * (1 - z) * (1 - a * z) * (1 - b * z) * (1 - c * z) * (1 - a * b * z / c)
            * (1 - a * b * z) / q_poch_general(a * b * q ** (2 * n - 0.5), 4, ctx, base=r))


def laguerre_limit_check(alpha: float, n: int = 1, q: float = 0.999) -> dict:
    """Odd-SOP coefficient of q-Laguerre near q = 1 against the classical Laguerre value.

    With x rescaled by (1 - sqrt(q)), -a_n / (1 - sqrt(q))^2 tends to -2n(2n + alpha).
    The coefficient is computed from its product form and, separately, as the
    ratio gamma_{2n-1} / gamma_{2n} with the common infinite products cancelled
    (each gamma underflows this close to q = 1).
    """
    ctx = QContext(q)
    r = ctx.base
    t = q ** ((alpha + 1) / 2)
    fam = WeightFamily(Q_LAGUERRE, (alpha,))
    direct = sop_coefficient_closed(fam, n, ctx)

    def finite(j):
        return q ** (j * j + alpha * j + j) / (q_poch_general(t, j, ctx, base=r) * q_poch_general(r, j, ctx, base=r))

    ratio = finite(2 * n - 1) / finite(2 * n)
    scale = (1 - r) ** 2
    target = -2 * n * (2 * n + alpha)
    coef = -direct / scale
    return {
        "q": q, "alpha": alpha, "n": n,
        "coefficient": coef,
        "coefficient_gamma_ratio": -ratio / scale,
        "target": target,
        "relative_error": abs(coef - target) / abs(target),
    }


def sop_closed(fam: WeightFamily, size: int, ctx: QContext, gauge: str = "monomial") -> SOPSet:
    """SOPs from the orthogonal polynomials: Q_{2j} = p_{2j}, Q_{2j+1} = p_{2j+1} - a_j p_{2j-1}.

    ``gauge="monomial"`` (default) then shifts each Q_{2j+1} by a multiple of
    Q_{2j} to zero its degree-2j coefficient; ``gauge="p"`` keeps the form above.
    """
    if gauge not in ("monomial", "p"):
        raise DomainError("gauge must be 'monomial' or 'p'")
    if size % 2 or size <= 0:
        raise DomainError("size must be a positive even number")
    polys, u = [], []
    for j in range(size // 2):
        polys.append(monic_op(fam, 2 * j, ctx))
        odd = monic_op(fam, 2 * j + 1, ctx)
        if j > 0:
            a = sop_coefficient_closed(fam, j, ctx)
            ratio = gamma_closed(fam, 2 * j - 1, ctx) / gamma_closed(fam, 2 * j, ctx)
            if not _rel_close(a, ratio, ctx.cmp_tol):
                raise RouteMismatch(f"a_{j}", a, ratio, ctx.cmp_tol)
            odd = odd - monic_op(fam, 2 * j - 1, ctx) * a
        polys.append(odd)
        u.append(1.0 / gamma_closed(fam, 2 * j, ctx))
    out = SOPSet(tuple(polys), tuple(u), "closed_form")
    return monomial_gauge(out) if gauge == "monomial" else out


def monomial_gauge(sops: SOPSet) -> SOPSet:
    """Shift each Q_{2m+1} by a multiple of Q_{2m} so its degree-2m coefficient is zero."""
    polys = list(sops.polys)
    for m in range(len(polys) // 2):
        even, odd = polys[2 * m], polys[2 * m + 1]
        shift = odd.array(2 * m + 2)[2 * m]
        polys[2 * m + 1] = odd - even * shift
    return SOPSet(tuple(polys), sops.u, sops.source)


def p_gauge(sops: SOPSet, fam: WeightFamily, ctx: QContext) -> SOPSet:
    """Shift each Q_{2m+1} by a multiple of Q_{2m} so it has no p_{2m} component."""
    lat = build_lattice(fam, ctx)
    meas = lat.w * lat.rho
    polys = list(sops.polys)
    for m in range(len(polys) // 2):
        p2m = monic_op(fam, 2 * m, ctx)(lat.x)
        comp = float(np.sum(meas * polys[2 * m + 1](lat.x) * p2m)) / norm_numeric(fam, 2 * m, ctx)
        polys[2 * m + 1] = polys[2 * m + 1] - polys[2 * m] * comp
    return SOPSet(tuple(polys), sops.u, sops.source)


def sop_discrepancy(a: SOPSet, b: SOPSet) -> float:
    """Max coefficient difference after both sets are put in the monomial gauge,
    relative to the largest coefficient of each polynomial."""
    a, b = monomial_gauge(a), monomial_gauge(b)
    worst = 0.0
    for pa, pb in zip(a.polys, b.polys):
        n = max(len(pa.coeffs), len(pb.coeffs))
        ca, cb = pa.array(n), pb.array(n)
        worst = max(worst, float(np.max(np.abs(ca - cb)) / max(np.max(np.abs(cb)), 1e-300)))
    return worst


def op_from_sop(fam: WeightFamily, size: int, ctx: QContext, sops: SOPSet | None = None) -> list:
    """Recover p_0..p_{size-1} from SOPs: p_{2j} = Q_{2j}, p_{2j+1} = sum_l (prod_{l<k<=j} a_k) Q_{2l+1}.

    By default the numeric SOPs are used, moved to the gauge without p_{2m}
    components, with closed coefficients a_k = gamma_{2k-1} / gamma_{2k}.
    """
    sops = p_gauge(sops or sop_numeric(fam, size, ctx), fam, ctx)
    a = [0.0] + [sop_coefficient_closed(fam, k, ctx) for k in range(1, size // 2)]
    out = []
    for j in range(size // 2):
        out.append(sops.polys[2 * j])
        acc = PolySeries((0.0,))
        for l in range(j + 1):
            acc = acc + sops.polys[2 * l + 1] * float(np.prod(a[l + 1: j + 1]))
        out.append(acc)
    return out


# ------------------------------------------------ partition functions


def partition_explicit(fam: WeightFamily, n: int, ctx: QContext) -> float:
    """Product formula for the 2n-particle partition function of each family."""
    q, r = ctx.q, ctx.base

    def pg(a, nu):
        return q_poch_general(a, nu, ctx, base=r)

    def pi(a):
        return q_poch_infinite(a, ctx, base=r)

    if fam.tag == LITTLE_Q_JACOBI:
        al, be = fam.params
        prod = 1.0
        for i in range(n):
            # pg(r, 2i+al+be) / pg(r, 4i+al+be) as a finite product; each factor alone
            # hits a zero of (1; r)_inf when al + be = -1
            shared = 1.0 / math.prod(1.0 - r ** (2 * i + al + be + 1 + j) for j in range(2 * i))
            prod *= (shared * pg(r, 2 * i + al) * pg(r, 2 * i + be) * pg(r, 2 * i)
                     / pg(r, 4 * i + al + be + 2))
        return q ** (n * (n - 1) * (4 * n + 3 * al + 1) / 6) * (1 - q) ** (2 * n) * prod
    if fam.tag == AL_SALAM_CARLITZ:
        (al,) = fam.params
        prod = math.prod(pg(r, 2 * i) for i in range(n))
        return ((-al) ** (n * (n - 1)) * q ** (n * (n - 1) * (4 * n + 1) / 12) * (1 - q) ** (2 * n)
                * (pi(r) * pi(al) * pi(r / al)) ** n * prod)
    if fam.tag == Q_LAGUERRE:
        (al,) = fam.params
        t = q ** ((al + 1) / 2)
        const = pi(r) * pi(-t) * pi(-(q ** (-al / 2)))  / (pi(t) * pi(-r) ** 2)
        prod = math.prod(pg(t, 2 * i) * pg(r, 2 * i) for i in range(n))
        return (2.0**-n * (1 - q) ** (2 * n) * q ** (-n * (n - 1) * (4 * n + 1 + 3 * al) / 3 - n * (al + 1) / 2)
                * const**n * prod)
    a, b, c = fam.params
    A = pi(r) * pi(c / a) * pi(a * r / c) * pi(a * b * r)
    B = pi(a * r) * pi(b * r) * pi(c * r) * pi(a * b * r / c)
    prod = 1.0
    for i in range(n):
        prod *= (pg(r, 2 * i) * pg(a * r, 2 * i) * pg(b * r, 2 * i) * pg(c * r, 2 * i) * pg(a * b * r / c, 2 * i)
                 / (pg(a * b * r, 4 * i + 2) * pg(a * b * r ** (2 * i + 1), 2 * i)))
    return ((-1) ** n * (1 - q) ** (2 * n) * a ** (n * n + n) * c ** (n * n) * A**n
            * q ** (n * (4 * n + 5) * (n + 1) / 12) / B**n * prod)


def partition_product_u(fam: WeightFamily, n: int, ctx: QContext) -> float:
    """prod_{l<n} 1 / gamma_{2l} with closed gamma."""
    return math.prod(1.0 / gamma_closed(fam, 2 * l, ctx) for l in range(n))


def partition_even_closed(fam: WeightFamily, particles: int, ctx: QContext) -> float:
    """Closed 2n-particle partition function; the product of u's and the explicit formula must agree."""
    if particles % 2:
        raise OddDimension("use partition_odd for odd particle numbers")
    n = particles // 2
    if not 0 <= n <= 5:
        raise DomainError("n must be in 0..5")
    explicit = partition_explicit(fam, n, ctx)
    via_u = partition_product_u(fam, n, ctx)
    if not _rel_close(explicit, via_u, ctx.cmp_tol):
        raise RouteMismatch(f"tau_{particles}", explicit, via_u, ctx.cmp_tol)
    return explicit


def aomoto_partition(alpha: float, beta: float, particles: int, ctx: QContext) -> float:
    """Little q-Jacobi partition function from the q-Selberg evaluation at gamma = 1/2.

    Uses exponents a = (alpha + 1)/2, b = (beta + 1)/2 and the omega prefactor
    q^{-(alpha+1)/8} per particle.
    """
    q = ctx.q
    g = 0.5
    a = (alpha + 1) / 2
    b = (beta + 1) / 2
    N = particles
    pre = q ** (a * g * math.comb(N, 2) + 2 * g * g * math.comb(N, 3))
    prod = 1.0
    for j in range(1, N + 1):
        prod *= (q_gamma(a + (j - 1) * g, ctx) * q_gamma(b + (j - 1) * g, ctx) * q_gamma(j * g, ctx)
                 / (q_gamma(a + b + (N + j - 2) * g, ctx) * q_gamma(g, ctx)))
    return q ** (-N * (alpha + 1) / 8) * pre * prod


def beta_values(fam: WeightFamily, count: int, ctx: QContext, sops: SOPSet | None = None) -> np.ndarray:
    """beta_i = sum F Q_i omega w for i < count (closed SOPs by default)."""
    size = count + (count % 2)
    sops = sops or sop_closed(fam, size, ctx)
    lat = build_lattice(fam, ctx)
    Fv = F_values(fam, ctx)
    return np.array([float(np.sum(Fv * p(lat.x) * lat.omega * lat.w)) for p in sops.polys[:count]])


def beta_product(fam: WeightFamily, l: int, ctx: QContext) -> float:
    """beta_{2l} = beta_0 prod_{j<l} gamma_{2j} / gamma_{2j+1}."""
    b0 = beta_values(fam, 1, ctx)[0]
    return b0 * math.prod(gamma_closed(fam, 2 * j, ctx) / gamma_closed(fam, 2 * j + 1, ctx) for j in range(l))


def beta_coeff(fam: WeightFamily, i: int, ctx: QContext) -> float:
    """beta_i by lattice sum; even indices are also checked against the product formula."""
    direct = float(beta_values(fam, i + 1, ctx)[i])
    if i % 2 == 0:
        prod = beta_product(fam, i // 2, ctx)
        if not _rel_close(direct, prod, ctx.cmp_tol):
            raise RouteMismatch(f"beta_{i}", direct, prod, ctx.cmp_tol)
    return direct


def partition_odd(fam: WeightFamily, particles: int, ctx: QContext) -> float:
    """tau_{2n+1} = beta_{2n} prod_{j<n} u_j."""
    if particles % 2 == 0:
        raise DomainError("partition_odd needs an odd particle number")
    n = particles // 2
    b = beta_coeff(fam, 2 * n, ctx)
    if b == 0.0:
        raise VanishingBeta("beta_{2n} vanishes")
    return b * partition_product_u(fam, n, ctx)


def partition(fam: WeightFamily, particles: int, ctx: QContext) -> float:
    """Partition function for any particle number."""
    if particles % 2:
        return partition_odd(fam, particles, ctx)
    return partition_even_closed(fam, particles, ctx)


__all__ = [
    "s_kernel", "F_function", "s_matrix", "F_values", "s_x_values",
    "skew_product_beta1", "skew_product_nested", "skew_product_symmetric", "skew_product_beta4", "a_q_pairing",
    "pfaffian", "SkewMomentMatrix", "moment_matrix", "tau", "SOPSet",
    "sop_numeric", "sop_closed", "sop_coefficient_closed", "monomial_gauge", "p_gauge", "sop_discrepancy",
    "op_from_sop", "partition_explicit", "partition_product_u", "partition_even_closed", "aomoto_partition",
    "beta_values", "beta_product", "beta_coeff", "partition_odd", "partition", "laguerre_limit_check",
]
