"""Brute-force ground truth: nested Jackson sums, matching Pfaffians, cycle-sum quaternion determinants.

Nothing here reuses engine weights, kernels or Pfaffians.  Skew weights are
evaluated from long direct products, the s-kernel on the sampling pool is
rebuilt from its parity rule, and Pfaffians are expanded over matchings.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _accel
from .errors import DomainError, NotSelfDual, OddDimension, TermBudgetExceeded
from .families import AL_SALAM_CARLITZ, LITTLE_Q_JACOBI, Q_LAGUERRE, WeightFamily
from .qcore import LatticePoint, QContext

TERM_BUDGET = 10**8
DEFAULT_DEPTH = {1: 300, 2: 300, 3: 60, 4: 30}


@dataclass(frozen=True)
class OracleConfig:
    """Truncation policy for brute-force sums.

    Parameters
    ----------
    depth : int or None
        Lattice steps per nested variable; None picks 300/60/30 for 2/3/4 particles.
    max_particles : int
        Largest particle number the oracle accepts (at most 4).
    tol_report : float
        Relative tolerance used when reporting agreement.
    pool_depth : int
        Lattice steps per branch in the pool used by correlation sums.
    """

    depth: int | None = None
    max_particles: int = 4
    tol_report: float = 1e-8
    pool_depth: int = 120

    def __post_init__(self):
        if not 1 <= self.max_particles <= 4:
            raise DomainError("max_particles must be in 1..4")
        if self.depth is not None and self.depth < 1:
            raise DomainError("depth must be positive")
        if self.pool_depth < 4:
            raise DomainError("pool_depth must be at least 4")

    def depth_for(self, particles: int) -> int:
        return self.depth if self.depth is not None else DEFAULT_DEPTH[max(particles, 1)]


# ------------------------------------------------------ direct weights


def _poch(a, base, floor=1e-18):
    """(a; base)_inf by direct multiplication until the factors are within floor of 1."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    out = np.ones_like(a)
    term = a.copy()
    for _ in range(100000):
        out *= 1.0 - term
        term *= base
        if np.all(np.abs(term) < floor):
            break
    return out


def _poch_ratio(a, nu, base):
    """(a; base)_inf / (a base^nu; base)_inf."""
    return _poch(a, base) / _poch(np.asarray(a) * base**nu, base)


def oracle_anchors(fam: WeightFamily, q: float) -> tuple:
    r = math.sqrt(q)
    if fam.tag in (LITTLE_Q_JACOBI, Q_LAGUERRE):
        return (1.0,)
    if fam.tag == AL_SALAM_CARLITZ:
        return (1.0, fam.params[0])
    a, _, c = fam.params
    return (a * r, c * r)


def oracle_omega(fam: WeightFamily, anchor: float, k, q: float) -> np.ndarray:
    """Skew weight omega at anchor * q^(k/2) from direct products."""
    r = math.sqrt(q)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    x = anchor * r**k
    if fam.tag == LITTLE_Q_JACOBI:
        al, be = fam.params
        power = anchor ** ((al - 1) / 2) * r ** (k * (al - 1) / 2)
        return q ** (-(al + 1) / 8) * power * _poch_ratio(q * x, (be - 1) / 2, q)
    if fam.tag == AL_SALAM_CARLITZ:
        (al,) = fam.params
        return (-al) ** -0.5 * _poch(q * x, q) * _poch(q * x / al, q)
    if fam.tag == Q_LAGUERRE:
        (al,) = fam.params
        power = r ** (k * (al - 1) / 2)
        with np.errstate(over="ignore"):
            return q ** (-(al + 1) / 8) * power / _poch(-x, q)
    a, b, c = fam.params
    return _poch(r * x / a, q) * _poch(r * x / c, q) / (_poch(x, q) * _poch(b * x / c, q))


# ---------------------------------------------------- nested partition


def _branches(fam, q):
    anchors = oracle_anchors(fam, q)
    hi = max(anchors)
    lo = min(anchors) if len(anchors) > 1 else 0.0
    return hi, lo


def _term_estimate(N, n_first, depth, has_lo):
    per = depth * (2 if has_lo else 1)
    return n_first * per ** (N - 1)


def brute_partition(fam: WeightFamily, particles: int, cfg: OracleConfig, ctx: QContext) -> float:
    """Ordered nested Jackson sum of prod_{i<j}(z_i - z_j) prod omega(z_i).

    Variables satisfy z_{i+1} <= sqrt(q) z_i on the branch of z_i, or lie on
    the lower anchor lattice for two-sided supports (the signed expansion of
    an integral from the lower anchor).
    """
    N = int(particles)
    if not 1 <= N <= cfg.max_particles:
        raise DomainError(f"particle number must be in 1..{cfg.max_particles}")
    q = ctx.q
    depth = cfg.depth_for(N)
    hi, lo = _branches(fam, q)
    has_lo = lo != 0.0
    j1_lo = -(depth // 3) if fam.tag == Q_LAGUERRE else 0
    j1_hi = depth
    n_first = (j1_hi - j1_lo) + (depth if has_lo else 0)
    if _term_estimate(N, n_first, depth, has_lo) > TERM_BUDGET:
        raise TermBudgetExceeded(f"nested sum with depth {depth} and N={N} exceeds {TERM_BUDGET} terms")
    k_min = 2 * j1_lo
    k_max = 2 * (j1_hi - 1) + (N - 1) * (2 * depth - 1) + 1
    om_hi = oracle_omega(fam, hi, np.arange(k_min, k_max + 1), q)
    om_lo = oracle_omega(fam, lo, np.arange(0, k_max + 1), q) if has_lo else np.zeros(1)
    om_hi = np.nan_to_num(om_hi, nan=0.0, posinf=0.0)
    return float(_accel.nested_sum(N, q, hi, lo, j1_lo, j1_hi, depth, om_hi, -k_min, om_lo))


# ---------------------------------------------------- correlations


@dataclass(frozen=True, eq=False)
class _Pool:
    branch: np.ndarray
    k: np.ndarray
    x: np.ndarray
    w: np.ndarray
    omega: np.ndarray
    S: np.ndarray
    F: np.ndarray
    anchors: tuple

    def index(self, pt: LatticePoint) -> int:
        for i in range(len(self.k)):
            if self.anchors[self.branch[i]] == pt.endpoint and self.k[i] == pt.k:
                return i
        raise DomainError(f"{pt} lies outside the oracle pool")


@lru_cache(maxsize=16)
def _pool(fam: WeightFamily, cfg: OracleConfig, q: float) -> _Pool:
    r = math.sqrt(q)
    anchors = oracle_anchors(fam, q)
    kmin = -(cfg.pool_depth // 3) if fam.tag == Q_LAGUERRE else 0
    br, ks = [], []
    for b in range(len(anchors)):
        kk = np.arange(kmin, cfg.pool_depth)
        br.append(np.full(len(kk), b))
        ks.append(kk)
    branch = np.concatenate(br)
    k = np.concatenate(ks)
    e = np.array(anchors)[branch]
    x = e * r ** k.astype(float)
    w = (1 - r) * np.abs(e) * r ** k.astype(float)
    omega = np.concatenate([oracle_omega(fam, anchors[b], ks[b], q) for b in range(len(anchors))])
    omega = np.nan_to_num(omega, nan=0.0, posinf=0.0)
    c = (1 + r) ** 2
    n = len(k)
    S = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if branch[i] == branch[j]:
                ei, ej = k[i] % 2 == 0, k[j] % 2 == 0
                if ei != ej:
                    k_half, k_int = (k[i], k[j]) if not ei else (k[j], k[i])
                    if k_half > k_int:
                        S[i, j] = c * np.sign(x[j] - x[i])
            elif k[i] % 2 == 0 and k[j] % 2 == 0:
                S[i, j] = c * np.sign(x[j] - x[i])
    F = np.where(k % 2 == 0, 1 + r, 0.0)
    return _Pool(branch, k, x, w, omega, S, F, anchors)


def brute_density_sum(fam: WeightFamily, particles: int, points, cfg: OracleConfig, ctx: QContext) -> float:
    """Sum of the symmetric density over the free variables (ordered, distinct)."""
    pool = _pool(fam, cfg, ctx.q)
    fixed = [pool.index(p) for p in points]
    nfree = particles - len(fixed)
    n = len(pool.k)
    if n ** max(nfree, 0) > TERM_BUDGET:
        raise TermBudgetExceeded(f"correlation sum over {nfree} free variables exceeds {TERM_BUDGET} terms")
    return float(_accel.density_sum(pool.S, pool.F, pool.x, pool.omega, pool.w, fixed, np.arange(n),
                                    nfree, bool(particles % 2)))


def brute_correlation(fam: WeightFamily, particles: int, k: int, points, cfg: OracleConfig, ctx: QContext,
                      tau: float | None = None) -> float:
    """k-point correlation by summing the density over N - k variables, divided by (N - k)! tau_N."""
    if not 0 <= k <= particles <= cfg.max_particles:
        raise DomainError("need 0 <= k <= N <= max_particles")
    if len(points) != k or len(set(points)) != k:
        raise DomainError("need k distinct points")
    tau = brute_partition(fam, particles, cfg, ctx) if tau is None else tau
    total = brute_density_sum(fam, particles, points, cfg, ctx)
    return total / (math.factorial(particles - k) * tau)


def brute_one_point_integral(fam: WeightFamily, particles: int, cfg: OracleConfig, ctx: QContext) -> float:
    """Lattice integral of the oracle one-point density (should equal N)."""
    total = brute_density_sum(fam, particles, [], cfg, ctx)
    return total / (math.factorial(particles - 1) * brute_partition(fam, particles, cfg, ctx))


# ---------------------------------------------------- combinatorics


def brute_pfaffian(A) -> float:
    """Pfaffian as the signed sum over perfect matchings (size at most 10)."""
    A = np.asarray(A)
    n = A.shape[0]
    if A.ndim != 2 or n != A.shape[1]:
        raise DomainError("square matrix required")
    if n % 2:
        raise OddDimension("Pfaffian of odd dimension")
    if n > 10:
        raise DomainError("matching expansion limited to size 10")
    scale = float(np.max(np.abs(A))) if n else 0.0
    if n and np.max(np.abs(A + A.T)) > 1e-12 * max(scale, 1e-300):
        raise DomainError("matrix is not skew-symmetric")

    def expand(idx):
        if not idx:
            return 1.0
        first, rest = idx[0], idx[1:]
        total = 0.0
        for pos, j in enumerate(rest):
            remaining = rest[:pos] + rest[pos + 1:]
            total += (-1) ** pos * A[first, j] * expand(remaining)
        return total

    return expand(list(range(n)))


def _qmat(c):
    a0, a1, a2, a3 = c
    return np.array([[a0 + 1j * a1, a2 + 1j * a3], [-a2 + 1j * a3, a0 - 1j * a1]])


def brute_qdet(M):
    """Quaternion determinant by the cycle expansion.

    Sum over permutations of (-1)^(N - cycles) times the product over cycles
    of the scalar part of the quaternion product taken around each cycle.
    ``M`` is an (N, N, 4) component array with N at most 4.
    """
    C = np.asarray(M)
    if C.ndim != 3 or C.shape[0] != C.shape[1] or C.shape[2] != 4:
        raise DomainError("expected an (N, N, 4) component array")
    n = C.shape[0]
    if n > 4:
        raise DomainError("cycle expansion limited to N <= 4")
    scale = float(np.max(np.abs(C))) if n else 1.0
    for i in range(n):
        for j in range(n):
            d = C[i, j] * np.array([1, -1, -1, -1])
            if np.max(np.abs(C[j, i] - d)) > 1e-12 * max(scale, 1e-300):
                raise NotSelfDual("matrix is not self-dual")
    total = 0.0
    for perm in itertools.permutations(range(n)):
        seen = [False] * n
        prod = 1.0
        cycles = 0
        for s in range(n):
            if seen[s]:
                continue
            cycles += 1
            m = np.eye(2, dtype=complex)
            a = s
            while not seen[a]:
                seen[a] = True
                m = m @ _qmat(C[a, perm[a]])
                a = perm[a]
            prod *= np.trace(m) / 2
        total += (-1) ** (n - cycles) * prod
    total = complex(total)
    return total.real if abs(total.imag) <= 1e-12 * max(abs(total), 1.0) else total


__all__ = [
    "OracleConfig", "oracle_anchors", "oracle_omega", "brute_partition", "brute_density_sum",
    "brute_correlation", "brute_one_point_integral", "brute_pfaffian", "brute_qdet", "TERM_BUDGET",
]
