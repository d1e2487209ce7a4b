"""q-arithmetic primitives and Jackson integration on exponential lattices.

All lattices here have the form ``e * base**n``.  The working base of the
ensemble is ``sqrt(q)``, so a lattice point is stored as an anchor ``e`` and
an integer exponent numerator ``k`` with coordinate ``e * q**(k/2)``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DivisionByVanishingProduct,
    DomainError,
    NonConvergent,
    PoleError,
    ZeroArgument,
)

_ENV_KEYS = {
    "trunc_depth": ("QENSEMBLE_TRUNC_DEPTH", int),
    "tail_tol": ("QENSEMBLE_TAIL_TOL", float),
    "cmp_tol": ("QENSEMBLE_CMP_TOL", float),
}


@dataclass(frozen=True)
class QContext:
    """Numeric policy: the parameter q plus truncation depth and tolerances.

    Parameters
    ----------
    q : float
        Deformation parameter, strictly inside (0, 1).
    trunc_depth : int
        Maximum number of lattice steps summed in any one direction.
    tail_tol : float
        Relative bound on the neglected tail of truncated series.
    cmp_tol : float
        Relative tolerance used by identity and route checks.
    """

    q: float
    trunc_depth: int = 256
    tail_tol: float = 1e-14
    cmp_tol: float = 1e-8

    def __post_init__(self):
        if not (0.0 < self.q < 1.0):
            raise DomainError(f"q must satisfy 0 < q < 1, got {self.q}")
        if int(self.trunc_depth) != self.trunc_depth or self.trunc_depth < 16:
            raise DomainError(f"trunc_depth must be an integer >= 16, got {self.trunc_depth}")
        if not self.tail_tol > 0 or not self.cmp_tol > 0:
            raise DomainError("tail_tol and cmp_tol must be strictly positive")

    @property
    def base(self) -> float:
        """Working lattice base sqrt(q)."""
        return math.sqrt(self.q)

    def with_overrides(self, **kw) -> "QContext":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    @classmethod
    def from_env(cls, q: float, **overrides) -> tuple["QContext", dict]:
        """Build a context, letting QENSEMBLE_* environment variables set defaults.

        Returns the context and the dict of values taken from the environment,
        so callers can echo them.
        """
        from_env = {}
        for field, (var, conv) in _ENV_KEYS.items():
            if var in os.environ:
                from_env[field] = conv(os.environ[var])
        kw = dict(from_env)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(q=q, **kw), from_env


@dataclass(frozen=True, order=True)
class LatticePoint:
    """A point ``endpoint * q**(k/2)`` identified by its anchor and exponent numerator."""

    endpoint: float
    k: int

    def value(self, q: float) -> float:
        return self.endpoint * math.sqrt(q) ** self.k

    @property
    def parity(self) -> str:
        return "integer" if self.k % 2 == 0 else "half"

    @property
    def is_integer(self) -> bool:
        return self.k % 2 == 0


def q_bracket(n: float, q: float) -> float:
    """q-number [n]_q = (1 - q**n) / (1 - q)."""
    _check_q(q)
    return (1.0 - q**n) / (1.0 - q)


def q_poch_finite(a: float, q: float, n: int) -> float:
    """Finite Pochhammer symbol (a; q)_n."""
    _check_q(q)
    if n < 0 or int(n) != n:
        raise DomainError(f"n must be a nonnegative integer, got {n}")
    out = 1.0
    for i in range(int(n)):
        out *= 1.0 - a * q**i
    return out


def _poch_terms(amax: float, base: float, ctx: QContext) -> int:
    """Number of factors after which (a; base)_inf has converged to tail_tol."""
    if amax == 0.0:
        return 1
    # need |a| base^M < tail_tol and |a| base^M / (1 - base) < tail_tol
    target = ctx.tail_tol * (1.0 - base) / amax
    if target >= 1.0:
        return 1
    m = int(math.ceil(math.log(target) / math.log(base))) + 1
    if m > ctx.trunc_depth:
        raise NonConvergent(
            f"(a; {base:g})_inf with |a|={amax:g} needs {m} factors > trunc_depth {ctx.trunc_depth}"
        )
    return max(m, 1)


def q_poch_infinite(a, ctx: QContext, base: float | None = None):
    """Infinite Pochhammer symbol (a; base)_inf, base defaulting to ctx.q.

    Accepts a scalar or an array of ``a`` values.
    """
    base = ctx.q if base is None else base
    _check_q(base)
    arr = np.asarray(a, dtype=float)
    if arr.size == 0:
        return arr.copy()
    m = _poch_terms(float(np.max(np.abs(arr))), base, ctx)
    powers = base ** np.arange(m)
    out = np.prod(1.0 - arr[..., None] * powers, axis=-1)
    return float(out) if np.ndim(a) == 0 else out


def q_poch_general(a, nu: float, ctx: QContext, base: float | None = None):
    """Pochhammer symbol of real order, (a; base)_inf / (a base**nu; base)_inf."""
    base = ctx.q if base is None else base
    if nu == 0:
        return 1.0 if np.ndim(a) == 0 else np.ones_like(np.asarray(a, dtype=float))
    if nu > 0 and float(nu).is_integer():
        arr = np.asarray(a, dtype=float)
        powers = base ** np.arange(int(nu))
        out = np.prod(1.0 - arr[..., None] * powers, axis=-1)
        return float(out) if np.ndim(a) == 0 else out
    arr = np.asarray(a, dtype=float)
    shifted = arr * base**nu
    _check_vanishing(shifted, base)
    out = np.asarray(q_poch_infinite(arr, ctx, base)) / np.asarray(q_poch_infinite(shifted, ctx, base))
    return float(out) if np.ndim(a) == 0 else out


def _check_vanishing(c, base):
    # (c; base)_inf has a zero factor iff c = base^{-i} for some integer i >= 0
    c = np.atleast_1d(c)
    pos = c > 0
    if not np.any(pos):
        return
    i = -np.log(c[pos]) / math.log(base)
    near = np.abs(i - np.round(i)) < 1e-12
    if np.any(near & (np.round(i) >= 0)):
        raise DivisionByVanishingProduct("denominator (a q^nu; q)_inf has a vanishing factor")


def q_gamma(x: float, ctx: QContext) -> float:
    """q-Gamma function (q; q)_inf (1 - q)**(1 - x) / (q**x; q)_inf."""
    if x <= 0 and float(x).is_integer():
        raise PoleError(f"q-Gamma has a pole at x = {x}")
    q = ctx.q
    return q_poch_infinite(q, ctx) * (1.0 - q) ** (1.0 - x) / q_poch_infinite(q**x, ctx)


def _eval(f, x: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(f(x), dtype=float)
        if out.shape == x.shape:
            return out
    except Exception:
        pass
    return np.array([float(f(v)) for v in x])


_CHUNK = 16


def _anchored_sum(f, anchor: float, base: float, ctx: QContext, step: int = 1) -> float:
    """(1 - base) * sum_n anchor*base^(step*n) f(anchor*base^(step*n)), n >= 0, adaptively truncated.

    ``step = -1`` walks away from zero (used for the outer half of bilateral sums,
    starting one step out).
    """
    acc = 0.0
    n0 = 0 if step > 0 else 1
    prev_mag = None
    while True:
        n = np.arange(n0, n0 + _CHUNK)
        if n[-1] > ctx.trunc_depth:
            raise NonConvergent(f"Jackson sum did not converge within {ctx.trunc_depth} terms")
        x = anchor * base ** (step * n)
        terms = (1.0 - base) * x * _eval(f, x)
        if not np.all(np.isfinite(terms)):
            raise NonConvergent("non-finite term in Jackson sum")
        acc += float(np.sum(terms))
        mags = np.abs(terms)
        last = float(np.max(mags[-4:]))
        ratio = None
        if prev_mag is not None and prev_mag > 0:
            ratio = (last / prev_mag) ** (1.0 / _CHUNK)
        prev_mag = last
        if last == 0.0:
            if np.all(mags == 0.0):
                return acc
            continue
        if ratio is not None and ratio < 1.0:
            tail = last * ratio / (1.0 - ratio)
            if tail <= ctx.tail_tol * abs(acc):
                return acc
        n0 += _CHUNK


def jackson_integral(f, b: float, base: float, ctx: QContext) -> float:
    """Jackson integral from 0 to b > 0 with lattice ratio ``base``."""
    if not b > 0:
        raise DomainError("upper limit b must be positive")
    _check_q(base)
    return _anchored_sum(f, b, base, ctx)


def jackson_integral_bilateral(f, base: float, ctx: QContext) -> float:
    """Jackson integral over (0, inf): sum over all n in Z of base^n f(base^n)."""
    _check_q(base)
    return _anchored_sum(f, 1.0, base, ctx) + _anchored_sum(f, 1.0, base, ctx, step=-1)


def jackson_integral_two_sided(f, a: float, b: float, base: float, ctx: QContext) -> float:
    """Jackson integral from a < 0 to b > 0, i.e. int_0^b minus int_0^a."""
    if not (a < 0 < b):
        raise DomainError("two-sided integral needs a < 0 < b")
    _check_q(base)
    return _anchored_sum(f, b, base, ctx) - _anchored_sum(f, a, base, ctx)


def q_difference(f, x: float, base: float) -> float:
    """q-difference quotient (f(x) - f(base x)) / ((1 - base) x)."""
    if x == 0:
        raise ZeroArgument("q-difference undefined at x = 0")
    return (f(x) - f(base * x)) / ((1.0 - base) * x)


def _check_q(q):
    if not (0.0 < q < 1.0):
        raise DomainError(f"base must satisfy 0 < q < 1, got {q}")
