"""Hot loops with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and ``QENSEMBLE_DISABLE_NUMBA`` is
not set to a true value.  Both paths implement the same algorithms so the
benchmark in ``benchmarks/bench_accel.py`` can compare them directly.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("QENSEMBLE_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on the environment
    HAVE_NUMBA = False

    def njit(*args, **kw):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


# ---------------------------------------------------------------- Pfaffian


def _pfaffian_numpy(A):
    A = np.array(A, copy=True)
    n = A.shape[0]
    res = A.dtype.type(1.0)
    for k in range(0, n - 1, 2):
        sub = np.abs(A[k:, k:])
        flat = int(np.argmax(sub))
        i, j = divmod(flat, n - k)
        i += k
        j += k
        if sub[i - k, j - k] == 0:
            return A.dtype.type(0.0)
        if i != k:
            A[[k, i]] = A[[i, k]]
            A[:, [k, i]] = A[:, [i, k]]
            res = -res
            if j == k:
                j = i
        if j != k + 1:
            A[[k + 1, j]] = A[[j, k + 1]]
            A[:, [k + 1, j]] = A[:, [j, k + 1]]
            res = -res
        piv = A[k, k + 1]
        res = res * piv
        tau = A[k, k + 2:] / piv
        col = A[k + 2:, k + 1].copy()
        A[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return res


@njit(cache=True)
def _pfaffian_numba(A):
    A = A.copy()
    n = A.shape[0]
    res = A[0, 0] * 0 + 1
    for k in range(0, n - 1, 2):
        best = -1.0
        bi = k
        bj = k + 1
        for a in range(k, n):
            for b in range(a + 1, n):
                v = abs(A[a, b])
                if v > best:
                    best = v
                    bi = a
                    bj = b
        if best == 0.0:
            return res * 0
        if bi != k:
            for t in range(n):
                tmp = A[k, t]
                A[k, t] = A[bi, t]
                A[bi, t] = tmp
            for t in range(n):
                tmp = A[t, k]
                A[t, k] = A[t, bi]
                A[t, bi] = tmp
            res = -res
            if bj == k:
                bj = bi
        if bj != k + 1:
            for t in range(n):
                tmp = A[k + 1, t]
                A[k + 1, t] = A[bj, t]
                A[bj, t] = tmp
            for t in range(n):
                tmp = A[t, k + 1]
                A[t, k + 1] = A[t, bj]
                A[t, bj] = tmp
            res = -res
        piv = A[k, k + 1]
        res = res * piv
        for a in range(k + 2, n):
            ta = A[k, a] / piv
            ca = A[a, k + 1]
            for b in range(k + 2, n):
                A[a, b] += ta * A[b, k + 1] - ca * A[k, b] / piv
    return res


def pfaffian_kernel(A):
    """Pfaffian of a skew matrix by skew Gaussian elimination with full pivoting."""
    A = np.asarray(A)
    if A.shape[0] == 0:
        return A.dtype.type(1.0) if A.dtype.kind in "fc" else 1.0
    if HAVE_NUMBA:
        return _pfaffian_numba(np.ascontiguousarray(A))
    return _pfaffian_numpy(A)


# --------------------------------------------------- inverse of R on a branch


def _epsilon_numpy(even, logwt, psi):
    n = psi.shape[0]
    sgn = np.where(even, -1.0, 1.0)
    L = np.concatenate(([0.0], np.cumsum(sgn * logwt)))[:n]
    diff = L[None, :] - L[:, None]  # diff[a, j] = L[j] - L[a]
    idx = np.arange(n)
    later = idx[None, :] > idx[:, None]
    with np.errstate(over="ignore", under="ignore"):
        fwd = np.where(later & ~even[None, :], np.exp(np.where(later, diff, 0.0)), 0.0)
        bwd = np.where(~later & (idx[None, :] != idx[:, None]) & even[None, :],
                       np.exp(np.where(~later, -diff, 0.0)), 0.0)
    out = np.where(even, fwd @ psi, -(bwd @ psi))
    return out


@njit(cache=True)
def _epsilon_numba(even, logwt, psi):
    n = psi.shape[0]
    L = np.zeros(n)
    for i in range(1, n):
        s = -1.0 if even[i - 1] else 1.0
        L[i] = L[i - 1] + s * logwt[i - 1]
    out = np.zeros(n)
    for a in range(n):
        acc = 0.0
        if even[a]:
            for j in range(a + 1, n):
                if not even[j]:
                    acc += np.exp(L[j] - L[a]) * psi[j]
            out[a] = acc
        else:
            for j in range(a):
                if even[j]:
                    acc += np.exp(L[a] - L[j]) * psi[j]
            out[a] = -acc
    return out


def epsilon_branch(even, logwt, psi):
    """Apply the one-branch inverse of R to lattice values ``psi``.

    Points are ordered by increasing exponent numerator; ``even`` marks integer
    points and ``logwt[i]`` is log of f(r x_i) rho(r x_i).
    """
    even = np.asarray(even, dtype=np.bool_)
    logwt = np.asarray(logwt, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if HAVE_NUMBA:
        return _epsilon_numba(even, logwt, psi)
    return _epsilon_numpy(even, logwt, psi)


# ------------------------------------------------------ nested Jackson sums


@njit(cache=True)
def _nested_numba(N, q, r, hi, lo, has_lo, j1_lo, j1_hi, depth, om_hi, off_hi, om_lo):
    # level state: branch (0 hi, 1 lo), exponent k, signed Jackson weight
    zs = np.zeros(N)
    oms = np.zeros(N)
    jws = np.zeros(N)
    brs = np.zeros(N, dtype=np.int64)
    ks = np.zeros(N, dtype=np.int64)
    cnt = np.zeros(N, dtype=np.int64)
    lim = np.zeros(N, dtype=np.int64)
    total = 0.0
    level = 0
    n_up1 = j1_hi - j1_lo
    lim[0] = n_up1 + (depth if has_lo else 0)
    cnt[0] = -1
    while level >= 0:
        cnt[level] += 1
        if cnt[level] >= lim[level]:
            level -= 1
            continue
        c = cnt[level]
        if level == 0:
            if c < n_up1:
                j = j1_lo + c
                brs[0] = 0
                ks[0] = 2 * j
                zs[0] = hi * r ** ks[0]
                jws[0] = (1.0 - q) * zs[0]
            else:
                j = c - n_up1
                brs[0] = 1
                ks[0] = 2 * j
                zs[0] = lo * r ** ks[0]
                jws[0] = -(1.0 - q) * zs[0]
        else:
            if c < depth:
                brs[level] = brs[level - 1]
                ks[level] = ks[level - 1] + 1 + 2 * c
                anchor = hi if brs[level] == 0 else lo
                zs[level] = anchor * r ** ks[level]
                jws[level] = (1.0 - q) * zs[level]
            else:
                j = c - depth
                brs[level] = 1
                ks[level] = 2 * j
                zs[level] = lo * r ** ks[level]
                jws[level] = -(1.0 - q) * zs[level]
        if brs[level] == 0:
            oms[level] = om_hi[ks[level] + off_hi]
        else:
            oms[level] = om_lo[ks[level]]
        if level == N - 1:
            term = 1.0
            for a in range(N):
                term *= oms[a] * jws[a]
                for b in range(a + 1, N):
                    term *= zs[a] - zs[b]
            total += term
        else:
            level += 1
            lim[level] = depth + (depth if has_lo else 0)
            cnt[level] = -1
    return total


def _nested_numpy(N, q, r, hi, lo, has_lo, j1_lo, j1_hi, depth, om_hi, off_hi, om_lo):
    jl = np.arange(depth)
    lo_k = 2 * jl
    lo_z = lo * r ** lo_k if has_lo else np.zeros(0)
    lo_w = -(1.0 - q) * lo_z
    lo_om = om_lo[lo_k] if has_lo else np.zeros(0)

    def candidates(prev):
        if prev is None:
            j = np.arange(j1_lo, j1_hi)
            k = 2 * j
            z = hi * r ** k
            br = np.zeros(len(k), dtype=int)
            w = (1.0 - q) * z
            om = om_hi[k + off_hi]
        else:
            pb, pk = prev
            k = pk + 1 + 2 * jl
            anchor = hi if pb == 0 else lo
            z = anchor * r ** k
            w = (1.0 - q) * z
            om = om_hi[k + off_hi] if pb == 0 else om_lo[k]
            br = np.full(len(k), pb)
        if has_lo:
            k = np.concatenate((k, lo_k))
            z = np.concatenate((z, lo_z))
            w = np.concatenate((w, lo_w))
            om = np.concatenate((om, lo_om))
            br = np.concatenate((br, np.ones(depth, dtype=int)))
        return br, k, z, w * om

    def rec(level, prev, zs, weight):
        br, k, z, wo = candidates(prev)
        vand = np.ones(len(z))
        for zp in zs:
            vand *= zp - z
        if level == N - 1:
            return weight * float(np.sum(vand * wo))
        tot = 0.0
        for i in range(len(z)):
            f = weight * vand[i] * wo[i]
            if f == 0.0:
                continue
            tot += rec(level + 1, (br[i], k[i]), zs + [z[i]], f)
        return tot

    return rec(0, None, [], 1.0)


def nested_sum(N, q, hi, lo, j1_lo, j1_hi, depth, om_hi, off_hi, om_lo):
    """Signed nested Jackson sum of the Vandermonde-times-omega density.

    ``om_hi[k + off_hi]`` and ``om_lo[k]`` tabulate omega on the two anchors at
    lattice exponent k.  ``lo == 0`` means no lower anchor.
    """
    r = np.sqrt(q)
    has_lo = lo != 0.0
    args = (int(N), float(q), float(r), float(hi), float(lo), bool(has_lo), int(j1_lo), int(j1_hi),
            int(depth), np.asarray(om_hi, dtype=float), int(off_hi),
            np.asarray(om_lo if has_lo else np.zeros(1), dtype=float))
    if HAVE_NUMBA:
        return _nested_numba(*args)
    return _nested_numpy(*args)


# ------------------------------------------------ symmetric density sums


@njit(cache=True)
def _pf_small(X, m):
    if m == 0:
        return 1.0
    if m == 2:
        return X[0, 1]
    return X[0, 1] * X[2, 3] - X[0, 2] * X[1, 3] + X[0, 3] * X[1, 2]


@njit(cache=True)
def _density_numba(S, Fv, x, om, w, fixed, pool, nfree, odd):
    nfix = fixed.shape[0]
    N = nfix + nfree
    m = N + 1 if odd else N
    idx = np.zeros(N, dtype=np.int64)
    for a in range(nfix):
        idx[a] = fixed[a]
    P = pool.shape[0]
    ctr = np.zeros(max(nfree, 1), dtype=np.int64)
    X = np.zeros((m, m))
    total = 0.0
    done = nfree == 0
    first = True
    while first or not done:
        first = False
        ok = True
        wt = 1.0
        for t in range(nfree):
            idx[nfix + t] = pool[ctr[t]]
            wt *= w[pool[ctr[t]]]
        for a in range(N):
            for b in range(a + 1, N):
                if idx[a] == idx[b]:
                    ok = False
        if ok:
            for a in range(N):
                for b in range(N):
                    X[a, b] = S[idx[a], idx[b]]
                if odd:
                    X[a, N] = Fv[idx[a]]
                    X[N, a] = -Fv[idx[a]]
            if odd:
                X[N, N] = 0.0
            val = _pf_small(X, m) * wt
            for a in range(N):
                val *= om[idx[a]]
                for b in range(a + 1, N):
                    val *= x[idx[b]] - x[idx[a]]
            total += val
        if nfree == 0:
            break
        t = nfree - 1
        while t >= 0:
            ctr[t] += 1
            if ctr[t] < P:
                break
            ctr[t] = 0
            t -= 1
        if t < 0:
            done = True
    return total


def _density_numpy(S, Fv, x, om, w, fixed, pool, nfree, odd):
    import itertools

    nfix = len(fixed)
    N = nfix + nfree
    m = N + 1 if odd else N
    total = 0.0
    outer = itertools.product(range(len(pool)), repeat=max(nfree - 1, 0))
    for head in outer:
        head_idx = [pool[h] for h in head]
        base_idx = list(fixed) + head_idx
        if len(set(base_idx)) < len(base_idx):
            continue
        if nfree == 0:
            last = np.array([-1])
            cols = [np.array([i]) for i in base_idx]
            wt = np.ones(1)
        else:
            last = np.array([p for p in pool if p not in base_idx])
            cols = [np.full(len(last), i) for i in base_idx] + [last]
            wt = np.prod([w[i] for i in head_idx]) * w[last]
        K = len(cols[0])
        X = np.zeros((K, m, m))
        for a in range(N):
            for b in range(N):
                X[:, a, b] = S[cols[a], cols[b]]
            if odd:
                X[:, a, N] = Fv[cols[a]]
                X[:, N, a] = -Fv[cols[a]]
        if m == 2:
            pf = X[:, 0, 1]
        elif m == 4:
            pf = X[:, 0, 1] * X[:, 2, 3] - X[:, 0, 2] * X[:, 1, 3] + X[:, 0, 3] * X[:, 1, 2]
        else:
            pf = np.ones(K)
        val = pf * wt
        for a in range(N):
            val = val * om[cols[a]]
            for b in range(a + 1, N):
                val = val * (x[cols[b]] - x[cols[a]])
        total += float(np.sum(val))
    return total


def density_sum(S, Fv, x, om, w, fixed, pool, nfree, odd):
    """Sum the symmetric Pfaffian density over ordered tuples of distinct pool points.

    The first ``len(fixed)`` variables are pinned; the remaining ``nfree``
    range over ``pool`` with Jackson weights ``w``.  Only particle numbers with
    a Pfaffian block of size at most 4 are supported.
    """
    fixed = np.asarray(fixed, dtype=np.int64)
    pool = np.asarray(pool, dtype=np.int64)
    N = len(fixed) + nfree
    if (N + 1 if odd else N) > 4:
        raise ValueError("density_sum supports Pfaffian blocks up to 4x4")
    args = (np.asarray(S, dtype=float), np.asarray(Fv, dtype=float), np.asarray(x, dtype=float),
            np.asarray(om, dtype=float), np.asarray(w, dtype=float), fixed, pool, int(nfree), bool(odd))
    if HAVE_NUMBA:
        return _density_numba(*args)
    return _density_numpy(*args)
