"""Dense LU solve and nonsymmetric eigenvalues.

Eigenvalues follow the classical route: diagonal balancing, Householder
reduction to upper Hessenberg form, then the Francis double-shift QR iteration
with deflation (the EISPACK ``hqr`` scheme). Kernels are compiled with numba;
matrices are plain 2-D float arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import NoConvergence, SingularMatrix

PIVOT_RTOL = 1e-14
MAX_DIM = 2000


@dataclass(frozen=True)
class EigenResult:
    eigenvalues: np.ndarray  # complex, sorted by descending real part
    iterations: int
    converged: bool


def _as_square(A):
    A = np.array(A, dtype=float, order="C", copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


# --- LU ---------------------------------------------------------------------


@numba.njit(cache=True)
def _lu_factor(a, tol):
    n = a.shape[0]
    piv = np.arange(n)
    for k in range(n):
        p = k
        big = abs(a[k, k])
        for i in range(k + 1, n):
            if abs(a[i, k]) > big:
                big = abs(a[i, k])
                p = i
        if big <= tol:
            return piv, k
        if p != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[p, j]
                a[p, j] = tmp
            tmp_i = piv[k]
            piv[k] = piv[p]
            piv[p] = tmp_i
        inv = 1.0 / a[k, k]
        for i in range(k + 1, n):
            f = a[i, k] * inv
            a[i, k] = f
            if f != 0.0:
                for j in range(k + 1, n):
                    a[i, j] -= f * a[k, j]
    return piv, -1


@numba.njit(cache=True)
def _lu_substitute(lu, piv, b):
    n = lu.shape[0]
    x = np.empty(n)
    for i in range(n):
        x[i] = b[piv[i]]
    for i in range(n):
        s = x[i]
        for j in range(i):
            s -= lu[i, j] * x[j]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for j in range(i + 1, n):
            s -= lu[i, j] * x[j]
        x[i] = s / lu[i, i]
    return x


class LU:
    """Partial-pivoting LU factorization, reusable for many right-hand sides."""

    def __init__(self, A):
        a = _as_square(A)
        norm = float(np.abs(a).sum(axis=1).max()) if a.size else 0.0
        piv, bad = _lu_factor(a, PIVOT_RTOL * norm)
        if bad >= 0 or norm == 0.0:
            raise SingularMatrix(f"negligible pivot in column {max(bad, 0)}")
        self.lu = a
        self.piv = piv

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.ndim == 1:
            return _lu_substitute(self.lu, self.piv, b)
        return np.column_stack([_lu_substitute(self.lu, self.piv, col) for col in b.T])


def lu_solve(A, b) -> np.ndarray:
    """Solve A x = b by LU with partial pivoting."""
    return LU(A).solve(b)


# --- eigenvalues ------------------------------------------------------------


@numba.njit(cache=True)
def _balance(a):
    n = a.shape[0]
    radix = 2.0
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(n):
            r = 0.0
            c = 0.0
            for j in range(n):
                if j != i:
                    c += abs(a[j, i])
                    r += abs(a[i, j])
            if c != 0.0 and r != 0.0:
                g = r / radix
                f = 1.0
                s = c + r
                while c < g:
                    f *= radix
                    c *= sqrdx
                g = r * radix
                while c > g:
                    f /= radix
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    for j in range(n):
                        a[i, j] *= g
                    for j in range(n):
                        a[j, i] *= f


@numba.njit(cache=True)
def _hessenberg(a):
    n = a.shape[0]
    for k in range(n - 2):
        alpha = 0.0
        for i in range(k + 1, n):
            alpha += a[i, k] * a[i, k]
        alpha = np.sqrt(alpha)
        if alpha == 0.0:
            continue
        if a[k + 1, k] > 0:
            alpha = -alpha
        v = np.zeros(n)
        for i in range(k + 1, n):
            v[i] = a[i, k]
        v[k + 1] -= alpha
        vnorm2 = 0.0
        for i in range(k + 1, n):
            vnorm2 += v[i] * v[i]
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        # A <- H A
        for j in range(k, n):
            s = 0.0
            for i in range(k + 1, n):
                s += v[i] * a[i, j]
            s *= beta
            for i in range(k + 1, n):
                a[i, j] -= s * v[i]
        # A <- A H
        for i in range(n):
            s = 0.0
            for j in range(k + 1, n):
                s += a[i, j] * v[j]
            s *= beta
            for j in range(k + 1, n):
                a[i, j] -= s * v[j]
        a[k + 1, k] = alpha
        for i in range(k + 2, n):
            a[i, k] = 0.0


@numba.njit(cache=True)
def _hqr(a, max_iter):
    """Eigenvalues of an upper Hessenberg matrix (destroys ``a``).

    Returns (wr, wi, total_iterations, converged).
    """
    n = a.shape[0]
    wr = np.full(n, np.nan)
    wi = np.full(n, np.nan)
    eps = np.finfo(np.float64).eps
    anorm = 0.0
    for i in range(n):
        for j in range(max(i - 1, 0), n):
            anorm += abs(a[i, j])
    nn = n - 1
    t = 0.0
    total = 0
    x = y = z = w = p = q = r = s = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l > 0:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) <= eps * s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
            else:
                y = a[nn - 1, nn - 1]
                w = a[nn, nn - 1] * a[nn - 1, nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = np.sqrt(abs(q))
                    x += t
                    if q >= 0.0:
                        z = p + (z if p >= 0 else -z)
                        wr[nn - 1] = x + z
                        wr[nn] = x + z
                        if z != 0.0:
                            wr[nn] = x - w / z
                        wi[nn - 1] = 0.0
                        wi[nn] = 0.0
                    else:
                        wr[nn - 1] = x + p
                        wr[nn] = x + p
                        wi[nn - 1] = z
                        wi[nn] = -z
                    nn -= 2
                else:
                    if total >= max_iter:
                        return wr, wi, total, False
                    if its > 0 and its % 10 == 0:
                        # exceptional shift
                        t += x
                        for i in range(nn + 1):
                            a[i, i] -= x
                        s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                        x = 0.75 * s
                        y = x
                        w = -0.4375 * s * s
                    its += 1
                    total += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m, m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                        q = a[m + 1, m + 1] - z - r - s
                        r = a[m + 2, m + 1]
                        s = abs(p) + abs(q) + abs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                        v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                        if u <= eps * v:
                            break
                        m -= 1
                    for i in range(m, nn - 1):
                        a[i + 2, i] = 0.0
                        if i != m:
                            a[i + 2, i - 1] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k, k - 1]
                            q = a[k + 1, k - 1]
                            r = 0.0
                            if k + 1 != nn:
                                r = a[k + 2, k - 1]
                            x = abs(p) + abs(q) + abs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = np.sqrt(p * p + q * q + r * r)
                        if p < 0:
                            s = -s
                        if s != 0.0:
                            if k == m:
                                if l != m:
                                    a[k, k - 1] = -a[k, k - 1]
                            else:
                                a[k, k - 1] = -s * x
                            p += s
                            x = p / s
                            y = q / s
                            z = r / s
                            q /= p
                            r /= p
                            for j in range(k, nn + 1):
                                p = a[k, j] + q * a[k + 1, j]
                                if k + 1 != nn:
                                    p += r * a[k + 2, j]
                                    a[k + 2, j] -= p * z
                                a[k + 1, j] -= p * y
                                a[k, j] -= p * x
                            mmin = nn if nn < k + 3 else k + 3
                            for i in range(l, mmin + 1):
                                p = x * a[i, k] + y * a[i, k + 1]
                                if k + 1 != nn:
                                    p += z * a[i, k + 2]
                                    a[i, k + 2] -= p * r
                                a[i, k + 1] -= p * q
                                a[i, k] -= p
            if not (l < nn - 1):
                break
    return wr, wi, total, True


def sort_eigenvalues(values) -> np.ndarray:
    """Descending real part; ties broken by descending imaginary part."""
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((-values.imag, -values.real))
    return values[order]


def eigenvalues(A, balance: bool = True, raise_on_failure: bool = True) -> EigenResult:
    """All eigenvalues of a real square matrix.

    At most 30 n double-shift sweeps are performed. On failure NoConvergence is
    raised carrying the partial result (unfound eigenvalues are NaN), unless
    ``raise_on_failure`` is False.
    """
    a = _as_square(A)
    n = a.shape[0]
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds {MAX_DIM}")
    if n == 0:
        return EigenResult(np.empty(0, dtype=complex), 0, True)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if balance:
        _balance(a)
    _hessenberg(a)
    wr, wi, its, ok = _hqr(a, 30 * n)
    result = EigenResult(sort_eigenvalues(wr + 1j * wi), int(its), bool(ok))
    if not ok and raise_on_failure:
        raise NoConvergence(f"QR iteration did not converge in {30 * n} sweeps", result)
    return result
