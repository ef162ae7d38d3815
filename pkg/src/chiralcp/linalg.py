"""Small dense linear algebra: Jacobi SVD, LU, tridiagonal QL."""

from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError, DomainError, SingularMatrixError

JACOBI_MAX_SWEEPS = 60
_JACOBI_TOL = 1e-15


def _jacobi_sweeps(a: np.ndarray) -> np.ndarray:
    """One-sided Jacobi on the columns of a batch of matrices, shape (B, n, n).

    Orthogonalises columns in place; returns squared column norms.
    """
    n = a.shape[-1]
    for _ in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                ap = a[:, :, p]
                aq = a[:, :, q]
                alpha = np.sum((ap.conj() * ap).real, axis=1)
                beta = np.sum((aq.conj() * aq).real, axis=1)
                gamma = np.sum(ap.conj() * aq, axis=1)
                mod = np.abs(gamma)
                active = mod > _JACOBI_TOL * np.sqrt(alpha * beta)
                if not np.any(active):
                    continue
                rotated = True
                safe = np.where(active, mod, 1.0)
                phase = np.where(active, gamma / safe, 1.0)
                zeta = (beta - alpha) / (2.0 * safe)
                t = np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                t = np.where(zeta == 0, 1.0, t)
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                aq_t = aq * phase.conj()[:, None]
                new_p = c[:, None] * ap - s[:, None] * aq_t
                new_q = s[:, None] * ap + c[:, None] * aq_t
                a[:, :, p] = new_p
                a[:, :, q] = new_q * phase[:, None]
        if not rotated:
            return np.sum((a.conj() * a).real, axis=1)
    raise ConvergenceError("one-sided Jacobi did not converge in 60 sweeps")


def svd_squared_batch(mats) -> np.ndarray:
    """Squared singular values (descending) for a stack of square matrices."""
    a = np.array(mats, dtype=complex, copy=True)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise DomainError("svd_squared_batch needs an array of shape (B, n, n)")
    if a.shape[1] > 256:
        raise DomainError("matrix size above 256")
    vals = _jacobi_sweeps(a)
    return -np.sort(-vals, axis=1)


def svd_squared(m) -> np.ndarray:
    """Squared singular values of a square complex matrix, descending."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("svd_squared needs a square matrix")
    return svd_squared_batch(a[None])[0]


def lu_factor(m):
    """Partial-pivot LU. Returns (lu, perm, sign) with P m = L U packed in lu."""
    a = np.array(m, dtype=complex, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("LU needs a square matrix")
    n = a.shape[0]
    perm = np.arange(n)
    sign = 1
    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if a[piv, k] == 0:
            raise SingularMatrixError("zero pivot in LU factorisation")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            perm[[k, piv]] = perm[[piv, k]]
            sign = -sign
        a[k + 1:, k] /= a[k, k]
        a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:])
    return a, perm, sign


def logdet_lu(m):
    """(log|det m|, phase) via LU; phase is a unit complex number."""
    try:
        lu, _, sign = lu_factor(m)
    except SingularMatrixError:
        return -math.inf, 0.0
    diag = np.diag(lu)
    logmag = float(np.sum(np.log(np.abs(diag))))
    phase = complex(sign * np.prod(diag / np.abs(diag)))
    return logmag, phase


def det_lu(m) -> complex:
    logmag, phase = logdet_lu(m)
    if logmag == -math.inf:
        return 0.0 + 0.0j
    return phase * math.exp(logmag)


def det_batch(mats) -> np.ndarray:
    """Determinants of a stack (B, n, n) by vectorised partial-pivot elimination."""
    a = np.array(mats, dtype=complex, copy=True)
    b, n, _ = a.shape
    det = np.ones(b, dtype=complex)
    rows = np.arange(b)
    for k in range(n):
        piv = k + np.argmax(np.abs(a[:, k:, k]), axis=1)
        swap = piv != k
        if np.any(swap):
            tmp = a[rows, k, :].copy()
            a[rows, k, :] = a[rows, piv, :]
            a[rows, piv, :] = tmp
            det = np.where(swap, -det, det)
        pivot = a[:, k, k]
        det = det * pivot
        zero = pivot == 0
        safe = np.where(zero, 1.0, pivot)
        factors = a[:, k + 1:, k] / safe[:, None]
        a[:, k + 1:, k + 1:] -= factors[:, :, None] * a[:, k, None, k + 1:]
    return det


def inverse_lu(m) -> np.ndarray:
    """Inverse by LU with partial pivoting; raises on (scaled) singularity."""
    a = np.asarray(m, dtype=complex)
    lu, perm, _ = lu_factor(a)
    n = a.shape[0]
    diag = np.abs(np.diag(lu))
    scale = np.max(np.abs(a)) if a.size else 1.0
    if np.any(diag <= 1e-300 * max(scale, 1e-300)):
        raise SingularMatrixError("matrix is numerically singular")
    inv = np.zeros((n, n), dtype=complex)
    for col in range(n):
        e = np.zeros(n, dtype=complex)
        e[np.where(perm == col)[0][0]] = 1.0
        y = np.zeros(n, dtype=complex)
        for i in range(n):
            y[i] = e[i] - lu[i, :i] @ y[:i]
        x = np.zeros(n, dtype=complex)
        for i in range(n - 1, -1, -1):
            x[i] = (y[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
        inv[:, col] = x
    return inv


def tridiag_eigen(diag, offdiag):
    """Implicit QL on a symmetric tridiagonal matrix.

    Returns (eigenvalues ascending, squared first components of the
    normalised eigenvectors).
    """
    d = np.array(diag, dtype=float, copy=True)
    n = d.size
    if n == 0 or n > 512:
        raise DomainError("tridiag_eigen supports sizes 1..512")
    e = np.zeros(n)
    if n > 1:
        off = np.asarray(offdiag, dtype=float)
        if off.size != n - 1:
            raise DomainError("offdiag must have length len(diag) - 1")
        e[:-1] = off
    z = np.zeros(n)
    z[0] = 1.0
    budget = 50 * n
    used = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= 1e-16 * dd:
                    break
                m += 1
            if m == l:
                break
            used += 1
            if used > budget:
                raise ConvergenceError("tridiagonal QL did not converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zf = z[i + 1]
                z[i + 1] = s * z[i] + c * zf
                z[i] = c * z[i] - s * zf
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    order = np.argsort(d)
    return d[order], (z * z)[order]
