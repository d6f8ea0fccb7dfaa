"""Cyclic Jacobi rotation kernel for dense symmetric eigenproblems.

The sweep loop is the hottest code in the package, so it exists twice:
a numba ``@njit`` version and a pure-numpy fallback.  The fallback is
selected by setting the environment variable ``OVERSMOOTH_NUMBA=0``
(any of ``0``, ``false``, ``off``) before import, or automatically when
numba is not importable.  ``benchmarks/bench_jacobi.py`` compares both.
"""

import math
import os

import numpy as np

from .errors import ConvergenceError

# Convergence: off-diagonal Frobenius norm below OFFDIAG_TOL * ||M||_F.
OFFDIAG_TOL = 1e-12
MAX_SWEEPS = 100


def _numba_enabled() -> bool:
    flag = os.environ.get("OVERSMOOTH_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off")


def _sweep_numpy(a, v, tol, max_sweeps):
    """Pure-numpy cyclic Jacobi sweeps, in place. Returns sweep count or -1."""
    n = a.shape[0]
    for sweep in range(max_sweeps + 1):
        off = math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))
        if off <= tol:
            return sweep
        if sweep == max_sweeps:
            return -1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                col_p = c * a[:, p] - s * a[:, q]
                col_q = s * a[:, p] + c * a[:, q]
                a[:, p] = col_p
                a[:, q] = col_q
                row_p = c * a[p, :] - s * a[q, :]
                row_q = s * a[p, :] + c * a[q, :]
                a[p, :] = row_p
                a[q, :] = row_q
                vp = c * v[:, p] - s * v[:, q]
                vq = s * v[:, p] + c * v[:, q]
                v[:, p] = vp
                v[:, q] = vq
    return -1


def _onesided_numpy(u, tol, max_sweeps):
    """One-sided Jacobi column orthogonalization, in place.

    On return the columns of ``u`` are mutually orthogonal; their norms
    are the singular values of the input.  Returns sweeps or -1.
    """
    k = u.shape[1]
    for sweep in range(max_sweeps + 1):
        done = True
        for i in range(k - 1):
            for j in range(i + 1, k):
                d = float(u[:, i] @ u[:, j])
                a = float(u[:, i] @ u[:, i])
                b = float(u[:, j] @ u[:, j])
                if abs(d) <= tol * math.sqrt(a * b):
                    continue
                done = False
                theta = (b - a) / (2.0 * d)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                ui = c * u[:, i] - s * u[:, j]
                uj = s * u[:, i] + c * u[:, j]
                u[:, i] = ui
                u[:, j] = uj
        if done:
            return sweep
    return -1


if _numba_enabled():
    try:
        from numba import njit

        @njit(cache=True)
        def _sweep_numba(a, v, tol, max_sweeps):  # pragma: no cover - compiled
            n = a.shape[0]
            for sweep in range(max_sweeps + 1):
                off = 0.0
                for p in range(n - 1):
                    for q in range(p + 1, n):
                        off += a[p, q] * a[p, q]
                off = math.sqrt(2.0 * off)
                if off <= tol:
                    return sweep
                if sweep == max_sweeps:
                    return -1
                for p in range(n - 1):
                    for q in range(p + 1, n):
                        apq = a[p, q]
                        if apq == 0.0:
                            continue
                        theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                        t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                        if theta < 0.0:
                            t = -t
                        c = 1.0 / math.sqrt(t * t + 1.0)
                        s = t * c
                        for i in range(n):
                            aip = a[i, p]
                            aiq = a[i, q]
                            a[i, p] = c * aip - s * aiq
                            a[i, q] = s * aip + c * aiq
                        for i in range(n):
                            api = a[p, i]
                            aqi = a[q, i]
                            a[p, i] = c * api - s * aqi
                            a[q, i] = s * api + c * aqi
                        for i in range(n):
                            vip = v[i, p]
                            viq = v[i, q]
                            v[i, p] = c * vip - s * viq
                            v[i, q] = s * vip + c * viq
            return -1

        @njit(cache=True)
        def _onesided_numba(u, tol, max_sweeps):  # pragma: no cover - compiled
            n, k = u.shape
            for sweep in range(max_sweeps + 1):
                done = True
                for i in range(k - 1):
                    for j in range(i + 1, k):
                        d = 0.0
                        a = 0.0
                        b = 0.0
                        for r in range(n):
                            d += u[r, i] * u[r, j]
                            a += u[r, i] * u[r, i]
                            b += u[r, j] * u[r, j]
                        if abs(d) <= tol * math.sqrt(a * b):
                            continue
                        done = False
                        theta = (b - a) / (2.0 * d)
                        t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                        if theta < 0.0:
                            t = -t
                        c = 1.0 / math.sqrt(t * t + 1.0)
                        s = t * c
                        for r in range(n):
                            ui = u[r, i]
                            uj = u[r, j]
                            u[r, i] = c * ui - s * uj
                            u[r, j] = s * ui + c * uj
                if done:
                    return sweep
            return -1

        _sweep = _sweep_numba
        _onesided = _onesided_numba
        BACKEND = "numba"
    except ImportError:
        _sweep = _sweep_numpy
        _onesided = _onesided_numpy
        BACKEND = "numpy"
else:
    _sweep = _sweep_numpy
    _onesided = _onesided_numpy
    BACKEND = "numpy"


def jacobi_eigh(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a dense symmetric matrix by cyclic Jacobi.

    Returns (values, vectors) with vectors[:, i] the unit eigenvector for
    values[i], in no particular order.  Raises ConvergenceError after
    MAX_SWEEPS sweeps without convergence.
    """
    a = np.array(m, dtype=np.float64, order="C", copy=True)
    n = a.shape[0]
    v = np.eye(n)
    if n == 0:
        return np.empty(0), v
    tol = OFFDIAG_TOL * math.sqrt(float(np.sum(a * a)))
    sweeps = _sweep(a, v, tol, MAX_SWEEPS)
    if sweeps < 0:
        off = math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))
        raise ConvergenceError(
            f"Jacobi did not converge in {MAX_SWEEPS} sweeps "
            f"(n={n}, off-diagonal norm {off:.3e}, tolerance {tol:.3e})"
        )
    return np.diag(a).copy(), v


# One-sided orthogonality threshold: |u_i . u_j| <= ORTHO_TOL ||u_i|| ||u_j||.
ORTHO_TOL = 1e-14


def jacobi_singular_values(x: np.ndarray) -> np.ndarray:
    """Singular values of a dense matrix by one-sided Jacobi, descending.

    One-sided Jacobi retains relative accuracy for small singular
    values, which the numerical-rank threshold depends on.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return np.zeros(min(x.shape))
    u = np.array(x if x.shape[0] >= x.shape[1] else x.T, order="F", copy=True)
    sweeps = _onesided(u, ORTHO_TOL, MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceError(
            f"one-sided Jacobi did not converge in {MAX_SWEEPS} sweeps "
            f"(shape {x.shape})")
    sigma = np.sqrt(np.sum(u * u, axis=0))
    return np.sort(sigma)[::-1]
