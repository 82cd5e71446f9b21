"""Dense complex linear algebra, complex Newton iteration and 1-D minimization.

These are the kernels used by the spectral analysis. Small matrices (q <= 2)
are handled with closed forms in plain Python complex arithmetic, which is
both exact enough and much faster than a LAPACK round trip when evaluated
thousands of times inside a root search.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InvalidInputError

__all__ = [
    "RootResult",
    "as_complex_matrix",
    "eig_complex",
    "eig2",
    "det_complex",
    "adjugate",
    "newton_complex",
    "minimize_1d",
]

MAX_DENSE_DIM = 64


@dataclass
class RootResult:
    root: complex
    residual: float
    iterations: int
    converged: bool


def as_complex_matrix(M) -> np.ndarray:
    """Validate and copy `M` into a square finite complex array."""
    A = np.array(M, dtype=complex)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    return A


def eig2(a: complex, b: complex, c: complex, d: complex) -> tuple[complex, complex]:
    """Eigenvalues of [[a, b], [c, d]] without cancellation in the small root."""
    half_tr = 0.5 * (a + d)
    disc = cmath.sqrt(0.25 * (a - d) * (a - d) + b * c)
    # pick the sign that adds magnitudes, recover the other root from det
    if (half_tr.real * disc.real + half_tr.imag * disc.imag) >= 0:
        l1 = half_tr + disc
    else:
        l1 = half_tr - disc
    det = a * d - b * c
    if l1 == 0:
        return 0j, 0j
    return l1, det / l1


def _sort_key(z: complex) -> tuple[float, float]:
    return (z.real, z.imag)


def eig_complex(M) -> list[complex]:
    """Eigenvalues of a small dense complex matrix, sorted by (real, imag)."""
    A = as_complex_matrix(M)
    q = A.shape[0]
    if q > MAX_DENSE_DIM:
        raise InvalidInputError(f"dense eigensolver limited to q <= {MAX_DENSE_DIM}, got {q}")
    if q == 1:
        vals = [complex(A[0, 0])]
    elif q == 2:
        vals = list(eig2(complex(A[0, 0]), complex(A[0, 1]), complex(A[1, 0]), complex(A[1, 1])))
    else:
        vals = [complex(v) for v in np.linalg.eigvals(A)]
    return sorted(vals, key=_sort_key)


def det_complex(M) -> complex:
    A = as_complex_matrix(M)
    q = A.shape[0]
    if q == 1:
        return complex(A[0, 0])
    if q == 2:
        return complex(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])
    return complex(np.linalg.det(A))


def adjugate(M) -> np.ndarray:
    """Transposed cofactor matrix; well defined for singular `M`."""
    A = as_complex_matrix(M)
    q = A.shape[0]
    if q == 1:
        return np.ones((1, 1), dtype=complex)
    if q == 2:
        return np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]], dtype=complex)
    adj = np.empty_like(A)
    idx = np.arange(q)
    for i in range(q):
        for j in range(q):
            minor = A[np.ix_(idx != i, idx != j)]
            adj[j, i] = (-1) ** (i + j) * np.linalg.det(minor)
    return adj


def _central_difference(F: Callable[[complex], complex]) -> Callable[[complex], complex]:
    def dF(z: complex) -> complex:
        h = 1e-7 * max(1.0, abs(z))
        return (F(z + h) - F(z - h)) / (2.0 * h)

    return dF


def newton_complex(
    F: Callable[[complex], complex],
    dF: Callable[[complex], complex] | None,
    z0: complex,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> RootResult:
    """Damped Newton iteration for a holomorphic scalar function.

    Failure (divergence, vanishing derivative, overflow) is reported through
    ``converged=False``; this function never raises for numerical reasons.
    A step is halved up to 8 times when it does not reduce ``|F|``.
    """
    if dF is None:
        dF = _central_difference(F)
    z = complex(z0)
    try:
        fz = F(z)
    except (OverflowError, ZeroDivisionError):
        return RootResult(z, math.inf, 0, False)
    res = abs(fz)
    for it in range(max_iter + 1):
        if not math.isfinite(res):
            return RootResult(z, math.inf, it, False)
        if res <= tol:
            return RootResult(z, res, it, True)
        if it == max_iter:
            break
        try:
            d = dF(z)
        except (OverflowError, ZeroDivisionError):
            return RootResult(z, res, it, False)
        if not cmath.isfinite(d) or abs(d) <= 1e-300:
            return RootResult(z, res, it, False)
        step = fz / d
        for _ in range(9):
            z_new = z - step
            try:
                f_new = F(z_new)
                r_new = abs(f_new)
            except (OverflowError, ZeroDivisionError):
                r_new = math.inf
            if r_new < res:
                break
            step *= 0.5
        else:
            # stalled: |F| does not decrease along the Newton direction
            return RootResult(z, res, it, False)
        z, fz, res = z_new, f_new, r_new
    return RootResult(z, res, max_iter, res <= tol)


def minimize_1d(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    samples: int = 512,
    refine: int = 5,
) -> tuple[float, float]:
    """Global-ish minimum of a continuous function on [lo, hi].

    A uniform scan with at least 512 samples locates candidate basins; the
    `refine` lowest local minima of the scan are polished by bounded Brent
    search (golden section with parabolic steps) on their neighbouring grid
    cells and the best one is returned.
    """
    if not lo < hi:
        raise InvalidInputError(f"minimize_1d needs lo < hi, got [{lo}, {hi}]")
    samples = max(int(samples), 512)
    xs = np.linspace(lo, hi, samples)
    ys = np.array([f(float(x)) for x in xs])
    # local minima of the sampled sequence, endpoints included
    left = np.concatenate(([np.inf], ys[:-1]))
    right = np.concatenate((ys[1:], [np.inf]))
    cand = np.flatnonzero((ys <= left) & (ys <= right))
    if cand.size == 0:
        cand = np.array([int(np.argmin(ys))])
    cand = cand[np.argsort(ys[cand], kind="stable")][:refine]
    best_x, best_y = float(xs[cand[0]]), float(ys[cand[0]])
    for i in cand:
        a = float(xs[max(i - 1, 0)])
        b = float(xs[min(i + 1, samples - 1)])
        if b <= a:
            continue
        res = minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": tol, "maxiter": 500})
        x, y = float(res.x), float(res.fun)
        if y < best_y:
            best_x, best_y = x, y
    return best_x, best_y


def sort_canonical(values: Sequence[complex]) -> list[complex]:
    return sorted(values, key=_sort_key)
