"""Stuart-Landau nodes: z' = (alpha + i beta) z - z |z|^2, identity coupling.

For alpha < 0 the origin is a stable focus and the general equilibrium
machinery applies. For alpha > 0 the synchronous orbit sqrt(alpha) e^{i beta t}
becomes an equilibrium in the co-rotating frame r = z e^{-i beta t}; the
transverse blocks there are

    xi' = diag(-2 alpha, 0) xi(t) + sigma R(beta tau) xi(t - tau),

with R the rotation by beta*tau. Their characteristic function in closed form is

    H(lam, g) = g^2 - 2 c (alpha + lam) g + lam^2 + 2 alpha lam,  c = cos(beta tau),

evaluated at g = sigma e^{-lam tau}.
"""
from __future__ import annotations

import cmath
import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, PreconditionError
from .graph import LaplacianSpectrum
from .spectrum import (
    LocalModel,
    RootSet,
    SpectrumBranch,
    _check_network,
    solve_characteristic,
    transverse_sigmas,
)

__all__ = [
    "SLParams",
    "PeriodicSLAnalysis",
    "StabilityMap",
    "PeriodicWindow",
    "DEGENERATE_BAND",
    "sl_equilibrium_model",
    "sl_periodic_frame",
    "sl_char_H",
    "sl_g_pm",
    "sl_periodic_window",
    "sl_periodic_asymptotic",
    "sl_periodic_exact_spectrum",
    "sl_stability_map",
    "sl_sync_direction",
    "sl_kappa_c_periodic",
    "write_map_csv",
]

DEGENERATE_BAND = 1e-6


@dataclass(frozen=True)
class SLParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidInputError(f"beta must be positive, got {self.beta}")
        if not math.isfinite(self.alpha):
            raise InvalidInputError("alpha must be finite")

    @property
    def regime(self) -> str:
        return "equilibrium" if self.alpha < 0 else "periodic"


@dataclass
class PeriodicSLAnalysis:
    J0: np.ndarray
    T_mat: np.ndarray
    alpha_P: float
    d1H: complex
    d2H: complex
    degenerate: bool


def _sl_field(p: SLParams):
    lam = complex(p.alpha, p.beta)

    def f(x: np.ndarray) -> np.ndarray:
        z = x[..., 0] + 1j * x[..., 1]
        dz = lam * z - z * (z.real * z.real + z.imag * z.imag)
        return np.stack((dz.real, dz.imag), axis=-1)

    return f


def sl_equilibrium_model(p: SLParams) -> LocalModel:
    """Real 2-d linearization at z = 0 with identity coupling."""
    J = np.array([[p.alpha, -p.beta], [p.beta, p.alpha]], dtype=float)
    return LocalModel(J, np.eye(2), f_rhs=_sl_field(p), h_rhs=lambda x: x,
                      name=f"sl(alpha={p.alpha!r},beta={p.beta!r})", h_linear=True)


def _cos_sin(p: SLParams, tau: float) -> tuple[float, float]:
    return math.cos(p.beta * tau), math.sin(p.beta * tau)


def sl_periodic_frame(p: SLParams, tau: float) -> PeriodicSLAnalysis:
    if not p.alpha > 0:
        raise PreconditionError(f"periodic orbit requires alpha > 0, got {p.alpha}")
    c, s = _cos_sin(p, tau)
    d1H = complex(2.0 * p.alpha)
    d2H = complex(-2.0 * p.alpha * c)
    return PeriodicSLAnalysis(
        J0=np.diag([-2.0 * p.alpha, 0.0]),
        T_mat=np.array([[c, -s], [s, c]]),
        alpha_P=-(d2H / d1H).real,
        d1H=d1H,
        d2H=d2H,
        degenerate=abs(c) < DEGENERATE_BAND,
    )


def _char_H(lam: complex, g: complex, alpha: float, c: float) -> complex:
    return g * g - 2.0 * c * (alpha + lam) * g + lam * lam + 2.0 * alpha * lam


def sl_char_H(omega: float, g: complex, p: SLParams, tau: float) -> complex:
    """H(i omega, g) = g^2 - 2 cos(beta tau)(alpha + i omega) g + 2 alpha omega i - omega^2."""
    c, _ = _cos_sin(p, tau)
    return _char_H(1j * omega, g, p.alpha, c)


def _g_pair(lam: complex, alpha: float, c: float, sign_c: float) -> tuple[complex, complex]:
    b = c * (alpha + lam)
    # b^2 - (lam^2 + 2 alpha lam) == alpha^2 c^2 + (omega^2 - 2 alpha omega i) s^2 at lam = i omega
    root = sign_c * cmath.sqrt(b * b - (lam * lam + 2.0 * alpha * lam))
    return b + root, b - root


def sl_g_pm(omega: float, p: SLParams, tau: float) -> tuple[complex, complex]:
    """(g_plus, g_minus) labelled so that g_minus(0) = 0 and g_plus(0) = 2 alpha cos(beta tau).

    For alpha > 0 the discriminant has positive real part for every omega, so
    the principal square root is continuous in omega and the labelling is
    fixed once at omega = 0 by the sign of cos(beta tau).
    """
    c, _ = _cos_sin(p, tau)
    sign_c = 1.0 if c >= 0 else -1.0
    return _g_pair(1j * omega, p.alpha, c, sign_c)


def sl_periodic_window(p: SLParams) -> tuple[float, float]:
    W = 4.0 * (2.0 * abs(p.alpha) + 1.0)
    return (-W, W)


def sl_periodic_asymptotic(sigma: complex, p: SLParams, tau: float,
                           omega_window: tuple[float, float] | None = None,
                           samples: int = 2001) -> list[SpectrumBranch]:
    """gamma_pm(omega) = -ln|g_pm(omega)| + ln|sigma|; branch 0 is g_plus, branch 1 is g_minus."""
    if sigma == 0:
        raise InvalidInputError("asymptotic spectrum requires sigma != 0")
    lo, hi = omega_window if omega_window is not None else sl_periodic_window(p)
    omegas = np.linspace(lo, hi, int(samples))
    pairs = np.array([sl_g_pm(w, p, tau) for w in omegas], dtype=complex)
    ln_sigma = math.log(abs(sigma))
    out = []
    for l in (0, 1):
        g = pairs[:, l]
        mod = np.abs(g)
        with np.errstate(divide="ignore"):
            gamma = np.where(mod < 1e-14, np.inf, -np.log(np.maximum(mod, 1e-300)) + ln_sigma)
        out.append(SpectrumBranch(l, omegas.copy(), gamma, g))
    return out


def _periodic_char(sigma: complex, alpha: float, c: float, tau: float):
    def char(lam: complex):
        Y = sigma * cmath.exp(-lam * tau)
        dY = -tau * Y
        F = lam * lam + 2.0 * alpha * lam - 2.0 * c * Y * lam - 2.0 * alpha * c * Y + Y * Y
        dF = 2.0 * lam + 2.0 * alpha - 2.0 * c * (dY * lam + Y) - 2.0 * alpha * c * dY + 2.0 * Y * dY
        return F, dF

    return char


def sl_periodic_exact_spectrum(sigma: complex, p: SLParams, tau: float,
                               omega_window: tuple[float, float] | None = None) -> RootSet:
    """Floquet exponents of one transverse block of the synchronous SL orbit.

    Solves det(-lam I + J0 + sigma e^{-lam tau} R(beta tau)) = 0, i.e.
    lam^2 - 2(sigma c e^{-lam tau} - alpha) lam - sigma e^{-lam tau}(2 alpha c - sigma e^{-lam tau}) = 0.
    """
    if not p.alpha > 0:
        raise PreconditionError(f"periodic orbit requires alpha > 0, got {p.alpha}")
    if not tau > 0:
        raise InvalidInputError(f"delay must be positive, got {tau}")
    c, _ = _cos_sin(p, tau)
    sign_c = 1.0 if c >= 0 else -1.0
    alpha = p.alpha
    window = omega_window if omega_window is not None else sl_periodic_window(p)
    return solve_characteristic(
        _periodic_char(complex(sigma), alpha, c, tau),
        lambda lam: _g_pair(lam, alpha, c, sign_c),
        sigma, tau, window, [complex(-2.0 * alpha), 0j],
    )


@dataclass
class StabilityMap:
    sigma: np.ndarray
    tau: np.ndarray
    max_re: np.ndarray  # shape (len(tau), len(sigma))
    n_roots: np.ndarray
    degenerate: np.ndarray  # per tau

    def stable(self) -> np.ndarray:
        return self.max_re < 0


def _map_cell(args) -> tuple[float, int]:
    sigma, tau, alpha, beta, window = args
    rs = sl_periodic_exact_spectrum(sigma, SLParams(alpha, beta), tau, window)
    return rs.max_real(), len(rs)


def _pmap(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def sl_stability_map(sigma_values, tau_values, p: SLParams,
                     omega_window: tuple[float, float] | None = None,
                     workers: int = 1) -> StabilityMap:
    """Max Re of the transverse Floquet exponents on a sigma x tau grid.

    Cells are independent and computed from fresh seeds; results are written
    by cell index so the output does not depend on `workers`.
    """
    if not p.alpha > 0:
        raise PreconditionError(f"stability map requires the periodic regime (alpha > 0), got {p.alpha}")
    sig = np.asarray(sigma_values, dtype=float)
    taus = np.asarray(tau_values, dtype=float)
    cells = [(float(s), float(t), p.alpha, p.beta, omega_window) for t in taus for s in sig]
    results = _pmap(_map_cell, cells, workers)
    max_re = np.array([r[0] for r in results]).reshape(len(taus), len(sig))
    counts = np.array([r[1] for r in results], dtype=int).reshape(len(taus), len(sig))
    degenerate = np.array([abs(math.cos(p.beta * t)) < DEGENERATE_BAND for t in taus])
    return StabilityMap(sig, taus, max_re, counts, degenerate)


def sl_sync_direction(p: SLParams, tau: float) -> int:
    """+1 if small positive kappa synchronizes (cos(beta tau) > 0), -1 otherwise."""
    c, _ = _cos_sin(p, tau)
    if abs(c) < DEGENERATE_BAND:
        raise PreconditionError(
            f"tau={tau} lies in the excluded set tau = (pi + 2 M pi) / (2 beta): "
            f"cos(beta tau) = {c:.2e}, no synchronizing direction")
    return 1 if c > 0 else -1


@dataclass
class PeriodicWindow:
    kappa_c: float
    direction: int
    monotone: bool
    empty: bool = False
    capped: bool = False
    scan: list[tuple[float, float]] = field(default_factory=list)


def sl_kappa_c_periodic(p: SLParams, tau: float, net_spectrum: LaplacianSpectrum,
                        tol: float = 1e-4, blocks: str = "all", ceiling: float | None = None,
                        scan_points: int = 10, omega_window: tuple[float, float] | None = None
                        ) -> PeriodicWindow:
    """Edge of the synchronization window of the periodic SL orbit by bisection.

    `blocks="all"` tests every transverse block sigma = -kappa mu_j (j >= 2);
    `blocks="spectral_radius"` tests only sigma = -kappa rho_L.
    The bracket [0, ceiling] (default 1/rho_L) is first scanned on
    `scan_points` equidistant couplings to detect non-monotone sign patterns;
    bisection then runs between the last stable and first unstable scan point.
    """
    _check_network(net_spectrum)
    if blocks not in ("all", "spectral_radius"):
        raise InvalidInputError(f"blocks must be 'all' or 'spectral_radius', got {blocks!r}")
    direction = sl_sync_direction(p, tau)
    rho = net_spectrum.rho_L
    ceiling = ceiling if ceiling is not None else 1.0 / rho
    if blocks == "all":
        mus = [mu for mu, _ in transverse_sigmas(net_spectrum, 1.0)]
    else:
        mus = [complex(rho)]

    def worst(kappa_abs: float) -> float:
        k = direction * kappa_abs
        return max(sl_periodic_exact_spectrum(-k * mu, p, tau, omega_window).max_real() for mu in mus)

    grid = [ceiling * (i + 1) / scan_points for i in range(scan_points)]
    values = [worst(k) for k in grid]
    scan = list(zip(grid, values))
    stable = [v < 0 for v in values]
    first_bad = next((i for i, s in enumerate(stable) if not s), None)
    monotone = first_bad is None or not any(stable[first_bad:])
    if first_bad is None:
        return PeriodicWindow(ceiling, direction, monotone, capped=True, scan=scan)
    if first_bad == 0:
        lo, hi = 0.0, grid[0]
        k = grid[0]
        while k > 1e-6 * ceiling:
            k *= 0.5
            v = worst(k)
            scan.append((k, v))
            if v < 0:
                lo = k
                break
            hi = k
        else:
            return PeriodicWindow(0.0, direction, monotone, empty=True, scan=sorted(scan))
    else:
        lo, hi = grid[first_bad - 1], grid[first_bad]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if worst(mid) < 0:
            lo = mid
        else:
            hi = mid
    return PeriodicWindow(0.5 * (lo + hi), direction, monotone, scan=sorted(scan))


def write_map_csv(path, smap: StabilityMap) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sigma", "tau", "max_re_lambda", "degenerate_flag"])
        for i, t in enumerate(smap.tau):
            for j, s in enumerate(smap.sigma):
                w.writerow([repr(float(s)), repr(float(t)), repr(float(smap.max_re[i, j])),
                            int(smap.degenerate[i])])
