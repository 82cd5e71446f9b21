"""Large-delay spectra of the transverse variational equation.

For an equilibrium with constant Jacobian ``J`` and coupling Jacobian ``H``
each transverse block reads ``xi' = J xi(t) + sigma H xi(t - tau)`` with
``sigma = -kappa * mu``. Its characteristic function is

    det(-lambda I + J + sigma exp(-lambda tau) H) = 0.

For large delay the roots either sit near the unstable eigenvalues of ``J``
(strongly unstable spectrum) or line up, after rescaling by ``tau``, along
the curves ``gamma_l(omega) = -ln|g_l(omega)| + ln|sigma|`` where ``g_l`` are
the roots of ``det(-i omega I + J + g H) = 0`` (asymptotic continuous
spectrum).
"""
from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError, NumericalError, PreconditionError
from .graph import LaplacianSpectrum
from .numerics import (
    RootResult,
    adjugate,
    as_complex_matrix,
    eig2,
    eig_complex,
    minimize_1d,
    newton_complex,
)

__all__ = [
    "LocalModel",
    "TransverseBlock",
    "SpectrumBranch",
    "SpectralRoot",
    "RootSet",
    "SpectrumResult",
    "SyncWindow",
    "StabilityVerdict",
    "instantaneous_spectrum",
    "g_branches",
    "asymptotic_spectrum",
    "default_omega_window",
    "compute_r0",
    "critical_coupling",
    "exact_spectrum_equilibrium",
    "spectrum_equilibrium",
    "transverse_stability",
    "transient_time",
    "solve_characteristic",
    "transverse_sigmas",
    "write_branches_csv",
    "write_roots_csv",
]

ROOT_TOL = 1e-10
RESIDUAL_ACCEPT = 1e-8
DEDUP_TOL = 1e-6
SINGULAR_G = 1e-14
SEED_SHIFT = 1e-3
TWO_PI = 2.0 * math.pi


@dataclass
class LocalModel:
    """Linearization data of an isolated node plus its nonlinear vector fields.

    `f_rhs` and `h_rhs` act on real arrays of shape ``(..., q)``. When
    `h_linear` is set, ``h(x) = H x`` exactly and simulations may use the
    Laplacian directly.
    """

    J: np.ndarray
    H: np.ndarray
    f_rhs: Callable[[np.ndarray], np.ndarray] | None = None
    h_rhs: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "custom"
    h_linear: bool = False

    def __post_init__(self):
        self.J = as_complex_matrix(self.J)
        self.H = as_complex_matrix(self.H)
        if self.J.shape != self.H.shape:
            raise InvalidInputError(f"J {self.J.shape} and H {self.H.shape} differ in shape")
        if abs(np.linalg.det(self.H)) <= 1e-12:
            raise InvalidInputError("coupling Jacobian H is singular (|det H| <= 1e-12)")
        if self.h_rhs is not None:
            h0 = np.asarray(self.h_rhs(np.zeros(self.q)))
            if np.max(np.abs(h0)) > 1e-12:
                raise InvalidInputError("coupling function must vanish at 0")
        self._Hinv = np.linalg.inv(self.H)
        self._HinvJ = self._Hinv @ self.J

    @property
    def q(self) -> int:
        return self.J.shape[0]

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.J.imag == 0) and np.all(self.H.imag == 0))

    @classmethod
    def linear(cls, J, H, name: str = "linear") -> "LocalModel":
        """Model with f(x) = J x and h(x) = H x (real J, H required for simulation)."""
        Jr = np.asarray(J)
        Hr = np.asarray(H)
        Jreal, Hreal = np.real(Jr).astype(float), np.real(Hr).astype(float)
        return cls(Jr, Hr, f_rhs=lambda x: x @ Jreal.T, h_rhs=lambda x: x @ Hreal.T,
                   name=name, h_linear=True)

    def branch_values(self, lam: complex) -> list[complex]:
        """Roots g of det(-lam I + J + g H) = 0, i.e. -eig(H^-1 (J - lam I))."""
        if self.q == 1:
            return [-(complex(self._HinvJ[0, 0]) - lam * complex(self._Hinv[0, 0]))]
        if self.q == 2:
            A, B = self._HinvJ, self._Hinv
            m = [complex(A[i, j]) - lam * complex(B[i, j]) for i in (0, 1) for j in (0, 1)]
            l1, l2 = eig2(*m)
            return [-l1, -l2]
        M = self._HinvJ - lam * self._Hinv
        return [-v for v in np.linalg.eigvals(M)]

    def characteristic(self, sigma: complex, tau: float) -> Callable[[complex], tuple[complex, complex]]:
        """lam -> (det M(lam), d/dlam det M(lam)) with M = -lam I + J + sigma e^{-lam tau} H."""
        q = self.q
        if q <= 2:
            J = [[complex(self.J[i, j]) for j in range(q)] for i in range(q)]
            H = [[complex(self.H[i, j]) for j in range(q)] for i in range(q)]

            def char(lam: complex):
                Y = sigma * cmath.exp(-lam * tau)
                dY = -tau * Y
                if q == 1:
                    return -lam + J[0][0] + Y * H[0][0], -1.0 + dY * H[0][0]
                m00 = -lam + J[0][0] + Y * H[0][0]
                m01 = J[0][1] + Y * H[0][1]
                m10 = J[1][0] + Y * H[1][0]
                m11 = -lam + J[1][1] + Y * H[1][1]
                d00 = -1.0 + dY * H[0][0]
                d01 = dY * H[0][1]
                d10 = dY * H[1][0]
                d11 = -1.0 + dY * H[1][1]
                F = m00 * m11 - m01 * m10
                dF = d00 * m11 + m00 * d11 - d01 * m10 - m01 * d10
                return F, dF

            return char
        I = np.eye(q)

        def char_dense(lam: complex):
            Y = sigma * cmath.exp(-lam * tau)
            M = -lam * I + self.J + Y * self.H
            dM = -I - tau * Y * self.H
            # Jacobi's formula: d det M = tr(adj(M) dM)
            return complex(np.linalg.det(M)), complex(np.trace(adjugate(M) @ dM))

        return char_dense


@dataclass(frozen=True)
class TransverseBlock:
    mu: complex
    sigma: complex
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidInputError(f"delay must be positive, got {self.tau}")

    @classmethod
    def from_coupling(cls, kappa: float, mu: complex, tau: float) -> "TransverseBlock":
        return cls(complex(mu), -kappa * complex(mu), tau)


@dataclass
class SpectrumBranch:
    index: int
    omega: np.ndarray
    gamma: np.ndarray
    g: np.ndarray

    @property
    def singular(self) -> np.ndarray:
        return ~np.isfinite(self.gamma)

    def gamma_max(self) -> float:
        finite = self.gamma[np.isfinite(self.gamma)]
        return float(finite.max()) if finite.size else math.inf


@dataclass
class SpectralRoot(RootResult):
    family: str = "pseudo"
    branch: int | None = None
    # Re(lambda) * tau - gamma_branch(Im lambda); NaN for strong roots
    gamma_gap: float = math.nan


@dataclass
class RootSet:
    roots: list[SpectralRoot]
    sigma: complex
    tau: float
    n_seeds: int = 0
    n_dropped: int = 0

    def __iter__(self):
        return iter(self.roots)

    def __len__(self):
        return len(self.roots)

    def values(self) -> np.ndarray:
        return np.array([r.root for r in self.roots], dtype=complex)

    def max_real(self) -> float:
        return max((r.root.real for r in self.roots), default=-math.inf)

    def family(self, name: str) -> list[SpectralRoot]:
        return [r for r in self.roots if r.family == name]

    def chain(self, branch: int) -> list[SpectralRoot]:
        """Pseudo-continuous roots on one branch, ordered by imaginary part."""
        out = [r for r in self.roots if r.family == "pseudo" and r.branch == branch]
        return sorted(out, key=lambda r: r.root.imag)


@dataclass
class SpectrumResult:
    instantaneous: list[complex]
    strongly_unstable: list[complex]
    asymptotic: list[SpectrumBranch] = field(default_factory=list)
    exact_roots: RootSet | None = None


@dataclass
class SyncWindow:
    r0: float
    rho_L: float
    kappa_c: float
    omega_star: float = math.nan

    @property
    def window(self) -> tuple[float, float]:
        return (0.0, self.kappa_c)


@dataclass
class StabilityVerdict:
    asymptotic: str
    exact: str
    margin: float
    max_real: float
    kappa_c: float
    per_block: list[tuple[complex, float]] = field(default_factory=list)


def instantaneous_spectrum(model: LocalModel) -> tuple[list[complex], list[complex]]:
    """Eigenvalues of J and the subset with positive real part."""
    gamma_i = eig_complex(model.J)
    return gamma_i, [z for z in gamma_i if z.real > 0]


def g_branches(model: LocalModel, omega: float) -> list[complex]:
    """The q roots g of det(-i omega I + J + g H) = 0."""
    return model.branch_values(1j * float(omega))


def _track(values: np.ndarray) -> np.ndarray:
    """Reorder columns row by row so each column varies continuously."""
    out = values.copy()
    for k in range(1, out.shape[0]):
        prev = out[k - 1]
        cur = out[k]
        cost = np.abs(prev[:, None] - cur[None, :])
        _, cols = linear_sum_assignment(cost)
        out[k] = cur[cols]
    return out


def _branches_from_values(omegas: np.ndarray, gvals: np.ndarray, sigma: complex) -> list[SpectrumBranch]:
    ln_sigma = math.log(abs(sigma))
    branches = []
    for l in range(gvals.shape[1]):
        g = gvals[:, l]
        mod = np.abs(g)
        with np.errstate(divide="ignore"):
            gamma = np.where(mod < SINGULAR_G, np.inf, -np.log(np.maximum(mod, 1e-300)) + ln_sigma)
        branches.append(SpectrumBranch(l, omegas.copy(), gamma, g.copy()))
    return branches


def tracked_branch_values(branch_fn: Callable[[complex], Sequence[complex]], omegas: np.ndarray) -> np.ndarray:
    gvals = np.array([list(branch_fn(1j * float(w))) for w in omegas], dtype=complex)
    return _track(gvals)


def asymptotic_spectrum(model: LocalModel, sigma: complex, omega_window: tuple[float, float],
                        samples: int = 2001) -> list[SpectrumBranch]:
    """Sample gamma_l(omega, sigma) = -ln|g_l(omega)| + ln|sigma| on a uniform grid.

    Samples where |g_l| < 1e-14 get gamma = +inf.
    """
    if sigma == 0:
        raise InvalidInputError("asymptotic spectrum requires sigma != 0")
    lo, hi = omega_window
    omegas = np.linspace(lo, hi, int(samples))
    return _branches_from_values(omegas, tracked_branch_values(model.branch_values, omegas), sigma)


def default_omega_window(model: LocalModel) -> tuple[float, float]:
    W = 4.0 * (np.linalg.norm(model.J, 2) + np.linalg.norm(model.H, 2) * np.linalg.cond(model.H))
    return (-W, W)


def _min_branch_modulus(model: LocalModel) -> Callable[[float], float]:
    return lambda w: min(abs(g) for g in model.branch_values(1j * w))


def r0_search(model: LocalModel, omega_window: tuple[float, float] | None = None,
              tol: float = 1e-10) -> tuple[float, float, tuple[float, float]]:
    """Return (r0, argmin omega, window used)."""
    _, su = instantaneous_spectrum(model)
    marginal = [z for z in eig_complex(model.J) if z.real >= 0]
    if marginal:
        raise PreconditionError(
            f"J has eigenvalues with Re >= 0 {marginal} (strongly unstable spectrum "
            f"{su}); r0 is only defined for a strictly stable equilibrium")
    lo, hi = omega_window if omega_window is not None else default_omega_window(model)
    f = _min_branch_modulus(model)
    for attempt in range(4):
        edge = 0.05 * (hi - lo)
        if f(hi) > f(hi - edge) and f(lo) > f(lo + edge):
            break
        if attempt == 3:
            raise NumericalError(
                f"|g_l(omega)| is not increasing at the edges of the omega window [{lo}, {hi}]")
        lo, hi = lo - (hi - lo) / 2, hi + (hi - lo) / 2
    w, r0 = minimize_1d(f, lo, hi, tol=tol)
    if not r0 > 0:
        raise NumericalError("r0 evaluated to zero; J must have an imaginary-axis eigenvalue")
    return r0, w, (lo, hi)


def compute_r0(model: LocalModel, omega_window: tuple[float, float] | None = None) -> float:
    """min over branches of inf over omega of |g_l(omega)|."""
    return r0_search(model, omega_window)[0]


def _check_network(spectrum: LaplacianSpectrum) -> None:
    if not spectrum.diagonalizable:
        raise NumericalError(
            f"Laplacian is not diagonalizable (eigenvector condition {spectrum.condition:.3g})")
    if spectrum.n_zero() != 1:
        raise PreconditionError(
            f"network must be connected: Laplacian has {spectrum.n_zero()} zero eigenvalues")


def critical_coupling(model: LocalModel, spectrum: LaplacianSpectrum,
                      omega_window: tuple[float, float] | None = None) -> SyncWindow:
    _check_network(spectrum)
    r0, w, _ = r0_search(model, omega_window)
    return SyncWindow(r0=r0, rho_L=spectrum.rho_L, kappa_c=r0 / spectrum.rho_L, omega_star=w)


def _phase_refine(raw: complex, g0: complex, sigma: complex, tau: float,
                  branch_fn: Callable[[complex], Sequence[complex]], steps: int) -> complex | None:
    """Fixed-point iteration of sigma e^{-lam tau} = G(lam) on one branch.

    Each sweep maps lam -> (Log(sigma / G(lam)) + 2 pi i k) / tau, keeping k
    so that Im lam stays on the same 2 pi / tau lattice site.
    """
    lam, G = raw, g0
    ln_sigma = cmath.log(sigma)
    try:
        for _ in range(steps):
            r = ln_sigma - cmath.log(G)
            k = round((lam.imag * tau - r.imag) / TWO_PI)
            new = (r + TWO_PI * 1j * k) / tau
            G = min(branch_fn(new), key=lambda x: abs(x - G))
            if abs(G) < 1e-300 or not cmath.isfinite(new):
                return None
            done = abs(new - lam) <= 1e-13 * max(1.0, abs(new))
            lam = new
            if done:
                break
    except (ValueError, OverflowError, ZeroDivisionError):
        return None
    return lam


class _BranchLookup:
    """Tracked branch values on a fine grid, interpolated at arbitrary omega."""

    def __init__(self, branch_fn, lo: float, hi: float, tau: float):
        step = min(math.pi / (4.0 * tau), (hi - lo) / 400.0)
        n = int(math.ceil((hi - lo) / step)) + 1
        self.omegas = np.linspace(lo, hi, max(n, 2))
        self.values = tracked_branch_values(branch_fn, self.omegas)

    def at(self, omega: float) -> np.ndarray:
        w = min(max(omega, self.omegas[0]), self.omegas[-1])
        re = [np.interp(w, self.omegas, self.values[:, l].real) for l in range(self.values.shape[1])]
        im = [np.interp(w, self.omegas, self.values[:, l].imag) for l in range(self.values.shape[1])]
        return np.array(re) + 1j * np.array(im)


def _dedup(roots: list[SpectralRoot], tol: float) -> list[SpectralRoot]:
    roots = sorted(roots, key=lambda r: (r.root.imag, r.root.real, r.residual))
    kept: list[SpectralRoot] = []
    for r in roots:
        dup = False
        for k in reversed(kept):
            if r.root.imag - k.root.imag > tol:
                break
            if abs(r.root - k.root) <= tol:
                dup = True
                break
        if not dup:
            kept.append(r)
    return kept


def solve_characteristic(
    char: Callable[[complex], tuple[complex, complex]],
    branch_fn: Callable[[complex], Sequence[complex]],
    sigma: complex,
    tau: float,
    omega_window: tuple[float, float],
    instantaneous: Sequence[complex],
    refine_steps: int = 8,
    tol: float = ROOT_TOL,
    dedup_tol: float = DEDUP_TOL,
) -> RootSet:
    """Roots of a large-delay characteristic function H(lam, sigma e^{-lam tau}) = 0.

    `char` returns the function value and derivative, `branch_fn(lam)` the
    roots g of H(lam, g) = 0, `instantaneous` the delay-free eigenvalues.

    Seeds: for every lattice frequency omega_m = 2 pi m / tau in the window and
    every branch, lam0 = gamma_l(omega_m) / tau + i omega_m, polished by a
    few fixed-point sweeps of the branch phase condition before Newton; the
    raw seed is used as fallback. Instantaneous eigenvalues with Re >= 0 are
    seeded directly (all of them when sigma = 0).
    """
    if not tau > 0:
        raise InvalidInputError(f"delay must be positive, got {tau}")
    sigma = complex(sigma)
    lo, hi = omega_window

    def F(z):
        return char(z)[0]

    def dF(z):
        return char(z)[1]

    seeds: list[tuple[complex, complex | None]] = []
    strong_set = [z for z in instantaneous if z.real > 0]
    if sigma == 0:
        seeds = [(complex(z), None) for z in instantaneous]
    else:
        ln_sigma = math.log(abs(sigma))
        for m in range(math.ceil(lo * tau / TWO_PI), math.floor(hi * tau / TWO_PI) + 1):
            w = TWO_PI * m / tau
            gs = list(branch_fn(1j * w))
            shifted = None
            for l, g in enumerate(gs):
                if abs(g) < SINGULAR_G:
                    # a branch through g = 0 still carries a root chain; seed it slightly off axis
                    if shifted is None:
                        shifted = list(branch_fn(1j * w + SEED_SHIFT))
                    g = shifted[l]
                    if abs(g) < SINGULAR_G:
                        continue
                raw = (ln_sigma - math.log(abs(g))) / tau + 1j * w
                refined = _phase_refine(raw, g, sigma, tau, branch_fn, refine_steps) if refine_steps else None
                seeds.append((refined if refined is not None else raw, raw))
        seeds.extend((complex(z), None) for z in instantaneous if z.real >= -1e-12)

    found: list[SpectralRoot] = []
    dropped = 0
    for seed, fallback in seeds:
        res = newton_complex(F, dF, seed, tol=tol)
        if not res.converged and fallback is not None and fallback != seed:
            res = newton_complex(F, dF, fallback, tol=tol)
        if not res.converged or res.residual > RESIDUAL_ACCEPT or not cmath.isfinite(res.root):
            dropped += 1
            continue
        found.append(SpectralRoot(res.root, res.residual, res.iterations, True))

    margin = TWO_PI / tau
    kept = []
    for r in found:
        z = r.root
        if strong_set and z.real > 0 and min(abs(z - s) for s in strong_set) < 0.5 * z.real:
            r.family = "strong"
            kept.append(r)
        elif lo - margin <= z.imag <= hi + margin:
            kept.append(r)
    kept = _dedup(kept, dedup_tol)

    if sigma != 0 and kept:
        lookup = _BranchLookup(branch_fn, lo - margin, hi + margin, tau)
        ln_sigma = math.log(abs(sigma))
        for r in kept:
            if r.family != "pseudo":
                continue
            z = r.root
            try:
                Y = sigma * cmath.exp(-z * tau)
            except OverflowError:
                continue
            gs = lookup.at(z.imag)
            l = int(np.argmin(np.abs(gs - Y)))
            r.branch = l
            mod = abs(gs[l])
            if mod >= SINGULAR_G:
                r.gamma_gap = z.real * tau - (ln_sigma - math.log(mod))
    return RootSet(kept, sigma, float(tau), n_seeds=len(seeds), n_dropped=dropped)


def exact_spectrum_equilibrium(model: LocalModel, sigma: complex, tau: float,
                               omega_window: tuple[float, float] | None = None) -> RootSet:
    """Roots of det(-lam I + J + sigma e^{-lam tau} H) = 0 near the given frequency window."""
    window = omega_window if omega_window is not None else default_omega_window(model)
    gamma_i, _ = instantaneous_spectrum(model)
    return solve_characteristic(model.characteristic(complex(sigma), tau), model.branch_values,
                                sigma, tau, window, gamma_i)


def spectrum_equilibrium(model: LocalModel, sigma: complex, tau: float,
                         omega_window: tuple[float, float] | None = None,
                         samples: int = 2001) -> SpectrumResult:
    """All spectral objects of one transverse block, bundled."""
    window = omega_window if omega_window is not None else default_omega_window(model)
    gamma_i, gamma_su = instantaneous_spectrum(model)
    branches = asymptotic_spectrum(model, sigma, window, samples) if sigma != 0 else []
    roots = exact_spectrum_equilibrium(model, sigma, tau, window)
    return SpectrumResult(gamma_i, gamma_su, branches, roots)


def transverse_sigmas(spectrum: LaplacianSpectrum, kappa: float, conjugate_pairs: bool = True,
                      tol: float = 1e-9) -> list[tuple[complex, complex]]:
    """Distinct (mu_j, sigma_j = -kappa mu_j) for j >= 2.

    With `conjugate_pairs`, mu and conj(mu) are merged (valid for real J, H,
    whose spectra for conjugate sigma are complex conjugates).
    """
    out: list[complex] = []
    for mu in spectrum.nontrivial():
        mu = complex(mu)
        if conjugate_pairs and mu.imag < 0:
            mu = mu.conjugate()
        if all(abs(mu - m) > tol * max(1.0, abs(m)) for m in out):
            out.append(mu)
    return [(mu, -kappa * mu) for mu in out]


def transverse_stability(model: LocalModel, net_spectrum: LaplacianSpectrum, kappa: float,
                         tau: float, omega_window: tuple[float, float] | None = None) -> StabilityVerdict:
    """Large-delay verdict from kappa_c and an exact verdict from the characteristic roots."""
    if kappa == 0:
        raise InvalidInputError("kappa must be nonzero")
    win = critical_coupling(model, net_spectrum, omega_window)
    margin = win.r0 - abs(kappa) * win.rho_L
    if abs(margin) <= 1e-12 * max(1.0, win.r0):
        asym = "boundary"
    else:
        asym = "stable" if margin > 0 else "unstable"
    per_block = []
    worst = -math.inf
    for mu, sigma in transverse_sigmas(net_spectrum, kappa, conjugate_pairs=model.is_real):
        m = exact_spectrum_equilibrium(model, sigma, tau, omega_window).max_real()
        per_block.append((mu, m))
        worst = max(worst, m)
    exact = "stable" if worst < 0 else ("unstable" if worst > 0 else "boundary")
    return StabilityVerdict(asym, exact, margin, worst, win.kappa_c, per_block)


def transient_time(kappa: float, kappa_c: float, tau: float) -> float:
    """Characteristic time -tau / ln(kappa / kappa_c) of the slowest transverse mode."""
    if not tau > 0:
        raise InvalidInputError(f"delay must be positive, got {tau}")
    if not kappa > 0:
        raise InvalidInputError(f"transient time needs kappa > 0, got {kappa}")
    if not kappa < kappa_c:
        raise InvalidInputError(f"no decay for kappa >= kappa_c ({kappa} >= {kappa_c})")
    return -tau / math.log(kappa / kappa_c)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_branches_csv(path, branches: Sequence[SpectrumBranch]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["branch", "omega", "gamma", "re_g", "im_g"])
        for b in branches:
            for om, ga, g in zip(b.omega, b.gamma, b.g):
                w.writerow([b.index, _fmt(om), _fmt(ga), _fmt(g.real), _fmt(g.imag)])


def write_roots_csv(path, roots: RootSet | Sequence[SpectralRoot]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_lambda", "im_lambda", "residual", "family"])
        for r in roots:
            w.writerow([_fmt(r.root.real), _fmt(r.root.imag), _fmt(r.residual), r.family])
