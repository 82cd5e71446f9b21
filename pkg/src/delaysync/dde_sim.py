"""Fixed-step integration of delay-coupled networks and synchronization diagnostics.

The delay is grid aligned (h = tau / N), so full-step delayed values are
exact reads of the stored past. Half-step delayed values come from the cubic
Hermite interpolant built from the stored states and derivatives at the two
neighbouring grid points; inside the initial history they are evaluated
directly.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInputError
from .graph import Network, make_rng
from .spectrum import LocalModel

BLOWUP = 1e12
MAX_VALUES = 20_000_000
MIN_STEPS_PER_DELAY = 64


@dataclass
class HistorySpec:
    """Initial function on [-tau, 0]: constant per-node values or a callable t -> (n, q)."""

    values: np.ndarray | None = None
    func: Callable[[float], np.ndarray] | None = None
    seed: int | None = None

    def __post_init__(self):
        if (self.values is None) == (self.func is None):
            raise InvalidInputError("history needs exactly one of constant values or a function")
        if self.values is not None:
            v = np.array(self.values, dtype=float)
            if v.ndim == 1:
                v = v[:, None]
            if v.ndim != 2 or not np.all(np.isfinite(v)):
                raise InvalidInputError("constant history must be a finite (n, q) array")
            self.values = v

    @classmethod
    def random_constant(cls, n: int, q: int, seed: int, scale: float = 1.0) -> "HistorySpec":
        rng = make_rng(seed)
        return cls(values=scale * rng.uniform(-1.0, 1.0, size=(n, q)), seed=int(seed))

    def __call__(self, t: float) -> np.ndarray:
        if self.values is not None:
            return self.values
        return np.asarray(self.func(t), dtype=float)

    def desynchronized(self, t: float = 0.0) -> bool:
        x = self(t)
        return bool(np.any(np.abs(x - x[:1]) > 0))


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # (len(t), n, q)
    kappa: float
    tau: float
    h_step: float
    seed: int | None
    model: str
    blowup: bool = False
    blowup_time: float | None = None

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def q(self) -> int:
        return self.states.shape[2]


@dataclass
class DecayFit:
    eta: float
    t_tr: float
    fit_window: tuple[float, float]
    r_squared: float
    intercept: float
    n_samples: int

    @property
    def low_confidence(self) -> bool:
        return self.r_squared < 0.9


def steps_per_delay(tau: float, h_step: float) -> int:
    N = int(round(tau / h_step))
    if N < 1 or abs(N * h_step - tau) > 1e-9 * tau:
        raise InvalidInputError(f"h_step={h_step} does not divide tau={tau}")
    return N


def integrate(rhs: Callable[[np.ndarray, np.ndarray], np.ndarray], history: Callable[[float], np.ndarray],
              tau: float, h_step: float, t_end: float, record_every: int = 1,
              blowup: float = BLOWUP):
    """RK4 for x' = rhs(x(t), x(t - tau)) with history x(t) = history(t), t <= 0.

    Returns (t, states, blowup_time); states are recorded every `record_every`
    steps starting at t = 0, plus the last computed step.
    """
    N = steps_per_delay(tau, h_step)
    h = tau / N
    steps = int(round(t_end / h))
    x = np.array(history(0.0), dtype=float)
    size = N + 2
    X = np.empty((size,) + x.shape)
    Fd = np.empty_like(X)
    hist_grid = [np.array(history((j - N) * h), dtype=float) for j in range(N + 1)]

    n_rec = steps // record_every + 2
    t_out = np.empty(n_rec)
    out = np.empty((n_rec,) + x.shape)
    t_out[0], out[0] = 0.0, x
    r = 1
    X[0] = x
    blow_t = None
    last = 0
    for k in range(steps):
        j = k - N  # delayed grid index
        if j >= 0:
            d0 = X[j % size]
            d1 = X[(j + 1) % size]
            dm = 0.5 * (d0 + d1) + h * (Fd[j % size] - Fd[(j + 1) % size]) / 8.0
        else:
            d0 = hist_grid[k]
            d1 = hist_grid[k + 1] if j + 1 < 0 else X[0]
            dm = np.asarray(history((j + 0.5) * h), dtype=float)
        k1 = rhs(x, d0)
        Fd[k % size] = k1
        k2 = rhs(x + 0.5 * h * k1, dm)
        k3 = rhs(x + 0.5 * h * k2, dm)
        k4 = rhs(x + h * k3, d1)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        X[(k + 1) % size] = x
        last = k + 1
        if not (np.all(np.isfinite(x)) and np.max(np.abs(x)) <= blowup):
            blow_t = last * h
            break
        if last % record_every == 0:
            t_out[r], out[r] = last * h, x
            r += 1
    if last % record_every != 0 or blow_t is not None:
        t_out[r], out[r] = last * h, x
        r += 1
    return t_out[:r], out[:r], blow_t


def coupling_rhs(net: Network, model: LocalModel, kappa: float):
    """x' = f(x) + kappa sum_l A_jl h(x_l(t - tau) - x_j(t - tau)) on (n, q) arrays."""
    if model.f_rhs is None or model.h_rhs is None:
        raise InvalidInputError(f"model {model.name!r} has no nonlinear right-hand side")
    f = model.f_rhs
    if model.h_linear:
        L = net.laplacian().astype(float)
        HT = np.real(model.H).astype(float).T

        def rhs(x, xd):
            return f(x) - kappa * ((L @ xd) @ HT)
    else:
        e = net.edge_array
        src, tgt = e[:, 0], e[:, 1]
        hfun = model.h_rhs

        def rhs(x, xd):
            c = np.zeros_like(x)
            np.add.at(c, tgt, hfun(xd[src] - xd[tgt]))
            return f(x) + kappa * c

    return rhs


def simulate(net: Network, model: LocalModel, kappa: float, tau: float, h_step: float,
             t_end: float, hist: HistorySpec, max_values: int = MAX_VALUES) -> Trajectory:
    """Integrate the full network; the output is thinned only if it would exceed `max_values` scalars."""
    N = steps_per_delay(tau, h_step)
    if N < MIN_STEPS_PER_DELAY:
        raise InvalidInputError(f"need at least {MIN_STEPS_PER_DELAY} steps per delay, got {N}")
    if not t_end >= tau:
        raise InvalidInputError(f"t_end={t_end} must be at least tau={tau}")
    if not model.is_real:
        raise InvalidInputError("simulation needs a real model")
    x0 = hist(0.0)
    if x0.shape != (net.n, model.q):
        raise InvalidInputError(f"history shape {x0.shape} does not match (n, q) = ({net.n}, {model.q})")
    steps = int(round(t_end / h_step))
    per_sample = net.n * model.q
    record_every = max(1, math.ceil((steps + 1) * per_sample / max_values))
    t, states, blow_t = integrate(coupling_rhs(net, model, kappa), hist, tau, tau / N, t_end, record_every)
    return Trajectory(t, states, float(kappa), float(tau), tau / N, hist.seed, model.name,
                      blowup=blow_t is not None, blowup_time=blow_t)


def sync_error(traj: Trajectory) -> np.ndarray:
    """max_j |x_0(t) - x_j(t)| at every recorded time."""
    d = traj.states - traj.states[:, :1, :]
    return np.sqrt(np.max(np.sum(d * d, axis=2), axis=1))


def history_norm(t: np.ndarray, values: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Sup of `values` over the trailing window [t - tau, t], for t >= t[0] + tau.

    For delay equations this is the natural state norm (sup over the history
    segment); it removes the pulse structure that a pointwise error inherits
    from a discontinuous initial function.
    """
    dt = t[1] - t[0]
    w = int(round(tau / dt)) + 1
    if w > len(values):
        raise InvalidInputError("series shorter than one delay")
    return t[w - 1:], sliding_window_view(values, w).max(axis=1)


def fit_decay(t: np.ndarray, errors: np.ndarray, window: tuple[float, float] | None = None,
              tau: float | None = None, floor: float = 0.0) -> DecayFit:
    """Least-squares slope of ln(error) on the window (default [2 tau, t_end]).

    With ``floor > 0`` the window is cut at the first sample not exceeding
    `floor`, which keeps round-off plateaus out of the fit.
    """
    t = np.asarray(t, dtype=float)
    e = np.asarray(errors, dtype=float)
    if window is None:
        if tau is None:
            raise InvalidInputError("fit_decay needs a window or tau")
        window = (2.0 * tau, float(t[-1]))
    ta, tb = window
    if floor > 0:
        below = np.flatnonzero((t >= ta) & (e <= floor))
        if below.size:
            tb = min(tb, float(t[below[0]]) - 1e-12)
    m = (t >= ta) & (t <= tb)
    if m.sum() < 20:
        raise InvalidInputError(f"fit window [{ta}, {tb}] holds {int(m.sum())} samples, need >= 20")
    if np.any(e[m] <= 0):
        raise InvalidInputError("errors must be strictly positive on the fit window")
    y = np.log(e[m])
    slope, intercept = np.polyfit(t[m], y, 1)
    resid = y - (slope * t[m] + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    eta = -float(slope)
    return DecayFit(eta, 1.0 / eta if eta != 0 else math.inf, (float(ta), float(tb)), r2,
                    float(intercept), int(m.sum()))


# exact oracle for x' = -x(t - 1), x = 1 on [-1, 0]

def _poly_shift(p: list[Fraction]) -> list[Fraction]:
    """Coefficients of p(t - 1)."""
    out = [Fraction(0)] * len(p)
    for k, c in enumerate(p):
        for i in range(k + 1):
            out[i] += c * math.comb(k, i) * (-1) ** (k - i)
    return out


def _poly_eval(p: list[Fraction], t) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * t + c
    return acc


def method_of_steps_pieces(n_intervals: int) -> list[list[Fraction]]:
    """Exact polynomial pieces of x' = -x(t - 1) on [k - 1, k], k = 1..n_intervals."""
    prev = [Fraction(1)]
    pieces = []
    for k in range(1, n_intervals + 1):
        rate = [-c for c in _poly_shift(prev)]
        anti = [Fraction(0)] + [c / (i + 1) for i, c in enumerate(rate)]
        start = _poly_eval(prev, k - 1)
        anti[0] += start - _poly_eval(anti, k - 1)
        pieces.append(anti)
        prev = anti
    return pieces


def exact_linear_delay(t: float) -> Fraction:
    k = max(1, math.ceil(t))
    return _poly_eval(method_of_steps_pieces(k)[-1], Fraction(t))


def convergence_order(t_end: float = 10.0, steps: tuple[int, ...] = (4, 8, 16)) -> tuple[float, list[float]]:
    """Observed order of the integrator on x' = -x(t - 1) against the exact solution.

    Up to t = 3 the solution is a piecewise cubic which RK4 with Hermite
    midpoints reproduces to round-off, so the order is measured further out,
    where the pieces have degree > 4. Returns the smallest order over
    successive halvings and the errors at t_end.
    """
    exact = float(exact_linear_delay(t_end))
    errs = []
    for N in steps:
        t, x, _ = integrate(lambda x, xd: -xd, lambda s: np.ones(1), 1.0, 1.0 / N, t_end)
        errs.append(abs(float(x[-1, 0]) - exact))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    return min(orders), errs


def write_trajectory_csv(path, traj: Trajectory, stride: int = 1) -> None:
    if stride < 1:
        raise InvalidInputError(f"stride must be >= 1, got {stride}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "node", "component", "value"])
        for i in range(0, len(traj.t), stride):
            ti = repr(float(traj.t[i]))
            for j in range(traj.n):
                for c in range(traj.q):
                    w.writerow([ti, j, c, repr(float(traj.states[i, j, c]))])


def write_sync_csv(path, t: np.ndarray, err: np.ndarray, stride: int = 1) -> None:
    if stride < 1:
        raise InvalidInputError(f"stride must be >= 1, got {stride}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "error"])
        for i in range(0, len(t), stride):
            w.writerow([repr(float(t[i])), repr(float(err[i]))])
