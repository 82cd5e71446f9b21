"""Experiment commands behind the CLI. Each writes CSV files and returns a short report."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .dde_sim import HistorySpec, fit_decay, history_norm, simulate, sync_error, write_sync_csv, write_trajectory_csv
from .errors import InvalidInputError, PreconditionError
from .graph import gen_ba, gen_er, is_connected, laplacian_spectrum, spectral_radius
from .sl_model import (
    sl_kappa_c_periodic,
    sl_periodic_asymptotic,
    sl_periodic_exact_spectrum,
    sl_stability_map,
    write_map_csv,
)
from .spectrum import (
    asymptotic_spectrum,
    compute_r0,
    critical_coupling,
    default_omega_window,
    exact_spectrum_equilibrium,
    transient_time,
    transverse_sigmas,
    write_branches_csv,
    write_roots_csv,
)


def _r(x) -> str:
    return repr(float(x))


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _pmap(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _periodic(cfg: ExperimentConfig) -> bool:
    return cfg.model.kind == "sl" and cfg.model.regime == "periodic"


def _out(cfg: ExperimentConfig) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.out_dir


def cmd_window(cfg: ExperimentConfig, workers: int = 1) -> dict:
    net = cfg.network.build()
    spec = laplacian_spectrum(net)
    out = _out(cfg)
    if _periodic(cfg):
        cfg.require("tau")
        w = sl_kappa_c_periodic(cfg.model.sl, cfg.run.tau, spec, tol=cfg.run.tol, blocks=cfg.run.blocks,
                                omega_window=cfg.run.omega_window)
        _write_rows(out / "periodic_window.csv",
                    ["tau", "direction", "kappa_c", "monotone", "empty", "capped", "blocks"],
                    [[_r(cfg.run.tau), w.direction, _r(w.kappa_c), int(w.monotone), int(w.empty),
                      int(w.capped), cfg.run.blocks]])
        lo, hi = sorted((0.0, w.direction * w.kappa_c))
        print(f"periodic orbit, tau={cfg.run.tau}: kappa_c={w.kappa_c:.6g} window=({lo:.6g}, {hi:.6g})"
              f"{' [not monotone]' if not w.monotone else ''}{' [empty]' if w.empty else ''}")
        return {"kappa_c": w.kappa_c, "direction": w.direction, "window": (lo, hi)}
    model = cfg.model.build()
    w = critical_coupling(model, spec, cfg.run.omega_window)
    _write_rows(out / "window.csv", ["r0", "rho_L", "kappa_c", "window_lo", "window_hi", "omega_star"],
                [[_r(w.r0), _r(w.rho_L), _r(w.kappa_c), _r(0.0), _r(w.kappa_c), _r(w.omega_star)]])
    print(f"r0={w.r0:.12g} rho_L={w.rho_L:.12g} kappa_c={w.kappa_c:.12g} window=(0, {w.kappa_c:.12g})")
    return {"r0": w.r0, "rho_L": w.rho_L, "kappa_c": w.kappa_c, "window": w.window}


def _spectrum_blocks(cfg: ExperimentConfig) -> list[tuple[float | None, complex | None, complex]]:
    if cfg.run.sigma:
        return [(None, None, complex(s)) for s in cfg.run.sigma]
    cfg.require("kappa")
    spec = laplacian_spectrum(cfg.network.build())
    blocks = []
    for k in cfg.run.kappa:
        for mu, sigma in transverse_sigmas(spec, k, conjugate_pairs=True):
            blocks.append((k, mu, sigma))
    return blocks


def cmd_spectrum(cfg: ExperimentConfig, workers: int = 1) -> dict:
    cfg.require("tau")
    tau = cfg.run.tau
    out = _out(cfg)
    rows = []
    periodic = _periodic(cfg)
    model = None if periodic else cfg.model.build()
    window = cfg.run.omega_window or (None if periodic else default_omega_window(model))
    for i, (kappa, mu, sigma) in enumerate(_spectrum_blocks(cfg)):
        if periodic:
            roots = sl_periodic_exact_spectrum(sigma, cfg.model.sl, tau, window)
            branches = sl_periodic_asymptotic(sigma, cfg.model.sl, tau, window, cfg.run.samples) if sigma != 0 else []
        else:
            roots = exact_spectrum_equilibrium(model, sigma, tau, window)
            branches = asymptotic_spectrum(model, sigma, window, cfg.run.samples) if sigma != 0 else []
        write_roots_csv(out / f"roots_{i}.csv", roots)
        if branches:
            write_branches_csv(out / f"branches_{i}.csv", branches)
        n_strong = len(roots.family("strong"))
        rows.append([i, "" if kappa is None else _r(kappa),
                     "" if mu is None else _r(mu.real), "" if mu is None else _r(mu.imag),
                     _r(sigma.real), _r(sigma.imag), len(roots), n_strong, roots.n_dropped, _r(roots.max_real())])
        print(f"block {i}: sigma={sigma:.6g} roots={len(roots)} strong={n_strong} dropped={roots.n_dropped} "
              f"max Re={roots.max_real():.6g}")
    _write_rows(out / "blocks.csv", ["block", "kappa", "re_mu", "im_mu", "re_sigma", "im_sigma", "n_roots",
                                     "n_strong", "n_dropped", "max_re_lambda"], rows)
    return {"blocks": rows}


@dataclass
class SimulationSummary:
    kappa: float
    initial_error: float
    final_error: float
    final_history_norm: float
    blowup: bool
    eta: float
    t_tr: float
    t_tr_predicted: float
    r_squared: float
    fit_window: tuple[float, float]

    def row(self) -> list[str]:
        return [_r(self.kappa), _r(self.initial_error), _r(self.final_error), _r(self.final_history_norm),
                int(self.blowup), _r(self.eta), _r(self.t_tr), _r(self.t_tr_predicted), _r(self.r_squared),
                _r(self.fit_window[0]), _r(self.fit_window[1])]


SIM_HEADER = ["kappa", "initial_error", "final_error", "final_history_norm", "blowup", "eta", "t_tr",
              "t_tr_predicted", "r_squared", "fit_start", "fit_end"]


def _simulate_one(args):
    cfg, index, kappa, stride = args
    run = cfg.run
    net = cfg.network.build()
    model = cfg.model.build()
    hist = HistorySpec.random_constant(net.n, model.q, run.history_seed, run.history_scale)
    traj = simulate(net, model, kappa, run.tau, run.h_step, run.t_end, hist)
    err = sync_error(traj)
    out = cfg.out_dir
    write_trajectory_csv(out / f"trajectory_{index}.csv", traj, stride)
    write_sync_csv(out / f"sync_error_{index}.csv", traj.t, err, stride)
    t_env, env = history_norm(traj.t, err, run.tau)
    ft, fe = (t_env, env) if run.fit_norm == "history" else (traj.t, err)
    start = run.fit_start if run.fit_start is not None else 2.0 * run.tau
    try:
        fit = fit_decay(ft, fe, window=(start, float(ft[-1])), floor=run.fit_floor)
        eta, t_tr, r2, fw = fit.eta, fit.t_tr, fit.r_squared, fit.fit_window
    except InvalidInputError:
        eta = t_tr = r2 = math.nan
        fw = (start, float(ft[-1]))
    pred = math.nan
    if cfg.model.regime == "equilibrium":
        try:
            kc = critical_coupling(model, laplacian_spectrum(net), run.omega_window).kappa_c
            if 0 < kappa < kc:
                pred = transient_time(kappa, kc, run.tau)
        except (PreconditionError, InvalidInputError):
            pass
    return SimulationSummary(kappa, float(err[0]), float(err[-1]), float(env[-1]), traj.blowup,
                             eta, t_tr, pred, r2, fw)


def cmd_simulate(cfg: ExperimentConfig, workers: int = 1, stride: int = 1) -> dict:
    cfg.require("kappa", "tau", "h_step", "t_end")
    _out(cfg)
    items = [(cfg, i, k, stride) for i, k in enumerate(cfg.run.kappa)]
    results = _pmap(_simulate_one, items, workers)
    _write_rows(cfg.out_dir / "simulation.csv", SIM_HEADER, [r.row() for r in results])
    for i, r in enumerate(results):
        print(f"run {i}: kappa={r.kappa:.6g} error {r.initial_error:.3e} -> {r.final_error:.3e} "
              f"(history sup {r.final_history_norm:.3e}){' BLOW-UP' if r.blowup else ''} "
              f"t_tr={r.t_tr:.4g} predicted={r.t_tr_predicted:.4g}")
    return {"runs": results}


def cmd_map(cfg: ExperimentConfig, workers: int = 1) -> dict:
    if not _periodic(cfg):
        raise PreconditionError("the stability map needs the periodic SL regime (kind = sl, alpha > 0)")
    m = cfg.map
    sig = np.linspace(m.sigma_min, m.sigma_max, m.sigma_points)
    taus = np.linspace(m.tau_min, m.tau_max, m.tau_points)
    smap = sl_stability_map(sig, taus, cfg.model.sl, cfg.run.omega_window, workers=workers)
    write_map_csv(_out(cfg) / "map.csv", smap)
    stable = int(np.sum(smap.stable()))
    print(f"map {len(taus)} x {len(sig)}: {stable} stable cells, {int(smap.degenerate.sum())} degenerate tau rows")
    return {"map": smap}


@dataclass
class SweepRow:
    generator: str
    n: int
    sample: int
    seed: int | None
    p: float
    attempts: int
    g_max: int
    rho_L: float
    r0: float
    kappa_c: float
    normalized: float

    @property
    def skipped(self) -> bool:
        return self.seed is None


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)

    HEADER = ["generator", "n", "sample", "seed", "p", "attempts", "g_max", "rho_L", "r0", "kappa_c",
              "normalized"]

    def valid(self, n: int | None = None) -> list[SweepRow]:
        return [r for r in self.rows if not r.skipped and (n is None or r.n == n)]

    def summary(self) -> list[dict]:
        out = []
        for n in sorted({r.n for r in self.rows}):
            vals = np.array([r.normalized for r in self.valid(n)])
            kc = np.array([r.kappa_c for r in self.valid(n)])
            q = np.quantile(vals, [0.25, 0.5, 0.75]) if vals.size else [math.nan] * 3
            out.append({"n": n, "count": int(vals.size),
                        "skipped": sum(1 for r in self.rows if r.n == n and r.skipped),
                        "q25": float(q[0]), "median": float(q[1]), "q75": float(q[2]),
                        "median_kappa_c": float(np.median(kc)) if kc.size else math.nan})
        return out

    def write(self, out: Path) -> None:
        _write_rows(out / "scaling.csv", self.HEADER, [
            [r.generator, r.n, r.sample, "" if r.seed is None else r.seed, _r(r.p), r.attempts,
             "" if r.skipped else r.g_max, _r(r.rho_L), _r(r.r0), _r(r.kappa_c), _r(r.normalized)]
            for r in self.rows])
        _write_rows(out / "scaling_summary.csv",
                    ["n", "count", "skipped", "q25", "median", "q75", "median_kappa_c"],
                    [[s["n"], s["count"], s["skipped"], _r(s["q25"]), _r(s["median"]), _r(s["q75"]),
                      _r(s["median_kappa_c"])] for s in self.summary()])


def sample_seed(seed_base: int, n: int, sample: int, attempt: int) -> int:
    return int(np.random.SeedSequence([seed_base, n, sample, attempt]).generate_state(1, np.uint64)[0])


def _sweep_one(args) -> SweepRow:
    generator, n, sample, seed_base, p0, max_resample, r0 = args
    p = p0 * math.log(n) / n if generator == "er" else math.nan
    for attempt in range(max_resample + 1):
        seed = sample_seed(seed_base, n, sample, attempt)
        net = gen_ba(n, seed) if generator == "ba" else gen_er(n, min(p, 0.999), seed)
        if generator == "ba" or is_connected(net):
            rho = spectral_radius(net)
            kc = r0 / rho
            norm = kc * (math.sqrt(n) if generator == "ba" else math.log(n))
            return SweepRow(generator, n, sample, seed, p, attempt, net.g_max, rho, r0, kc, norm)
    return SweepRow(generator, n, sample, None, p, max_resample + 1, 0, math.nan, r0, math.nan, math.nan)


def scaling_sweep(generator: str, n_values, seeds: int, r0: float, p0: float = 1.1, seed_base: int = 0,
                  max_resample: int = 20, workers: int = 1) -> SweepResult:
    """kappa_c = r0 / rho_L over random graphs; normalized by sqrt(n) (ba) or ln(n) (er)."""
    if generator not in ("ba", "er"):
        raise InvalidInputError(f"sweep generator must be 'ba' or 'er', got {generator!r}")
    items = [(generator, int(n), s, seed_base, p0, max_resample, r0) for n in n_values for s in range(seeds)]
    return SweepResult(_pmap(_sweep_one, items, workers))


def cmd_scaling(cfg: ExperimentConfig, workers: int = 1) -> dict:
    if cfg.model.regime != "equilibrium":
        raise PreconditionError("scaling sweeps need an equilibrium regime")
    model = cfg.model.build()
    r0 = compute_r0(model, cfg.run.omega_window)
    sw = cfg.sweep
    res = scaling_sweep(sw.generator, sw.n_values, sw.seeds, r0, sw.p0, sw.seed_base, sw.max_resample, workers)
    res.write(_out(cfg))
    label = "kappa_c*sqrt(n)" if sw.generator == "ba" else "kappa_c*ln(n)"
    for s in res.summary():
        print(f"{sw.generator} n={s['n']}: {s['count']} samples, {s['skipped']} skipped, "
              f"median {label}={s['median']:.4g} [q25 {s['q25']:.4g}, q75 {s['q75']:.4g}]")
    return {"sweep": res}
