"""INI experiment configuration.

Sections and keys (all optional unless a command needs them):

[model]    kind = sl | matrices; alpha, beta (sl); j_file, h_file (matrices, np.loadtxt);
           regime = equilibrium | periodic (sl only; default from the sign of alpha)
[network]  generator = directed_ring | complete | undirected_ring | star | path | er | ba,
           n, seed, p or p0 (er); or edgelist = <path>
[run]      kappa (comma list allowed), tau, h_step or steps_per_delay, t_end,
           sigma (comma list, overrides kappa * mu), omega_window = lo, hi,
           history_seed, history_scale, fit_start, fit_floor, fit_norm = history | pointwise,
           samples, blocks = all | spectral_radius, tol
[map]      sigma_min, sigma_max, sigma_points, tau_min, tau_max, tau_points
[sweep]    generator = ba | er, n_values, seeds, seed_base, p0, max_resample
[output]   dir

Numbers may be written as plain floats or as multiples of pi ("pi", "2*pi", "pi/2").
Input file paths are resolved against the directory of the config file; the
output directory is taken relative to the working directory.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidInputError
from .graph import REGULAR_KINDS, Network, gen_ba, gen_directed_ring, gen_er, gen_regular, read_edgelist
from .sl_model import SLParams, sl_equilibrium_model
from .spectrum import LocalModel

GENERATORS = ("directed_ring",) + REGULAR_KINDS + ("er", "ba")
_PI = re.compile(r"^\s*([-+]?\d*\.?\d*(?:e[-+]?\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d*\.?\d+))?\s*$", re.I)


def parse_real(text: str, key: str = "value") -> float:
    s = text.strip()
    m = _PI.match(s)
    try:
        if m:
            coef = m.group(1)
            c = 1.0 if coef in ("", "+") else (-1.0 if coef == "-" else float(coef))
            v = c * math.pi / (float(m.group(2)) if m.group(2) else 1.0)
        else:
            v = float(s)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as a number") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key}: value must be finite, got {text!r}")
    return v


def parse_list(text: str, key: str) -> list[float]:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"{key}: empty list")
    return [parse_real(p, key) for p in parts]


@dataclass
class ModelConfig:
    kind: str = "sl"
    alpha: float = -1.0
    beta: float = math.pi
    regime: str = "equilibrium"
    J: np.ndarray | None = None
    H: np.ndarray | None = None

    @property
    def sl(self) -> SLParams:
        return SLParams(self.alpha, self.beta)

    def build(self) -> LocalModel:
        if self.kind == "sl":
            return sl_equilibrium_model(self.sl)
        return LocalModel.linear(self.J, self.H, name="matrices")


@dataclass
class NetworkConfig:
    generator: str | None = "directed_ring"
    n: int = 4
    seed: int = 0
    p: float | None = None
    p0: float | None = None
    edgelist: Path | None = None

    def build(self) -> Network:
        if self.edgelist is not None:
            return read_edgelist(self.edgelist)
        g = self.generator
        if g == "directed_ring":
            return gen_directed_ring(self.n)
        if g in REGULAR_KINDS:
            return gen_regular(g, self.n)
        if g == "ba":
            return gen_ba(self.n, self.seed)
        p = self.p if self.p is not None else self.p0 * math.log(self.n) / self.n
        return gen_er(self.n, p, self.seed)


@dataclass
class RunConfig:
    kappa: list[float] = field(default_factory=list)
    tau: float | None = None
    h_step: float | None = None
    t_end: float | None = None
    sigma: list[float] | None = None
    omega_window: tuple[float, float] | None = None
    history_seed: int = 1
    history_scale: float = 1.0
    fit_start: float | None = None
    fit_floor: float = 1e-11
    fit_norm: str = "history"
    samples: int = 2001
    blocks: str = "all"
    tol: float = 1e-4


@dataclass
class MapConfig:
    sigma_min: float = -1.0
    sigma_max: float = 1.0
    sigma_points: int = 41
    tau_min: float = 0.1
    tau_max: float = 5.0
    tau_points: int = 50


@dataclass
class SweepConfig:
    generator: str = "ba"
    n_values: list[int] = field(default_factory=lambda: [512, 1024, 2048, 4096])
    seeds: int = 20
    seed_base: int = 0
    p0: float = 1.1
    max_resample: int = 20


@dataclass
class ExperimentConfig:
    model: ModelConfig
    network: NetworkConfig
    run: RunConfig
    map: MapConfig
    sweep: SweepConfig
    out_dir: Path
    source: Path | None = None

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self.run, n) in (None, [])]
        if missing:
            raise ConfigError(f"[run] missing required key(s): {', '.join(missing)}")


class _Section:
    def __init__(self, cp: configparser.ConfigParser, name: str):
        self.name = name
        self.sec = cp[name] if cp.has_section(name) else {}
        self.used: set[str] = set()

    def raw(self, key):
        self.used.add(key)
        return self.sec.get(key)

    def real(self, key, default=None):
        v = self.raw(key)
        return default if v is None else parse_real(v, f"[{self.name}] {key}")

    def integer(self, key, default=None):
        v = self.raw(key)
        if v is None:
            return default
        try:
            return int(v.strip())
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}: expected an integer, got {v!r}") from None

    def reals(self, key, default=None):
        v = self.raw(key)
        return default if v is None else parse_list(v, f"[{self.name}] {key}")

    def choice(self, key, options, default):
        v = self.raw(key)
        if v is None:
            return default
        v = v.strip()
        if v not in options:
            raise ConfigError(f"[{self.name}] {key}: {v!r} not in {list(options)}")
        return v

    def check_unknown(self):
        extra = sorted(set(self.sec) - self.used)
        if extra:
            raise ConfigError(f"[{self.name}] unknown key(s): {', '.join(extra)}")


def _path(base: Path, text: str | None, key: str) -> Path | None:
    if text is None:
        return None
    p = Path(text.strip())
    if not p.is_absolute():
        p = base / p
    if not p.exists():
        raise ConfigError(f"{key}: file {p} does not exist")
    return p


def _matrix(path: Path, key: str) -> np.ndarray:
    try:
        M = np.atleast_2d(np.loadtxt(path, dtype=float))
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot read matrix from {path} ({exc})") from None
    if not np.all(np.isfinite(M)):
        raise ConfigError(f"{key}: matrix has non-finite entries")
    return M


def parse_config(text: str, base: Path = Path("."), source: Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {"model", "network", "run", "map", "sweep", "output"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(extra))}")

    s = _Section(cp, "model")
    kind = s.choice("kind", ("sl", "matrices"), "sl")
    model = ModelConfig(kind=kind)
    if kind == "sl":
        model.alpha = s.real("alpha", -1.0)
        model.beta = s.real("beta", math.pi)
        if model.beta <= 0:
            raise ConfigError("[model] beta must be positive")
        if model.alpha == 0:
            raise ConfigError("[model] alpha must be nonzero")
        default = "equilibrium" if model.alpha < 0 else "periodic"
        model.regime = s.choice("regime", ("equilibrium", "periodic"), default)
        if model.regime == "periodic" and model.alpha < 0:
            raise ConfigError("[model] periodic regime needs alpha > 0")
    else:
        jp = _path(base, s.raw("j_file"), "[model] j_file")
        hp = _path(base, s.raw("h_file"), "[model] h_file")
        if jp is None or hp is None:
            raise ConfigError("[model] kind = matrices needs j_file and h_file")
        model.J, model.H = _matrix(jp, "[model] j_file"), _matrix(hp, "[model] h_file")
        if model.J.shape != model.H.shape or model.J.shape[0] != model.J.shape[1]:
            raise ConfigError("[model] J and H must be square matrices of equal size")
    s.check_unknown()

    s = _Section(cp, "network")
    edgelist = _path(base, s.raw("edgelist"), "[network] edgelist")
    gen = s.raw("generator")
    if edgelist is not None and gen is not None:
        raise ConfigError("[network] give either generator or edgelist, not both")
    net = NetworkConfig(generator=None if edgelist is not None else (gen or "directed_ring").strip(),
                        edgelist=edgelist)
    if net.generator is not None and net.generator not in GENERATORS:
        raise ConfigError(f"[network] generator {net.generator!r} not in {list(GENERATORS)}")
    net.n = s.integer("n", 4)
    net.seed = s.integer("seed", 0)
    net.p = s.real("p")
    net.p0 = s.real("p0")
    if net.generator == "er" and (net.p is None) == (net.p0 is None):
        raise ConfigError("[network] er needs exactly one of p or p0")
    s.check_unknown()

    s = _Section(cp, "run")
    run = RunConfig()
    run.kappa = s.reals("kappa", [])
    run.tau = s.real("tau")
    if run.tau is not None and run.tau <= 0:
        raise ConfigError("[run] tau must be positive")
    run.h_step = s.real("h_step")
    spd = s.integer("steps_per_delay")
    if spd is not None:
        if run.h_step is not None:
            raise ConfigError("[run] give h_step or steps_per_delay, not both")
        if run.tau is None:
            raise ConfigError("[run] steps_per_delay needs tau")
        run.h_step = run.tau / spd
    run.t_end = s.real("t_end")
    run.sigma = s.reals("sigma")
    win = s.reals("omega_window")
    if win is not None:
        if len(win) != 2 or not win[0] < win[1]:
            raise ConfigError("[run] omega_window must be 'lo, hi' with lo < hi")
        run.omega_window = (win[0], win[1])
    run.history_seed = s.integer("history_seed", 1)
    run.history_scale = s.real("history_scale", 1.0)
    run.fit_start = s.real("fit_start")
    run.fit_floor = s.real("fit_floor", 1e-11)
    run.fit_norm = s.choice("fit_norm", ("history", "pointwise"), "history")
    run.samples = s.integer("samples", 2001)
    run.blocks = s.choice("blocks", ("all", "spectral_radius"), "all")
    run.tol = s.real("tol", 1e-4)
    s.check_unknown()

    s = _Section(cp, "map")
    mp = MapConfig(
        sigma_min=s.real("sigma_min", -1.0), sigma_max=s.real("sigma_max", 1.0),
        sigma_points=s.integer("sigma_points", 41), tau_min=s.real("tau_min", 0.1),
        tau_max=s.real("tau_max", 5.0), tau_points=s.integer("tau_points", 50),
    )
    if mp.sigma_points < 1 or mp.tau_points < 1 or mp.tau_min <= 0:
        raise ConfigError("[map] needs positive point counts and tau_min > 0")
    s.check_unknown()

    s = _Section(cp, "sweep")
    sw = SweepConfig(
        generator=s.choice("generator", ("ba", "er"), "ba"),
        n_values=[int(v) for v in s.reals("n_values", [512, 1024, 2048, 4096])],
        seeds=s.integer("seeds", 20), seed_base=s.integer("seed_base", 0),
        p0=s.real("p0", 1.1), max_resample=s.integer("max_resample", 20),
    )
    if sw.seeds < 1 or any(n < 2 for n in sw.n_values):
        raise ConfigError("[sweep] needs seeds >= 1 and every n >= 2")
    s.check_unknown()

    s = _Section(cp, "output")
    out = Path((s.raw("dir") or "out").strip())
    s.check_unknown()
    return ExperimentConfig(model, net, run, mp, sw, out, source)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} not found")
    try:
        cfg = parse_config(p.read_text(), base=p.resolve().parent, source=p)
    except InvalidInputError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return cfg
