"""delay-sync <window|spectrum|simulate|map|scaling> --config <path> [--threads k] [--out dir] [--stride s]"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import commands
from .config import load_config
from .errors import DelaySyncError
from .graph import LARGE_GRAPH_WARNING

THREADS_ENV = "DELAY_SYNC_THREADS"

COMMANDS = {
    "window": commands.cmd_window,
    "spectrum": commands.cmd_spectrum,
    "simulate": commands.cmd_simulate,
    "map": commands.cmd_map,
    "scaling": commands.cmd_scaling,
}


def _default_threads() -> int:
    v = os.environ.get(THREADS_ENV)
    if v is None:
        return 1
    try:
        return max(1, int(v))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="delay-sync",
                                 description="Synchronization windows and spectra of delay-coupled networks.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, type=Path, help="INI experiment file")
    ap.add_argument("--threads", type=int, default=None,
                    help=f"worker processes for sweeps (default ${THREADS_ENV} or 1)")
    ap.add_argument("--out", type=Path, default=None, help="output directory (overrides [output] dir)")
    ap.add_argument("--stride", type=int, default=1, help="row stride for trajectory CSVs")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads if args.threads is not None else _default_threads()
    if threads < 1 or args.stride < 1:
        print("error: --threads and --stride must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.out_dir = args.out
        if cfg.network.edgelist is None and cfg.network.n > LARGE_GRAPH_WARNING and args.command != "scaling":
            print(f"warning: n={cfg.network.n} > {LARGE_GRAPH_WARNING}; dense eigen-decomposition may be slow",
                  file=sys.stderr)
        fn = COMMANDS[args.command]
        if args.command == "simulate":
            fn(cfg, workers=threads, stride=args.stride)
        else:
            fn(cfg, workers=threads)
    except DelaySyncError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
