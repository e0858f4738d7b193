"""Command-line entry point.

    amrecho run <config> [--solver S] [--out-dir D] [--seed N]
    amrecho sweep <config> [--solver S] [--out-dir D] [--threads K] [--seed N]
    amrecho validate <config>
    amrecho demo [--out FILE]

Exit status is 0 on success, 2 when the config cannot be parsed or fails
validation and 1 for any error raised while running.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..errors import AMRError, ConfigParseError, ConfigValidationError
from .config import RunConfig, demo_config, from_dict, load_config
from .runner import _atomic_write, emit_results, run, sweep, sweep_csv

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="amrecho", description="Raman echo memory simulations with active rephasing.")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, threads=False):
        p.add_argument("config", type=Path, help="JSON run configuration")
        p.add_argument("--solver", choices=["spectral", "timedomain", "both"], help="override the config solver")
        p.add_argument("--out-dir", type=Path, help="override outputs.dir")
        p.add_argument("--seed", type=int, default=None, help="seed for synthetic noise injection")
        if threads:
            p.add_argument("--threads", type=int, default=1, help="sweep points run in parallel")

    common(sub.add_parser("run", help="run one configuration"))
    common(sub.add_parser("sweep", help="run the configured parameter sweep"), threads=True)
    v = sub.add_parser("validate", help="check a configuration without running it")
    v.add_argument("config", type=Path)
    d = sub.add_parser("demo", help="print the default scenario configuration")
    d.add_argument("--out", type=Path, default=None, help="write to a file instead of stdout")
    return ap


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "solver", None):
        cfg = from_dict({**cfg.to_dict(), "solver": args.solver}, check=True)
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    return args.out_dir if args.out_dir is not None else Path(cfg.outputs["dir"])


def _cmd_run(args) -> int:
    cfg = _load(args)
    res = run(cfg, seed=args.seed)
    for p in emit_results(res, _out_dir(args, cfg), cfg.outputs["formats"]):
        print(p)
    for k, rep in res.reports.items():
        print(f"{k}: efficiency={rep.efficiency:.6f} fidelity={rep.fidelity:.6f} delay={rep.delay:.4f}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    if cfg.sweep is None:
        raise ConfigValidationError("config has no 'sweep' section", stage="config")
    rows = sweep(cfg, threads=max(1, args.threads), seed=args.seed)
    dest = _out_dir(args, cfg) / "sweep.csv"
    _atomic_write(dest, sweep_csv(rows))
    print(dest)
    return EXIT_OK


def _cmd_validate(args) -> int:
    load_config(args.config)
    print(f"{args.config}: ok")
    return EXIT_OK


def _cmd_demo(args) -> int:
    text = demo_config().dumps()
    if args.out is None:
        sys.stdout.write(text)
    else:
        _atomic_write(args.out, text)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    cmd = {"run": _cmd_run, "sweep": _cmd_sweep, "validate": _cmd_validate, "demo": _cmd_demo}[args.verb]
    try:
        return cmd(args)
    except (ConfigParseError, ConfigValidationError) as exc:
        print(f"amrecho: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (AMRError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"amrecho: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
