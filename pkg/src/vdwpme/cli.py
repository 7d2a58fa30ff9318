"""Command line entry point.

    vdwpme run CONFIG [--out DIR] [--snapshot-every N] [--h-exp K] [--strict-picard]
    vdwpme run --preset experiment1 --h-exp 6

Exit status: 0 completed, 2 configuration error, 3 solver failure or strict
Picard abort, 4 stopped on blow-up.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import PRESETS, ConfigError, load_preset, parse_config
from .io import write_csv, write_diagnostics_csv, write_vtk
from .stepper import run_simulation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_BLOWUP = 4
OUT_ENV = "VDWPME_OUT"

log = logging.getLogger("vdwpme")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vdwpme", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario")
    run.add_argument("config", nargs="?", help="config file (flat dotted key = value)")
    run.add_argument("--preset", choices=PRESETS)
    run.add_argument("--out", help=f"output directory (env {OUT_ENV} also works)")
    run.add_argument("--snapshot-every", type=int)
    run.add_argument("--h-exp", type=int, help="mesh size 2^-K")
    run.add_argument("--strict-picard", action="store_true",
                     help="abort when the Picard iteration hits its cap")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override any config key")
    return parser


def load_config(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.h_exp is not None:
        overrides["mesh.h_exp"] = str(args.h_exp)
    if args.snapshot_every is not None:
        overrides["output.snapshot_every"] = str(args.snapshot_every)
    if args.strict_picard:
        overrides["picard.policy"] = "strict"
    out = args.out or os.environ.get(OUT_ENV)
    if out:
        overrides["output.dir"] = out
    if args.config and args.preset:
        raise ConfigError("give either a config file or --preset, not both")
    if args.preset:
        return load_preset(args.preset, overrides)
    if not args.config:
        raise ConfigError("a config file or --preset is required")
    return parse_config(args.config, overrides)


def run(args) -> int:
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)

    out = Path(cfg.output_dir)
    nx, ny = cfg.resolution()
    log.info("%s: %dx%d elements, tau=%g, %d steps -> %s", cfg.name, nx, ny, cfg.tau, cfg.n_steps, out)

    def dump(snap):
        stem = out / f"snapshot_{snap.step:05d}"
        write_csv(snap, stem.with_suffix(".csv"))
        if cfg.write_vtk:
            write_vtk(snap, stem.with_suffix(".vtk"))

    try:
        result = run_simulation(cfg, on_snapshot=dump)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_diagnostics_csv(result.records, out / "diagnostics.csv")

    last = result.records[-1]
    print(f"{cfg.name}: {result.status} after step {last.step}, "
          f"c in [{last.c_min:.6g}, {last.c_max:.6g}], mass {last.mass:.6g}")
    if result.status == "completed":
        return EXIT_OK
    print(result.message, file=sys.stderr)
    if result.status == "blowup":
        return EXIT_BLOWUP
    return EXIT_SOLVER


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return run(args)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
