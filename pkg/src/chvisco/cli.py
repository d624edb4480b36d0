"""Command line entry point: ``chvisco --preset TC1a --steps 100 --out runs/tc1a``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import RunConfig, load_ini, preset
from .run import run
from .scheme_cs import StepFailure


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chvisco", description="Cahn-Hilliard / viscoelastic phase-field runs.")
    p.add_argument("--config", help="INI file; flags below override its keys")
    p.add_argument("--preset", help="TC1a, TC1b, TC2a, TC2b, STAT0, STAT1; variants as NAME:key=value,...")
    p.add_argument("--scheme", choices=["CS", "DSAV", "cs", "dsav"])
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--mesh", nargs=2, type=int, metavar=("NX", "NY"))
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    cfg = preset(args.preset) if args.preset else RunConfig()
    if args.config:
        cfg = load_ini(args.config, base=cfg)
    changes = {}
    if args.scheme:
        changes["scheme"] = args.scheme.upper()
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.steps is not None:
        changes["steps"] = args.steps
    if args.out:
        changes["out_dir"] = args.out
    if args.mesh:
        changes["nx"], changes["ny"] = args.mesh
    return cfg.replace(**changes)


def _fail(kind: str, message: str, **extra) -> int:
    payload = {"error": kind, "message": message}
    payload.update(extra)
    print(json.dumps(payload), file=sys.stderr)
    return 2 if kind == "config" else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (ValueError, OSError) as exc:
        return _fail("config", str(exc))
    try:
        result = run(cfg)
    except StepFailure as exc:
        return _fail("step", str(exc), subsystem=exc.subsystem)
    except (OSError, ValueError, RuntimeError) as exc:
        return _fail(type(exc).__name__, str(exc))
    last = result.reports[-1]
    print(f"{cfg.scheme} {cfg.steps} steps in {result.elapsed:.1f}s: t={last.t:.6g} L={last.L:.10g} "
          f"mass={last.mass:.12g} -> {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
