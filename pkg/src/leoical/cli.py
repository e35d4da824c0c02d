"""Command-line entry point: ``leoical run ...`` and ``leoical convergence ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import desk_profile, load_config, table_profile
from .errors import LeoIcalError
from .experiment import ARCHS, ExperimentSpec, MmSettings, emit_convergence, run_experiment

log = logging.getLogger("leoical")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _archs(text: str) -> tuple:
    names = tuple(t.strip() for t in text.split(",") if t.strip())
    bad = [n for n in names if n not in ARCHS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown architecture(s) {bad}; choose from {ARCHS}")
    return names


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leoical", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sweep and write results.csv and traces")
    run.add_argument("--config", type=Path, help="key = value file layered over the profile")
    run.add_argument("--profile", choices=("desk", "table"), default="desk")
    run.add_argument("--sweep-power", type=_floats, default=(10.0,), help="dBW list, e.g. 10,16,22")
    run.add_argument("--sweep-rho", type=_floats, default=(1.0,), help="rho list in [0, 1]")
    run.add_argument("--arch", type=_archs, default=("fully_connected",),
                     help="one or more of " + ", ".join(ARCHS))
    run.add_argument("--seeds", type=_ints, default=(0,))
    run.add_argument("--subcarriers", type=int, help="retained subcarriers (0 keeps all)")
    run.add_argument("--out", type=Path, default=Path("results"))
    run.add_argument("--mc-draws", type=int, default=0)
    run.add_argument("--trace-every", type=int, default=0, help="SE/APEB snapshot period")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--mm-iters", type=int, default=MmSettings.max_iter)
    run.add_argument("-v", "--verbose", action="store_true")

    conv = sub.add_parser("convergence", help="long-format CSV from trace files")
    conv.add_argument("traces", nargs="*", type=Path)
    conv.add_argument("--out", type=Path)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "convergence":
            text = emit_convergence(args.traces, args.out)
            if args.out is None:
                sys.stdout.write(text)
            return 0
        base = desk_profile() if args.profile == "desk" else table_profile()
        cfg = load_config(args.config, base) if args.config else base
        if args.subcarriers is not None:
            cfg = cfg.replace(retained_subcarriers=args.subcarriers)
        spec = ExperimentSpec(config=cfg, powers_dBW=args.sweep_power, rhos=args.sweep_rho,
                              archs=args.arch, seeds=args.seeds, out_dir=str(args.out),
                              mc_draws=args.mc_draws, trace_every=args.trace_every,
                              workers=args.workers, mm=MmSettings(max_iter=args.mm_iters))
        log.info("running %d scenario blocks", len(spec.seeds) * len(spec.powers_dBW))
        path = run_experiment(spec)
        print(path)
        return 0
    except LeoIcalError as exc:
        print(f"leoical: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
