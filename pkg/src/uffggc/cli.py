"""Command-line front end.

    uffggc shifts CONFIG [--chi-steps N]
    uffggc budget CONFIG [--chi X] [--uncompensated]
    uffggc integrate CONFIG [--months M] [--chi-steps N] [--points P]
    uffggc verify-shots CONFIG --target-r DR --target-v DV

CONFIG is an INI file or the preset name ``table1``.  CSV outputs go to the
run block's ``output_dir`` (overridden by ``$UFFGGC_OUTPUT_DIR``) unless
``--output -`` sends them to stdout.

Exit codes: 0 success, 2 configuration error, 3 solver or propagation
failure, 4 model violation.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .budget import MONTH, ggc_residual_budget, integration_curve, verification_shots
from .compensation import ConvergenceError, chi_grid, shifts_sweep, sweep_csv
from .config import ConfigError, load_config
from .dynamics import ModelViolationError, PropagationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_MODEL = 4

log = logging.getLogger("uffggc")


def _emit(text: str, target: str | None, default: Path) -> None:
    if target == "-":
        sys.stdout.write(text)
        return
    path = Path(target) if target else default
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    print(path)


def cmd_shifts(args) -> int:
    cfg = load_config(args.config)
    steps = args.chi_steps or cfg.run.chi_steps
    m = cfg.mission
    sp = m.species_a
    results = shifts_sweep(m.frame(0.0), sp.pulses(), chi_grid(steps), workers=cfg.run.workers)
    log.info("solved %d orbital angles", len(results))
    _emit(sweep_csv(results, sp.k_eff), args.output, cfg.run.output_path(cfg.run.shifts_csv))
    return EXIT_OK


def cmd_budget(args) -> int:
    cfg = load_config(args.config)
    chi = cfg.run.budget_chi if args.chi is None else args.chi
    ledger = ggc_residual_budget(cfg.mission, chi, compensated=not args.uncompensated)
    _emit(ledger.to_csv(), args.output, cfg.run.output_path(cfg.run.budget_csv))
    return EXIT_OK


def cmd_integrate(args) -> int:
    cfg = load_config(args.config)
    months = cfg.run.duration_months if args.months is None else args.months
    steps = args.chi_steps or cfg.run.chi_steps
    points = args.points or cfg.run.curve_points
    if months <= 0:
        raise ConfigError("--months must be positive")
    curve = integration_curve(cfg.mission, months * MONTH, chi_steps=steps, workers=cfg.run.workers)
    _emit(curve.downsample(points).to_csv(), args.output, cfg.run.output_path(cfg.run.curve_csv))
    return EXIT_OK


def cmd_verify_shots(args) -> int:
    cfg = load_config(args.config)
    atoms = min(cfg.mission.species_a.atoms, cfg.mission.species_b.atoms)
    try:
        nu = verification_shots(cfg.cloud_sigma_r, cfg.cloud_sigma_v, atoms, args.target_r, args.target_v)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(nu)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uffggc", description="Gravity-gradient compensation and UFF-test budgets")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("shifts", help="compensation shifts and laser settings over one orbit")
    s.add_argument("config")
    s.add_argument("--chi-steps", type=int, default=None)
    s.add_argument("-o", "--output", default=None, help="output file, '-' for stdout")
    s.set_defaults(func=cmd_shifts)

    b = sub.add_parser("budget", help="uncertainty ledger at one orbital angle")
    b.add_argument("config")
    b.add_argument("--chi", type=float, default=None)
    b.add_argument("--uncompensated", action="store_true")
    b.add_argument("-o", "--output", default=None)
    b.set_defaults(func=cmd_budget)

    i = sub.add_parser("integrate", help="demodulated uncertainty curves over the mission")
    i.add_argument("config")
    i.add_argument("--months", type=float, default=None)
    i.add_argument("--chi-steps", type=int, default=None)
    i.add_argument("--points", type=int, default=None)
    i.add_argument("-o", "--output", default=None)
    i.set_defaults(func=cmd_integrate)

    v = sub.add_parser("verify-shots", help="verification shots for target co-location knowledge")
    v.add_argument("config")
    v.add_argument("--target-r", type=float, required=True)
    v.add_argument("--target-v", type=float, required=True)
    v.set_defaults(func=cmd_verify_shots)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if getattr(args, "chi_steps", None) is not None and args.chi_steps < 1:
        print("error: --chi-steps must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "chi", None) is not None and not math.isfinite(args.chi):
        print("error: --chi must be finite", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, PropagationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ModelViolationError as exc:
        print(f"model violation: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
