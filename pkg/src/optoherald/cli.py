"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 numerical or convergence
failure, 3 regime violation with ``--strict``.
"""

import argparse
import sys
import warnings

from . import __version__
from .checks import run_checks
from .config import RunConfig, config_from_dict, load_config
from .errors import ConfigError, OptoHeraldError, RegimeError, RegimeWarning
from .sweeps import RUNNERS, zero_contour

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_REGIME = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="optoherald",
                                 description="Heralded phonon-state calculations and sweeps.")
    ap.add_argument("--version", action="version", version=f"optoherald {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("sweep-q", "Mandel Q over r, phi, n_m, beta"),
        ("protocol", "pulsed write/herald/read pipeline"),
        ("steady", "continuous multi-tone steady state"),
        ("sensitivity", "drive-miscalibration formula vs finite differences"),
        ("validate", "run the invariant self-check suite"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML or JSON run configuration")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), dest="fmt")
        p.add_argument("--jobs", type=int, help="worker processes")
        p.add_argument("--strict", action="store_true", default=None,
                       help="treat regime warnings as errors")
        p.add_argument("--dim-cap", type=int, dest="dim_cap",
                       help="largest Fock dimension used for numerical evaluation")
        if name == "sweep-q":
            p.add_argument("--contour-out", help="also write the q_analytic = 0 contour here")
    return ap


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config, args.command) if args.config else config_from_dict({}, args.command)
    if args.fmt is not None:
        cfg.fmt = args.fmt
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg.jobs = args.jobs
    if args.strict:
        cfg.strict = True
    if args.dim_cap is not None:
        if args.dim_cap < 0:
            raise ConfigError("--dim-cap must be >= 0")
        cfg.dim_cap = args.dim_cap
    if args.out is not None:
        cfg.out = args.out
    return cfg


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def run(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if cfg.command == "validate":
        table = run_checks(cfg.policy)
        _emit(table.dumps(cfg.fmt), cfg.out)
        return EXIT_OK if all(s == "pass" for s in table.column("status")) else EXIT_NUMERIC
    if cfg.command != "sweep-q" and not cfg.axes and not cfg.params and cfg.system is None:
        raise ConfigError(f"{cfg.command} needs a configuration file")
    table = RUNNERS[cfg.command](cfg)
    _emit(table.dumps(cfg.fmt), cfg.out)
    contour = getattr(args, "contour_out", None)
    if contour:
        _emit(zero_contour(table).dumps(cfg.fmt), contour)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    warnings.simplefilter("default", RegimeWarning)
    try:
        return run(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeError as e:
        print(f"regime violation: {e}", file=sys.stderr)
        return EXIT_REGIME
    except (OptoHeraldError, ArithmeticError, ValueError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
