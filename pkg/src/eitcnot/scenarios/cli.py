"""Command line entry point: ``eitcnot run|sweep|list-scenarios|validate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..hilbert import LeakedStateError
from ..propagate import NumericalError
from .builtin import BUILTIN_NAMES, builtin, builtin_dict
from .config import FORMATS, SWEEP_AXES, ConfigError, load, sweep_from_dict, with_sweeps
from .output import OutputError, emit_outputs
from .runner import WORKERS_ENV, ScenarioResult, default_workers, run_scenario, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("eitcnot")


def _formats(text: str) -> tuple[str, ...]:
    items = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [x for x in items if x not in FORMATS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"formats must be drawn from {', '.join(FORMATS)}")
    return items


def _values(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _config(source: str | None, scenario: str | None):
    if scenario:
        return builtin(scenario)
    if source is None:
        raise ConfigError("<cli>", "give a config path or --scenario NAME")
    if not Path(source).exists() and source in BUILTIN_NAMES:
        return builtin(source)
    return load(source)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eitcnot", description="EIT-based multi-target CNOT simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write its outputs")
    run.add_argument("config", nargs="?", help="path to a JSON config (or a builtin name)")
    run.add_argument("--scenario", choices=BUILTIN_NAMES, help="use a builtin scenario")
    run.add_argument("--out", help="output directory (default: config output.dir)")
    run.add_argument("--format", type=_formats, help="comma-separated subset of csv,json,svg")
    run.add_argument("--tol", type=float, help="integrator tolerance")
    run.add_argument("--workers", type=int, help=f"sweep workers (default ${WORKERS_ENV} or 1)")
    run.add_argument("--no-sweeps", action="store_true", help="skip the config's sweeps")

    sw = sub.add_parser("sweep", help="run a single sweep over one axis")
    sw.add_argument("config", help="path to a JSON config (or a builtin name)")
    sw.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sw.add_argument("--values", required=True, type=_values)
    sw.add_argument("--out")
    sw.add_argument("--format", type=_formats)
    sw.add_argument("--tol", type=float)
    sw.add_argument("--workers", type=int)

    sub.add_parser("list-scenarios", help="list builtin scenarios")

    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("config")
    return p


def _emit(result, cfg, args) -> None:
    out = args.out or cfg.output.dir
    formats = args.format or cfg.output.formats
    for path in emit_outputs(result, out, formats):
        print(path)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list-scenarios":
            for name in BUILTIN_NAMES:
                print(f"{name:18s} {builtin_dict(name)['description']}")
            return EXIT_OK
        if args.command == "validate":
            cfg = _config(args.config, None)
            print(f"ok: {cfg.name} ({len(cfg.sweeps)} sweeps)")
            return EXIT_OK
        workers = args.workers if args.workers is not None else default_workers()
        if args.tol is not None and not 1e-12 <= args.tol <= 1e-6:
            raise ConfigError("--tol", "tol must lie in [1e-12, 1e-6]")
        if args.command == "run":
            cfg = _config(args.config, args.scenario)
            result = run_scenario(cfg, workers=workers, tol=args.tol, include_sweeps=not args.no_sweeps)
            for key, value in result.summary.items():
                print(f"{key}: {value}")
            _emit(result, cfg, args)
            return EXIT_OK
        if args.command == "sweep":
            cfg = _config(args.config, None)
            cfg = with_sweeps(cfg, [sweep_from_dict({"axis": args.axis, "values": list(args.values)})])
            sweep = run_sweep(cfg, cfg.sweeps[0], workers=workers, tol=args.tol)
            result = ScenarioResult(cfg, sweeps=[sweep])
            failed = [r for r in sweep.rows if r.get("error")]
            for r in failed:
                log.warning("point %s=%s failed: %s", args.axis, r[args.axis], r["error"])
            _emit(result, cfg, args)
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, LeakedStateError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
