"""Command-line front end.

Exit codes: 0 success, 1 validation failure, 2 property/invariant failure,
3 I/O failure.
"""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, RunConfig, load_config, preset_config, preset_names, preset_yaml
from .engine import EngineError
from .runner import batch, run

EXIT_OK, EXIT_INVALID, EXIT_PROPERTY, EXIT_IO = 0, 1, 2, 3


def _add_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="YAML run configuration")
    src.add_argument("--preset", help="built-in preset name (see 'preset list')")


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--t-end", type=float, help="simulation horizon in seconds")
    p.add_argument("--dense", type=float, metavar="DT", help="also record samples every DT seconds")
    p.add_argument("--pi-selection", choices=["delay", "advance"],
                   help="PRF branch used at phase exactly pi")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcosync", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one configuration and write CSV artifacts")
    _add_source(p)
    _add_overrides(p)
    p.add_argument("--seed", type=int, help="random initial phases from this seed")
    p.add_argument("--out-dir", default="out", help="artifact directory (default: out)")

    p = sub.add_parser("batch", help="repeat a configuration over seeds and aggregate")
    _add_source(p)
    _add_overrides(p)
    p.add_argument("--seed", type=int, help="base seed of the sweep")
    p.add_argument("--count", type=int, help="number of repetitions")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out-dir", default="out", help="artifact directory (default: out)")

    p = sub.add_parser("validate", help="check a configuration without running it")
    _add_source(p)

    p = sub.add_parser("preset", help="inspect built-in presets")
    psub = p.add_subparsers(dest="preset_command", required=True)
    psub.add_parser("list", help="list preset names")
    show = psub.add_parser("show", help="print a preset as YAML")
    show.add_argument("name")
    return parser


def _load(args) -> RunConfig:
    return load_config(args.config) if args.config else preset_config(args.preset)


def _report_config_error(exc: ConfigError) -> int:
    print("invalid configuration:", file=sys.stderr)
    for path, msg in exc.errors:
        print(f"  {path or '<root>'}: {msg}", file=sys.stderr)
    return EXIT_INVALID


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "preset":
        if args.preset_command == "list":
            for name in preset_names():
                print(name)
            return EXIT_OK
        try:
            print(preset_yaml(args.name), end="")
        except KeyError:
            print(f"unknown preset {args.name!r}", file=sys.stderr)
            return EXIT_INVALID
        return EXIT_OK

    try:
        config = _load(args)
        if args.command != "validate":
            overrides = dict(t_end=args.t_end, dense=args.dense, pi_selection=args.pi_selection)
            if args.command == "batch":
                overrides.update(count=args.count, base_seed=args.seed)
            config = config.with_overrides(**overrides)
    except ConfigError as exc:
        return _report_config_error(exc)
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_IO

    if args.command == "validate":
        print(f"{config.name}: ok ({config.n} oscillators, {config.topology.kind.value})")
        return EXIT_OK

    try:
        if args.command == "run":
            try:
                result = run(config, args.out_dir, args.seed)
            except EngineError as exc:
                print(f"simulation aborted: {exc}", file=sys.stderr)
                return EXIT_PROPERTY
            for key, value in result.summary.items():
                print(f"{key}: {value}")
            return EXIT_OK if result.invariants_ok else EXIT_PROPERTY

        report = batch(config, args.out_dir, workers=args.workers)
        for key, value in report.aggregate().items():
            print(f"{key}: {value}")
        for row in report.errors:
            print(f"seed {row.seed} aborted: {row.error}", file=sys.stderr)
        return EXIT_OK if report.passed else EXIT_PROPERTY
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
