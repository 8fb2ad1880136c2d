"""Command-line entry point.

Verbs:
  run            train the configured (method, seed) grid and aggregate
  sweep          same, forcing a lambda2 sweep axis
  dump-features  write bottleneck features of a trained checkpoint
  gradcheck      finite-difference verification of losses and network

Exit codes: 0 success, 1 configuration error (bad flags, bad config
file, bad checkpoint), 2 run failure (training or IO trouble once the
configuration itself was accepted).
"""

import argparse
import dataclasses
import sys

from .experiment import (
    DEFAULT_SWEEP,
    _KEY_PARSERS,
    build_datasets,
    dump_features,
    parse_config,
    run_experiment,
)
from .gradcheck import ALL_CHECKS, format_results, run_suite
from .network import load_params


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the CLI contract reserves
    2 for run failures, so remap to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_spec_flags(parser):
    parser.add_argument("--config", metavar="FILE",
                        help="key = value config file")
    for key in _KEY_PARSERS:
        parser.add_argument(f"--{key.replace('_', '-')}",
                            dest=f"spec_{key}", metavar="VALUE",
                            help=argparse.SUPPRESS)


def _spec_overrides(args):
    return {key: getattr(args, f"spec_{key}") for key in _KEY_PARSERS
            if getattr(args, f"spec_{key}") is not None}


def build_parser():
    parser = _Parser(prog="jdda",
                     description="Domain-adaptation training toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser(
        "run", parents=[], help="train the configured grid",
        description="Train every (method, seed) cell and write report "
                    "CSVs, checkpoints and an aggregate table. Any "
                    "config key can be overridden with --<key> VALUE.")
    _add_spec_flags(run)

    sweep = commands.add_parser(
        "sweep", help="lambda2 sensitivity sweep",
        description="Like run, but trains once per lambda2 value. Uses "
                    "--sweep-lambda2 or the built-in default grid.")
    _add_spec_flags(sweep)

    dump = commands.add_parser(
        "dump-features", help="export bottleneck features to CSV",
        description="Rebuild the configured datasets, load a trained "
                    "checkpoint, and write one domain's bottleneck "
                    "features for external plotting.")
    _add_spec_flags(dump)
    dump.add_argument("--params", required=True, metavar="FILE",
                      help="checkpoint written by a run")
    dump.add_argument("--output", required=True, metavar="FILE",
                      help="destination CSV")
    dump.add_argument("--domain", choices=("source", "target"),
                      default="source")

    grad = commands.add_parser(
        "gradcheck", help="finite-difference gradient verification",
        description="Compare analytic gradients against central "
                    "differences on randomized small instances.")
    grad.add_argument("--checks", metavar="LIST",
                      help=f"comma-separated subset of {ALL_CHECKS}")
    grad.add_argument("--instances", type=int, default=100)
    grad.add_argument("--seed", type=int, default=0)

    return parser


def _print_aggregate(result):
    print(f"{'method':<15} {'lambda2':<9} {'mean':<10} "
          f"{'std':<10} {'pct':>7}")
    for cell in result.cells:
        std = "-" if cell.std is None else f"{cell.std:.4f}"
        print(f"{cell.method:<15} {cell.lambda2:<9g} {cell.mean:<10.4f} "
              f"{std:<10} {100.0 * cell.mean:>7.2f}")


def main(argv=None):
    args = build_parser().parse_args(argv)

    try:
        if args.command in ("run", "sweep", "dump-features"):
            spec = parse_config(args.config, _spec_overrides(args))
            if args.command == "sweep" and spec.sweep_lambda2 is None:
                spec = dataclasses.replace(spec,
                                           sweep_lambda2=DEFAULT_SWEEP)
            if args.command == "dump-features":
                params = load_params(args.params)
                source, target = build_datasets(spec)
        else:
            checks = (None if args.checks is None
                      else tuple(p.strip() for p in args.checks.split(",")
                                 if p.strip()))
            if args.instances < 1:
                raise ValueError("--instances must be positive")
            if checks is not None:
                for name in checks:
                    if name not in ALL_CHECKS:
                        raise ValueError(f"unknown check {name!r}; "
                                         f"choose from {ALL_CHECKS}")
    except (ValueError, OSError) as exc:
        print(f"jdda: config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command in ("run", "sweep"):
            result = run_experiment(spec)
            _print_aggregate(result)
        elif args.command == "dump-features":
            dataset = source if args.domain == "source" else target
            ratio = dump_features(params, dataset, args.output,
                                  domain=args.domain)
            if ratio is not None:
                print(f"compactness_ratio {repr(ratio)}")
        else:
            results = run_suite(checks=checks, instances=args.instances,
                                seed=args.seed)
            print(format_results(results))
            if not all(r.passed for r in results):
                return 2
    except Exception as exc:
        print(f"jdda: run failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
