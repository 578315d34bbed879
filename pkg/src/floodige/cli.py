"""Command line entry point: ``floodige run | list-scenarios | validate``.

Exit status is 0 on success, 1 when a simulation fails at runtime and 2 for
usage or configuration errors.  The output directory defaults to
``$FLOODIGE_OUT`` and then ``./results/<scenario-name>``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .harness import ScenarioError, bundled_scenarios, load_scenario, run_scenario

OUT_ENV = "FLOODIGE_OUT"


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floodige", description="Interference-graph estimation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write its CSV files")
    run.add_argument("--scenario", required=True, help="scenario JSON path or bundled scenario name")
    run.add_argument("--seed", type=_u64, help="override the scenario seed")
    run.add_argument("--trials", type=_positive, help="override the trial count")
    run.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or results/<name>)")

    sub.add_parser("list-scenarios", help="list bundled scenarios")

    val = sub.add_parser("validate", help="check a scenario file without running it")
    val.add_argument("--scenario", required=True)
    return parser


def _cmd_run(args) -> int:
    spec = load_scenario(args.scenario).with_overrides(seed=args.seed, trials=args.trials)
    spec.validate()
    out = Path(args.out or os.environ.get(OUT_ENV) or Path("results") / spec.name)
    try:
        result = run_scenario(spec)
    except ScenarioError:
        raise
    except Exception as exc:  # noqa: BLE001 - report any simulation failure as exit 1
        print(f"error: {spec.name} failed: {exc}", file=sys.stderr)
        return 1
    paths = result.write(out)
    for note in result.warnings:
        print(f"warning: {note}", file=sys.stderr)
    print(result.summary_table())
    print(f"wrote {len(paths)} files to {out}")
    return 0


def _cmd_list() -> int:
    for name, path in bundled_scenarios().items():
        spec = load_scenario(path)
        print(f"{name[:-5]:<24} {spec.kind:<24} trials={spec.trials} seed={spec.seed}")
    return 0


def _cmd_validate(args) -> int:
    spec = load_scenario(args.scenario)
    spec.validate()
    print(f"ok: {spec.name} ({spec.kind})")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "list-scenarios":
            return _cmd_list()
        return _cmd_validate(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
