"""Command-line entry point: ``lampnet run|sweep|oracle|validate``."""

from __future__ import annotations

import argparse
import json
import sys

from lampnet.harness.oracle import OracleLimitError, load_instance, run_oracle
from lampnet.harness.runner import run
from lampnet.harness.scenario import ScenarioError, load_scenario
from lampnet.harness.sweep import load_grid, sweep

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _parser():
    p = argparse.ArgumentParser(prog="lampnet", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("--scenario", required=True)
    r.add_argument("--seed", type=int, default=None, help="overrides seeds.master")
    r.add_argument("--out", required=True)
    r.add_argument("--trace", action="store_true", help="also write events.tsv")

    s = sub.add_parser("sweep", help="cartesian sweep over configuration paths")
    s.add_argument("--scenario", required=True)
    s.add_argument("--grid", required=True)
    s.add_argument("--out", required=True)

    o = sub.add_parser("oracle", help="brute-force cross-checks on small instances")
    o.add_argument("kind", choices=["dispatch", "decode", "loss"])
    o.add_argument("--instance", required=True)

    v = sub.add_parser("validate", help="check a scenario and print its digest")
    v.add_argument("--scenario", required=True)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = load_scenario(args.scenario)
            print(f"ok {cfg.name} kind={cfg.kind} sha256={cfg.digest}")
        elif args.command == "run":
            cfg = load_scenario(args.scenario)
            report = run(cfg, args.seed, trace=args.trace)
            for path in report.write(args.out, trace=args.trace):
                print(path)
            for note in report.notes:
                print(f"note: {note}")
        elif args.command == "sweep":
            cfg = load_scenario(args.scenario)
            grid = load_grid(args.grid)
            results = sweep(cfg, grid, args.out)
            print(f"{len(results)} point(s) written to {args.out}")
        elif args.command == "oracle":
            data = load_instance(args.instance)
            if not isinstance(data, dict):
                raise ScenarioError("", "oracle instance must be a mapping")
            print(json.dumps(run_oracle(args.kind, data), indent=2, sort_keys=True, default=str))
    except (ScenarioError, OracleLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
