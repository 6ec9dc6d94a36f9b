"""Command line entry points: run a configured experiment, re-verify a
persisted run, or export its tables.

Exit codes: 0 success, 1 invariant failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .experiment import ConfigError, check_run, export_run, load_config, run_experiment


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="arealaw",
        description="entanglement area-law diagnostics on gapped spin chains",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the experiment described by a config file")
    p_run.add_argument("config", help="path to the key=value config file")
    p_run.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config entry (repeatable)",
    )
    p_run.add_argument("--output-dir", default=None, help="redirect the run directory")

    p_check = sub.add_parser("check", help="re-verify invariants of a persisted run")
    p_check.add_argument("run_dir")

    p_export = sub.add_parser("export", help="concatenate the run tables to one stream")
    p_export.add_argument("run_dir")
    p_export.add_argument("--format", default="csv")
    p_export.add_argument("--output", default=None)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            overrides = []
            for item in args.override:
                if "=" not in item:
                    raise ConfigError(f"override {item!r} is not KEY=VALUE")
                key, _, val = item.partition("=")
                overrides.append((key.strip(), val.strip()))
            cfg = load_config(args.config, overrides)
            data, out = run_experiment(cfg, args.output_dir)
            print(f"run complete: {out}")
            problems = check_run(out)
            if problems:
                for p in problems:
                    print(f"invariant failure: {p}", file=sys.stderr)
                return 1
            return 0
        if args.command == "check":
            problems = check_run(args.run_dir)
            if problems:
                for p in problems:
                    print(f"invariant failure: {p}", file=sys.stderr)
                return 1
            print("all persisted invariants hold")
            return 0
        if args.command == "export":
            text = export_run(args.run_dir, args.format, args.output)
            if not args.output:
                sys.stdout.write(text)
            return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
