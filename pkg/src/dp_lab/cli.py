"""Command line entry point: ``dp-lab identity-suite | simulate | sweep``."""

from __future__ import annotations

import argparse
import sys

from .experiment import (EXIT_CONFIG_INVALID, ConfigError, load_config, parse_override,
                         run_identity_suite, run_stability_experiment, sweep)


def _overrides(args) -> dict:
    out = dict(parse_override(item) for item in args.set or [])
    for key in ("epsilon", "t_end", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dp-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat TOML file; missing keys take defaults")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--epsilon", type=float)
        p.add_argument("--t-end", dest="t_end", type=float)
        p.add_argument("--seed", type=int)

    p = sub.add_parser("identity-suite", help="run the static identity checks")
    common(p)
    p.add_argument("--report", default="identity_report.txt")

    p = sub.add_parser("simulate", help="evolve, track and write diagnostics CSV")
    common(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="one simulation per parameter value")
    common(p)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma separated")
    p.add_argument("--out-dir", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, _overrides(args))
        if args.command == "sweep":
            values = [parse_override(f"v={v}")[1] for v in args.values.split(",")]
    except (ConfigError, OSError) as exc:
        print(f"dp-lab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG_INVALID

    if args.command == "identity-suite":
        status, checks = run_identity_suite(config, args.report)
        failed = [c.name for c in checks if not c.passed]
        print(f"{len(checks) - len(failed)}/{len(checks)} checks passed; report in {args.report}")
        for name in failed:
            print(f"FAIL {name}", file=sys.stderr)
        return status
    if args.command == "simulate":
        result = run_stability_experiment(config, args.out)
        print(f"{len(result.records)} samples written to {result.csv_path}; "
              f"sup distance {result.sup_distance:.6e}")
        if result.message:
            print(result.message, file=sys.stderr)
        return result.status
    try:
        status, path = sweep(config, args.param, values, args.out_dir)
    except ConfigError as exc:
        print(f"dp-lab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG_INVALID
    print(f"sweep summary in {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
