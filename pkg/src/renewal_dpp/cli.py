"""Command line: ``run``, ``sweep`` and ``verify``."""

from __future__ import annotations

import argparse
import json
import sys

from .config import ALGORITHMS, RunConfig
from .errors import ConfigurationError, RenewalError
from .experiments import SWEEP_AXES, SWEEP_COLUMNS, execute, sweep, write_outputs
from .verify import SCALES, verify


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _add_run_flags(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--frames", type=int)
    p.add_argument("--v", type=float)
    p.add_argument("--w", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--output", help="output directory")
    p.add_argument("--verbosity", type=int, help="1 writes the per-frame CSV")
    p.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                   help="override any config field, e.g. scenario.i_max=11")


def _config_from(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {k: getattr(args, k) for k in
                 ("frames", "v", "w", "seed", "algorithm", "output", "verbosity")}
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects PATH=VALUE, got {item!r}")
        path, value = item.split("=", 1)
        overrides[path] = _parse_value(value)
    return cfg.with_overrides(**overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="renewal-dpp",
                                     description="Renewal-frame drift-plus-penalty simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one configuration")
    _add_run_flags(run_p)

    sweep_p = sub.add_parser("sweep", help="run one configuration per axis value")
    _add_run_flags(sweep_p)
    sweep_p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    sweep_p.add_argument("--values", nargs="*", default=[])
    sweep_p.add_argument("--workers", type=int)

    ver_p = sub.add_parser("verify", help="run the invariant suite")
    ver_p.add_argument("--scale", choices=sorted(SCALES), default="quick")
    ver_p.add_argument("--seed", type=int, default=0)
    ver_p.add_argument("--only", nargs="*", help="names of checks to run")
    return parser


def cmd_run(args) -> int:
    cfg = _config_from(args)
    result = execute(cfg)
    folder = cfg.output_dir()
    if folder:
        write_outputs(result, folder)
    s = result.summary
    print(json.dumps({k: s[k] for k in ("utility", "T_bar", "idle_bar", "y0_bar",
                                        "constraint_ratios")}, indent=2))
    for v in result.violations:
        print(f"invariant violated: {v}", file=sys.stderr)
    return 0 if result.ok else 1


def cmd_sweep(args, parser) -> int:
    if not args.values:
        parser.error("sweep needs at least one value after --values")
    cfg = _config_from(args)
    rows = sweep(cfg, args.axis, args.values, workers=args.workers, folder=cfg.output_dir())
    print(",".join(SWEEP_COLUMNS))
    for row in rows:
        print(",".join(str(x) for x in row))
    return 0 if all(row[-1] for row in rows) else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args, parser)
        return 0 if verify(args.scale, args.seed, args.only) else 1
    except RenewalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
