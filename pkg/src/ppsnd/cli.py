"""Command line entry point: ``ppsnd bench | summarize | simulate``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench
from .errors import ConfigurationError, PPSNDError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppsnd", description="PP-SND simulator and overhead benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="time per-role cryptographic work over N sessions")
    p.add_argument("--protocol", required=True, choices=["snd", "ppsnd"])
    p.add_argument("--bits", required=True, type=int, choices=[1024, 2048, 3072])
    p.add_argument("--trials", type=int, default=bench.DEFAULT_TRIALS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path, help="CSV file for raw records")

    p = sub.add_parser("summarize", help="mean and 95%% CI per protocol/role/key size")
    p.add_argument("--in", dest="inputs", required=True, type=Path, nargs="+", help="one or more bench CSVs")
    p.add_argument("--out", type=Path, help="summary CSV (default: <first input>.summary.csv)")

    p = sub.add_parser("simulate", help="run one YAML scenario")
    p.add_argument("--scenario", required=True, type=Path)
    p.add_argument("--trace", type=Path, help="write the JSON-lines event trace here")
    return parser


def _cmd_bench(args) -> int:
    config = bench.BenchConfig(args.protocol, args.bits, args.trials, args.seed)
    records = bench.run_bench(config)
    bench.write_records(args.out, records)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _cmd_summarize(args) -> int:
    records = []
    for path in args.inputs:
        if not path.is_file():
            raise ConfigurationError(f"no such file: {path}")
        records.extend(bench.read_records(path))
    rows = bench.summarize(records)
    out = args.out or args.inputs[0].with_suffix(".summary.csv")
    bench.write_summary(out, rows)
    print(bench.format_summary(rows))
    print(f"summary written to {out}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    from .scenario import load_scenario, run_scenario

    run = run_scenario(load_scenario(args.scenario))
    for line in run.summary_lines():
        print(line)
    if args.trace:
        args.trace.write_text(run.world.trace_jsonl(), encoding="utf-8")
        print(f"trace ({len(run.world.trace)} events) written to {args.trace}")
    return EXIT_OK


_COMMANDS = {"bench": _cmd_bench, "summarize": _cmd_summarize, "simulate": _cmd_simulate}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigurationError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PPSNDError, RuntimeError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
