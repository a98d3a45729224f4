"""Command line entry points: run, replay, report."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .campaign import replay, run_campaign
from .config import load_config, normalize_solver_mode
from .errors import SymtrailError
from .report import format_summary, generate_report


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symtrail",
        description="Concolic testing of structured parsers with "
        "coverage-tree-guided constraint selection and LLM-driven solving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a campaign from a config file")
    run_p.add_argument("--config", required=True, help="INI campaign config")
    run_p.add_argument(
        "--solver", choices=["baseline", "llm", "llm-validated"], help="override solver mode"
    )
    run_p.add_argument("--select", choices=["ect", "all"], help="constraint selection mode")
    run_p.add_argument(
        "--mock",
        choices=["syntax", "adversarial", "echo", "off"],
        help="model transport: deterministic mock or the real endpoint",
    )
    run_p.add_argument("--alpha", type=float, help="weight of the untaken-direction term")
    run_p.add_argument("--beta", type=float, help="weight of the visit-count term")
    run_p.add_argument("--gamma", type=float, help="weight of the depth term")
    run_p.add_argument("--top-k", type=int, help="constraints dispatched per iteration")
    run_p.add_argument("--iterations", type=int, help="iteration budget (0 = unlimited)")
    run_p.add_argument("--timeout", type=float, help="wall clock budget in seconds")
    run_p.add_argument("--prng-seed", type=int, help="PRNG seed for reproducible runs")

    replay_p = sub.add_parser("replay", help="run one input file against a target")
    replay_p.add_argument("--target", required=True)
    replay_p.add_argument("--input", required=True)

    report_p = sub.add_parser("report", help="summarize a campaign output directory")
    report_p.add_argument("--dir", required=True)
    report_p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.solver:
        cfg.solver_mode = normalize_solver_mode(args.solver)
    if args.select:
        cfg.select_mode = args.select
    if args.mock:
        cfg.mock = args.mock
    if args.iterations is not None:
        cfg.iterations = args.iterations
    if args.timeout is not None:
        cfg.timeout = args.timeout
    if args.prng_seed is not None:
        cfg.prng_seed = args.prng_seed
    overrides = {}
    for name in ("alpha", "beta", "gamma"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.top_k is not None:
        overrides["top_k"] = args.top_k
    if overrides:
        cfg.selector = replace(cfg.selector, **overrides)
    metrics = run_campaign(cfg)
    print(json.dumps(metrics.to_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_replay(args) -> int:
    with open(args.input, "rb") as fh:
        data = fh.read()
    result = replay(args.target, data)
    print(json.dumps(result, indent=2))
    return 0 if result["outcome"] != "crash" else 1


def _cmd_report(args) -> int:
    summary = generate_report(args.dir, figures=not args.no_figures)
    print(format_summary(summary))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "replay":
            return _cmd_replay(args)
        return _cmd_report(args)
    except SymtrailError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
