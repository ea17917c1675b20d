"""Command-line front end: gen, solve, bench, stats.

`solve` writes the deterministic plan document to --out and prints the
metrics block (which includes wall time) to stdout, so identical seeds
produce byte-identical plan files.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    ExperimentConfig,
    read_raw_csv,
    report_from_records,
    run_experiment,
    write_raw_csv,
    write_report_csv,
    write_report_json,
)
from .colony import AcoParams
from .domain import dump_json, load_json, problem_from_json, problem_to_json
from .exceptions import AntplanError
from .moacs import StoppingCriterion, acs_baseline, moacs_consolidate
from .workload import ScenarioSpec, generate_scenario, scenario_metadata

PARAM_FLAGS = {
    "alpha": "alpha", "beta": "beta", "rho": "rho", "q0": "q0",
    "ants": "num_ants", "generations": "num_generations",
}
STOP_FLAGS = {"max_rounds": "max_rounds",
              "no_improvement_rounds": "no_improvement_rounds"}


def _parse_range(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}")
    lo, hi = float(parts[0]), float(parts[1])
    if not 0 <= lo <= hi:
        raise argparse.ArgumentTypeError(f"need 0 <= a <= b, got {text!r}")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="antplan",
        description="Ant-colony VM consolidation: workloads, solving, benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a scenario problem as JSON")
    gen.add_argument("--scenario", type=int, required=True, choices=[1, 2, 3, 4])
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument("--cpu-range", type=_parse_range, default=None,
                     metavar="A,B", help="override CPU demand range")
    gen.add_argument("--mem-range", type=_parse_range, default=None,
                     metavar="A,B", help="override memory demand range")
    gen.add_argument("--vms", type=int, default=None, help="override VM count")
    gen.add_argument("--pms", type=int, default=None, help="override PM count")
    gen.add_argument("--neighborhood", type=int, default=None,
                     help="override neighborhood size")

    solve = sub.add_parser("solve", help="solve a problem JSON")
    solve.add_argument("--problem", type=Path, required=True)
    solve.add_argument("--algo", choices=["moacs", "acs"], default="moacs")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--out", type=Path, default=None,
                       help="write the plan JSON here")
    solve.add_argument("--metrics-out", type=Path, default=None,
                       help="also write the metrics block to a file")
    solve.add_argument("--config", type=Path, default=None,
                       help="JSON file with params/stopping blocks")
    solve.add_argument("--alpha", type=float, default=None)
    solve.add_argument("--beta", type=float, default=None)
    solve.add_argument("--rho", type=float, default=None)
    solve.add_argument("--q0", type=float, default=None)
    solve.add_argument("--ants", type=int, default=None)
    solve.add_argument("--generations", type=int, default=None)
    solve.add_argument("--max-rounds", type=int, default=None)
    solve.add_argument("--no-improvement-rounds", type=int, default=None)
    solve.add_argument("--parallel", action="store_true",
                       help="run the two colonies in parallel threads")

    bench = sub.add_parser("bench", help="run a factorial experiment")
    bench.add_argument("--config", type=Path, required=True)
    bench.add_argument("--out-dir", type=Path, required=True)

    stats = sub.add_parser("stats", help="recompute aggregates from raw.csv")
    stats.add_argument("--raw", type=Path, required=True)
    stats.add_argument("--out", type=Path, default=None)
    return parser


def _merge_params(args) -> AcoParams:
    doc = {}
    if args.config is not None:
        file_doc = load_json(args.config)
        doc.update(file_doc.get("params", file_doc))
    for flag, field_name in PARAM_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            doc[field_name] = value
    return AcoParams.from_mapping(doc)


def _merge_stopping(args) -> StoppingCriterion:
    doc = {}
    if args.config is not None:
        file_doc = load_json(args.config)
        doc.update(file_doc.get("stopping", {}))
    for flag, field_name in STOP_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            doc[field_name] = value
    return StoppingCriterion.from_mapping(doc)


def _cmd_gen(args) -> int:
    spec = ScenarioSpec.table_defaults(args.scenario)
    overrides = {}
    if args.vms is not None:
        overrides["num_vms"] = args.vms
    if args.pms is not None:
        overrides["num_pms"] = args.pms
    if args.neighborhood is not None:
        overrides["neighborhood_size"] = args.neighborhood
    if overrides:
        spec = ScenarioSpec.from_mapping({**spec.to_mapping(), **overrides})
    problem = generate_scenario(spec, args.seed, args.cpu_range, args.mem_range)
    meta = scenario_metadata(spec, args.seed, args.cpu_range, args.mem_range)
    dump_json(problem_to_json(problem, metadata=meta), args.out)
    print(f"wrote {args.out} ({spec.num_pms} PMs, {spec.num_vms} VMs)")
    return 0


def _cmd_solve(args) -> int:
    problem = problem_from_json(load_json(args.problem))
    params = _merge_params(args)
    stopping = _merge_stopping(args)
    solver = moacs_consolidate if args.algo == "moacs" else acs_baseline
    result = solver(problem, params, stopping, args.seed, parallel=args.parallel)
    if args.out is not None:
        dump_json(result.plan_json(), args.out)
    metrics = result.metrics()
    if args.metrics_out is not None:
        dump_json(metrics, args.metrics_out)
    print(json.dumps(metrics, sort_keys=True))
    return 0


def _cmd_bench(args) -> int:
    config = ExperimentConfig.from_mapping(load_json(args.config))
    report = run_experiment(config)
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    write_raw_csv(report.raw, out_dir / "raw.csv")
    write_report_json(report, out_dir / "report.json")
    write_report_csv(report, out_dir / "report.csv")
    failed = sum(1 for r in report.raw if r.status != "ok")
    print(f"{len(report.raw)} runs, {failed} failed; reports in {out_dir}")
    return 1 if failed else 0


def _cmd_stats(args) -> int:
    raw = read_raw_csv(args.raw)
    report = report_from_records(raw)
    doc = report.to_mapping()
    if args.out is not None:
        dump_json(doc, args.out)
    print(json.dumps(doc, sort_keys=True))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"gen": _cmd_gen, "solve": _cmd_solve,
                "bench": _cmd_bench, "stats": _cmd_stats}
    try:
        return handlers[args.command](args)
    except (AntplanError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
