"""Command-line interface for adaptgap."""

import argparse
import sys
from pathlib import Path

from .diffusion import DEFAULT_MAX_EDGES, spread_exact, spread_mc
from .gaps import SWEEPS, measure_gap, solve_instance, sweep_bound
from .graph import GeneratorSpec, ProbabilityRule, classify, dump_graph, generate, load_graph
from .models import (
    CSV_COLUMNS,
    ExperimentConfig,
    GapRun,
    InstanceReport,
    OptimumReport,
    PolicyNodeModel,
    SpreadReport,
    SuiteReport,
    SweepReport,
    check_rows,
    to_csv,
)
from .policies import DEFAULT_MAX_SUBSETS
from .suite import CLASS_FILTERS, SUITES, SuiteOptions, build_suite, run_suite
from .utils import AdaptGapError, get_default_workers, log_stderr, write_output

SELF_TEST_BOUNDS = (("budget", 0.5),)


def dashes_to_underscores(value: str) -> str:
    return value.strip().lower().replace("-", "_")


def make_config(args, **extra) -> ExperimentConfig:
    return ExperimentConfig(
        command=args.command,
        master_seed=args.seed,
        max_edges=args.max_edges,
        max_subsets=args.max_subsets,
        format=args.format or "json",
        workers=args.workers or get_default_workers(),
        **extra,
    )


def emit_reports(args, config: ExperimentConfig, reports: list[InstanceReport], payload) -> None:
    if config.format == "csv":
        rows = [row for report in reports for row in check_rows(report)]
        write_output(to_csv(rows, CSV_COLUMNS), args.out)
    else:
        write_output(payload.model_dump_json(indent=2), args.out)


def cmd_gen(args):
    if args.p_range is not None:
        rule = ProbabilityRule(None, *args.p_range)
    else:
        rule = ProbabilityRule(args.p)
    spec = GeneratorSpec(args.kind, tuple(args.params), rule)
    graph = generate(spec, args.seed)
    label = classify(graph).label
    log_stderr(f"Generated {spec.describe()}: n={graph.n}, m={graph.m}, class={label}")
    write_output(dump_graph(graph), args.out)


def cmd_spread(args):
    graph = load_graph(args.graph)
    config = make_config(args)
    if args.mc is not None:
        estimate = spread_mc(graph, args.seeds, args.mc, args.seed, workers=config.workers)
        report = SpreadReport(
            graph=str(args.graph),
            seeds=sorted(set(args.seeds)),
            method="mc",
            mean=estimate.mean,
            stderr=estimate.stderr,
            samples=estimate.samples,
            config=config,
        )
    else:
        report = SpreadReport(
            graph=str(args.graph),
            seeds=sorted(set(args.seeds)),
            method="exact",
            mean=spread_exact(graph, args.seeds, args.max_edges),
            config=config,
        )
    write_output(report.model_dump_json(indent=2), args.out)


def cmd_opt(args):
    graph = load_graph(args.graph)
    config = make_config(args)
    oracles = solve_instance(graph, args.k, args.max_edges, args.max_subsets)
    report = OptimumReport(
        graph=str(args.graph),
        n=graph.n,
        m=graph.m,
        k=args.k,
        opt_n=list(oracles.nonadaptive.values),
        optimal_sets=[sorted(s) for s in oracles.nonadaptive.sets],
        opt_a=oracles.tree.value,
        marginals=list(oracles.marginals.x),
        policy=PolicyNodeModel.from_node(oracles.tree.root),
        config=config,
    )
    write_output(report.model_dump_json(indent=2), args.out)


def cmd_gap(args):
    graph = load_graph(args.graph)
    config = make_config(args)
    report = measure_gap(
        graph,
        args.k,
        instance_id=args.graph.stem,
        source=str(args.graph),
        max_edges=args.max_edges,
        max_subsets=args.max_subsets,
    )
    emit_reports(args, config, [InstanceReport(gap=report)], GapRun(config=config, report=report))
    if not report.passed:
        sys.exit(1)


def cmd_verify(args):
    config = make_config(args, suite=args.suite, filter=args.filter, self_test=args.self_test)
    instances = build_suite(args.suite, args.seed, args.filter)
    if args.instances is not None:
        instances = instances[: args.instances]
    options = SuiteOptions(
        max_edges=args.max_edges,
        max_subsets=args.max_subsets,
        forced_bounds=SELF_TEST_BOUNDS if args.self_test else (),
    )
    reports = run_suite(instances, options, workers=config.workers, log=log_stderr)
    suite = SuiteReport(config=config, instances=reports)
    emit_reports(args, config, reports, suite)
    if not suite.passed:
        for failure in suite.failures:
            log_stderr(f"FAIL {failure}")
        sys.exit(1)


def cmd_sweep(args):
    config = make_config(args).model_copy(update={"format": args.format or "csv"})
    report = SweepReport(
        bound=dashes_to_underscores(args.bound),
        config=config,
        rows=sweep_bound(args.bound, args.k_min, args.k_max, range(0, args.alpha_max + 1)),
    )
    if config.format == "csv":
        write_output(to_csv(report.csv_rows()), args.out)
    else:
        write_output(report.model_dump_json(indent=2, exclude_none=True), args.out)


def common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Master seed (default: 0)")
    common.add_argument(
        "--workers", type=int, default=0, help="Number of parallel workers (default: auto)"
    )
    common.add_argument(
        "--max-edges",
        type=int,
        default=DEFAULT_MAX_EDGES,
        help=f"Edge cap for exact live-edge enumeration (default: {DEFAULT_MAX_EDGES})",
    )
    common.add_argument(
        "--max-subsets",
        type=int,
        default=DEFAULT_MAX_SUBSETS,
        help=f"Cap on seed subsets searched exhaustively (default: {DEFAULT_MAX_SUBSETS})",
    )
    common.add_argument("--out", type=Path, help="Output file (default: stdout)")
    common.add_argument("--format", choices=["json", "csv"], help="Output format")
    return common


def main(argv: list[str] | None = None):
    parser = argparse.ArgumentParser(
        description="Adaptivity gaps of influence maximization under the independent cascade model"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = common_parser()

    # gen subcommand
    p_gen = subparsers.add_parser("gen", parents=[common], help="Generate a graph file")
    p_gen.add_argument("kind", help="Generator (e.g. path, cycle, in-arb, star_subdivision)")
    p_gen.add_argument("params", type=int, nargs="*", help="Integer generator parameters")
    prob = p_gen.add_mutually_exclusive_group()
    prob.add_argument("--p", type=float, default=0.5, help="Constant edge probability")
    prob.add_argument(
        "--p-range", type=float, nargs=2, metavar=("LO", "HI"), help="Uniform edge probabilities"
    )
    p_gen.set_defaults(func=cmd_gen)

    # spread subcommand
    p_spread = subparsers.add_parser(
        "spread", parents=[common], help="Expected spread of a seed set"
    )
    p_spread.add_argument("graph", type=Path, help="Graph file")
    p_spread.add_argument("--seeds", type=int, nargs="*", default=[], help="Seed node ids")
    method = p_spread.add_mutually_exclusive_group()
    method.add_argument("--exact", action="store_true", help="Exact enumeration (default)")
    method.add_argument("--mc", type=int, metavar="N", help="Monte Carlo with N samples")
    p_spread.set_defaults(func=cmd_spread)

    # opt subcommand
    p_opt = subparsers.add_parser(
        "opt", parents=[common], help="Optimal non-adaptive sets and optimal adaptive policy"
    )
    p_opt.add_argument("graph", type=Path, help="Graph file")
    p_opt.add_argument("-k", type=int, required=True, help="Seed budget")
    p_opt.set_defaults(func=cmd_opt)

    # gap subcommand
    p_gap = subparsers.add_parser("gap", parents=[common], help="Measure the adaptivity gap")
    p_gap.add_argument("graph", type=Path, help="Graph file")
    p_gap.add_argument("-k", type=int, required=True, help="Seed budget")
    p_gap.set_defaults(func=cmd_gap)

    # verify subcommand
    p_verify = subparsers.add_parser(
        "verify", parents=[common], help="Check all bounds and inequalities on an instance suite"
    )
    p_verify.add_argument("--suite", choices=SUITES, default="default", help="Instance suite")
    p_verify.add_argument(
        "--filter", type=dashes_to_underscores, choices=CLASS_FILTERS, help="Only this class"
    )
    p_verify.add_argument(
        "--self-test", action="store_true", help="Force a wrong bound value; must exit 1"
    )
    p_verify.add_argument("--instances", type=int, help="Only the first N instances")
    p_verify.set_defaults(func=cmd_verify)

    # sweep subcommand
    p_sweep = subparsers.add_parser("sweep", parents=[common], help="Tabulate a closed-form bound")
    p_sweep.add_argument(
        "bound", type=dashes_to_underscores, choices=SWEEPS, help="Bound to tabulate"
    )
    p_sweep.add_argument("--k-min", type=int, default=2, help="Smallest k (default: 2)")
    p_sweep.add_argument("--k-max", type=int, default=100, help="Largest k (default: 100)")
    p_sweep.add_argument(
        "--alpha-max", type=int, default=100, help="Largest alpha of the alpha sweep (default: 100)"
    )
    p_sweep.set_defaults(func=cmd_sweep)

    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (AdaptGapError, ValueError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
