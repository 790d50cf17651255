"""Verification suites: instance construction and instance-parallel orchestration."""

import multiprocessing
from collections.abc import Callable
from dataclasses import dataclass

from .diffusion import DEFAULT_MAX_EDGES
from .gaps import measure_gap, solve_instance, verify_lemma_suite
from .graph import (
    GeneratorSpec,
    GraphClassReport,
    InfluenceGraph,
    ProbabilityRule,
    classify,
    generate,
)
from .models import InstanceReport
from .policies import DEFAULT_MAX_SUBSETS
from .utils import substream

SUITES = ("default", "quick")
CLASS_FILTERS = (
    "in_arborescence",
    "out_arborescence",
    "one_directional_bipartite",
    "alpha_bounded",
    "zero_bounded",
    "general",
)
RANDOM_PROBS = (0.3, 0.5, 1.0)
MAX_RANDOM_EDGES = 10

# Stream ids under the master seed
RANDOM_STREAM = 0
FAMILY_STREAM = 1


@dataclass(frozen=True)
class SuiteInstance:
    instance_id: str
    source: str
    graph: InfluenceGraph
    k: int


@dataclass(frozen=True)
class SuiteOptions:
    max_edges: int = DEFAULT_MAX_EDGES
    max_subsets: int = DEFAULT_MAX_SUBSETS
    forced_bounds: tuple[tuple[str, float], ...] = ()


def class_matches(report: GraphClassReport, name: str) -> bool:
    key = name.strip().lower().replace("-", "_")
    if key not in CLASS_FILTERS:
        raise ValueError(f"Unknown class {name!r} (choose from {', '.join(CLASS_FILTERS)})")
    if key == "general":
        return report.label == "general"
    if key == "alpha_bounded":
        return report.is_alpha_bounded
    return bool(getattr(report, f"is_{key}"))


def _family_plans(quick: bool) -> list[tuple[GeneratorSpec, int]]:
    """Structured instances: class families, shape examples and the directed-path witnesses."""
    half = ProbabilityRule(0.5)
    low = ProbabilityRule(0.3)
    uniform = ProbabilityRule(None, 0.2, 0.9)
    top = 5 if quick else 7

    specs: list[GeneratorSpec] = []
    for n in range(2, top + 1):
        specs += [GeneratorSpec("in_arborescence", (n,), p) for p in (low, half, uniform)]
    for n in range(2, top + 1):
        specs += [GeneratorSpec("path", (n,), p) for p in (low, half)]
    for n in range(3, top + 1):
        specs += [GeneratorSpec("cycle", (n,), p) for p in (low, half)]
    specs.append(GeneratorSpec("star_subdivision", (3, 1), half))
    if not quick:
        specs += [
            GeneratorSpec("star_subdivision", (3, 2), half),
            GeneratorSpec("parallel_links", (3, 1), half),
            GeneratorSpec("parallel_links", (2, 2), uniform),
            GeneratorSpec("clique", (4,), low),
            GeneratorSpec("chorded_cycle", (6, 1), half),
            GeneratorSpec("one_directional_bipartite", (2, 3), half),
            GeneratorSpec("out_arborescence", (5,), half),
        ]
    for n in range(4, (4 if quick else 6) + 1):
        specs.append(GeneratorSpec("directed_path", (n,), half))

    # Budgets larger than the generated graph are dropped in build_suite.
    return [(spec, k) for spec in specs for k in (2, 3)]


def build_suite(
    kind: str = "default", master_seed: int = 0, class_filter: str | None = None
) -> list[SuiteInstance]:
    """Deterministic instance list; every instance draws from its own substream."""
    if kind not in SUITES:
        raise ValueError(f"Unknown suite {kind!r} (choose from {', '.join(SUITES)})")
    quick = kind == "quick"

    planned: list[tuple[GeneratorSpec, int, int]] = []
    for i in range(24 if quick else 200):
        n = 3 + i % 4
        rng = substream(master_seed, RANDOM_STREAM, i)
        m = int(rng.integers(1, min(MAX_RANDOM_EDGES, n * (n - 1)) + 1))
        spec = GeneratorSpec("random_digraph", (n, m), ProbabilityRule(RANDOM_PROBS[(i // 4) % 3]))
        planned.append((spec, 2 + (i // 12) % 2, int(rng.integers(0, 2**63))))
    for j, (spec, k) in enumerate(_family_plans(quick)):
        seed = int(substream(master_seed, FAMILY_STREAM, j).integers(0, 2**63))
        planned.append((spec, k, seed))

    instances = []
    for idx, (spec, k, seed) in enumerate(planned):
        graph = generate(spec, seed)
        if k > graph.n:
            continue
        if class_filter is not None and not class_matches(classify(graph), class_filter):
            continue
        instances.append(
            SuiteInstance(
                instance_id=f"{idx:04d}-{spec.kind}",
                source=f"{spec.describe()} seed={seed}",
                graph=graph,
                k=k,
            )
        )
    return instances


def run_instance(item: tuple[SuiteInstance, SuiteOptions]) -> InstanceReport:
    """Worker entry point (top-level so the spawn pool can pickle it)."""
    instance, options = item
    oracles = solve_instance(instance.graph, instance.k, options.max_edges, options.max_subsets)
    gap = measure_gap(
        instance.graph,
        instance.k,
        instance_id=instance.instance_id,
        source=instance.source,
        forced_bounds=dict(options.forced_bounds),
        oracles=oracles,
    )
    lemmas = verify_lemma_suite(
        instance.graph,
        instance.k,
        oracles=oracles,
        max_edges=options.max_edges,
        max_subsets=options.max_subsets,
    )
    return InstanceReport(gap=gap, lemmas=lemmas)


def run_suite(
    instances: list[SuiteInstance],
    options: SuiteOptions | None = None,
    workers: int = 1,
    log: Callable[[str], None] = print,
) -> list[InstanceReport]:
    """Run every instance; reports come back in instance order for any worker count."""
    options = options or SuiteOptions()
    items = [(inst, options) for inst in instances]
    log(f"Verifying {len(items)} instances (workers={workers})...")

    reports = []

    def collect(report: InstanceReport) -> None:
        reports.append(report)
        status = "ok" if report.passed else "FAIL"
        log(
            f"  [{len(reports)}/{len(items)}] {report.gap.instance_id} "
            f"ratio={report.gap.ratio:.4f} {status}"
        )

    if workers <= 1 or len(items) <= 1:
        for item in items:
            collect(run_instance(item))
    else:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(processes=workers) as pool:
            for report in pool.imap(run_instance, items):
                collect(report)

    failed = sum(not r.passed for r in reports)
    log(f"Done: {len(reports) - failed} passed, {failed} failed")
    return reports
