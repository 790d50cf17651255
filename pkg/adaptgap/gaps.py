"""Adaptivity-gap bounds, gap measurement and exhaustive inequality checks.

All checks run over the exact oracles: every live-edge graph, every realized partial
realization, every applicable node subset. Slack is always (larger side - smaller
side) / n, so a check passes iff its slack is >= -EPS.
"""

import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from itertools import combinations, pairwise

import numpy as np

from .diffusion import DEFAULT_MAX_EDGES, live_edge_table
from .graph import GraphClassReport, InfluenceGraph, boundary, classify, component_count
from .models import BoundCheck, GapReport, LemmaCheck, SweepRow
from .policies import (
    DEFAULT_MAX_SUBSETS,
    MarginalVector,
    NonAdaptiveOptimum,
    PolicyTree,
    TreePolicy,
    greedy_adaptive,
    greedy_nonadaptive,
    hybrid_value,
    marginals,
    marginals_from_runs,
    opt_adaptive,
    opt_nonadaptive,
    policy_value_exact,
)
from .realization import delta_vector, iter_partial_realizations
from .utils import EPS, CapExceededError, PolicyError, from_bits

ARBORESCENCE_LIMIT = 2 * math.e**2 / (math.e**2 - 1)
ZERO_BOUNDED_LIMIT = 3 * math.e**3 / (math.e**3 - 1)
PRIOR_WORK_BOUND = 2 * math.e / (math.e - 1)
GREEDY_FACTOR = 1 - 1 / math.e
ADAPTIVITY_FLOOR = "ratio_at_least_one"

# Size limits of the exhaustive checks that enumerate node subsets or partial realizations.
SUBMODULARITY_MAX_NODES = 5
SUBMODULARITY_MAX_EDGES = 8
BOUNDARY_MAX_NODES = 10


# Closed-form bounds


def _power(c: float, k: int) -> float:
    """max(0, 1 - c/k)^k without losing precision for large k."""
    if c >= k:
        return 0.0
    return math.exp(k * math.log1p(-c / k))


def _require_k(k: int, least: int = 2) -> None:
    if k < least:
        raise ValueError(f"k must be >= {least}, got {k}")


def bound_in_arborescence(k: int) -> float:
    _require_k(k)
    return 2.0 / (1.0 - _power(2, k))


def bound_budget(k: int) -> float:
    _require_k(k, 1)
    return float(k)


def bound_cube_root(n: int) -> float:
    """ceil(n^(1/3)) by integer search, exact on perfect cubes."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    r = 1
    while r**3 < n:
        r += 1
    return float(r)


def bound_alpha(alpha: int, k: int) -> float:
    _require_k(k)
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return min(float(k), alpha / k + 2.0 + 1.0 / (1.0 - _power(1, k)))


def bound_alpha_closed_form(alpha: float) -> float:
    """The k-free bound: the k at which k = alpha/k + 2 + e/(e-1)."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    e = math.e
    return (math.sqrt(4 * (e - 1) ** 2 * alpha + (3 * e - 2) ** 2) + 3 * e - 2) / (2 * (e - 1))


def bound_zero_bounded(k: int) -> float:
    _require_k(k)
    return min(float(k), 3.0 / (1.0 - _power(3, k)))


@dataclass(frozen=True)
class BoundValue:
    name: str
    value: float
    applicable: bool
    inputs: dict = field(default_factory=dict)


def applicable_bounds(classes: GraphClassReport, n: int, k: int) -> list[BoundValue]:
    """Every bound for (n, k), flagged applicable by the graph's recognized classes."""
    bounds = [
        BoundValue("budget", bound_budget(k), True, {"k": k}),
        BoundValue("cube_root", bound_cube_root(n), True, {"n": n}),
    ]
    if k < 2:
        return bounds
    alpha = classes.min_alpha
    bounds += [
        BoundValue(
            "in_arborescence", bound_in_arborescence(k), classes.is_in_arborescence, {"k": k}
        ),
        BoundValue(
            "alpha",
            bound_alpha(alpha, k) if alpha is not None else math.nan,
            alpha is not None,
            {"alpha": alpha, "k": k},
        ),
        BoundValue("zero_bounded", bound_zero_bounded(k), classes.is_zero_bounded, {"k": k}),
    ]
    return bounds


# Oracles


@dataclass(frozen=True)
class OracleBundle:
    """Exact oracle results for one (graph, k), shared by gap and inequality checks."""

    graph: InfluenceGraph
    k: int
    classes: GraphClassReport
    nonadaptive: NonAdaptiveOptimum
    tree: PolicyTree
    marginals: MarginalVector


def solve_instance(
    graph: InfluenceGraph,
    k: int,
    max_edges: int = DEFAULT_MAX_EDGES,
    max_subsets: int = DEFAULT_MAX_SUBSETS,
) -> OracleBundle:
    if k < 1:
        raise PolicyError(f"Gap measurement needs k >= 1, got {k}")
    nonadaptive = opt_nonadaptive(graph, k, max_edges, max_subsets)
    tree = opt_adaptive(graph, k, max_edges)
    return OracleBundle(graph, k, classify(graph), nonadaptive, tree, marginals(graph, tree))


def measure_gap(
    graph: InfluenceGraph,
    k: int,
    instance_id: str = "instance",
    source: str = "",
    forced_bounds: dict[str, float] | None = None,
    oracles: OracleBundle | None = None,
    max_edges: int = DEFAULT_MAX_EDGES,
    max_subsets: int = DEFAULT_MAX_SUBSETS,
) -> GapReport:
    """OPT_A / OPT_N checked against every bound that applies to the graph.

    forced_bounds replaces bound values by name (harness self-test).
    """
    oracles = oracles or solve_instance(graph, k, max_edges, max_subsets)
    forced = forced_bounds or {}
    opt_a = oracles.tree.value
    opt_n = oracles.nonadaptive.value
    ratio = opt_a / opt_n

    checks = []
    for bound in applicable_bounds(oracles.classes, graph.n, k):
        if not bound.applicable:
            continue
        value = forced.get(bound.name, bound.value)
        checks.append(
            BoundCheck(
                name=bound.name, bound=value, passed=ratio <= value + EPS, slack=value - ratio
            )
        )
    # Adaptivity never hurts: OPT_A >= OPT_N.
    checks.append(
        BoundCheck(
            name=ADAPTIVITY_FLOOR,
            bound=1.0,
            lower=True,
            passed=ratio >= 1.0 - EPS,
            slack=ratio - 1.0,
        )
    )
    return GapReport(
        instance_id=instance_id,
        source=source,
        graph_class=oracles.classes.label,
        n=graph.n,
        m=graph.m,
        k=k,
        opt_a=opt_a,
        opt_n=opt_n,
        ratio=ratio,
        optimal_seeds=sorted(oracles.nonadaptive.seeds),
        checks=checks,
    )


# Inequality checks


@dataclass
class _Tally:
    name: str
    scale: float
    count: int = 0
    worst: float | None = None

    def add(self, larger: float, smaller: float) -> None:
        slack = (larger - smaller) / self.scale
        self.count += 1
        self.worst = slack if self.worst is None else min(self.worst, slack)

    def add_many(self, larger: np.ndarray, smaller: np.ndarray) -> None:
        if len(larger) == 0:
            return
        slack = float(np.min(larger - smaller)) / self.scale
        self.count += len(larger)
        self.worst = slack if self.worst is None else min(self.worst, slack)

    def result(self) -> LemmaCheck:
        return LemmaCheck(lemma=self.name, instances=self.count, worst_slack=self.worst)


def _check_subset_budget(count: int, max_subsets: int, what: str) -> None:
    if count > max_subsets:
        raise CapExceededError(
            f"{what} needs {count} node subsets, cap is {max_subsets} (raise --max-subsets)"
        )


def _realized_feedback_checks(oracles: OracleBundle, max_edges: int) -> list[_Tally]:
    """Inequalities over every psi realized by seeding the optimal (t-1)-set, t = 1..k."""
    graph, k, classes = oracles.graph, oracles.k, oracles.classes
    table = live_edge_table(graph, max_edges)
    opt_n = oracles.nonadaptive.values
    opt_a = oracles.tree.value
    x = np.asarray(oracles.marginals.x)
    alpha = classes.min_alpha

    hybrid = _Tally("hybrid_policy_bound", graph.n)
    arb_residual = _Tally("arborescence_residual_spread", graph.n)
    alpha_residual = _Tally("alpha_residual_spread", graph.n)
    zero_residual = _Tally("zero_bounded_residual_spread", graph.n)

    for t in range(1, k + 1):
        for group in iter_partial_realizations(table, sorted(oracles.nonadaptive.sets[t - 1])):
            psi = group.psi
            residual = table.spread(psi.reached)
            gains = delta_vector(table, group.rows, psi.reached_bits)
            # k * E_rho[gain] with P[rho = i] = x_i / k
            hybrid.add(residual + float(x @ gains), opt_a)
            if classes.is_in_arborescence:
                arb_residual.add(psi.value + opt_n[t - 1], residual)
            if alpha is not None:
                alpha_residual.add(psi.value + (alpha / k + 2) * opt_n[k], residual)
            if classes.is_zero_bounded:
                zero_residual.add(psi.value + 2 * opt_n[t - 1], residual)

    tallies = [hybrid]
    if classes.is_in_arborescence:
        tallies.append(arb_residual)
    if alpha is not None:
        tallies.append(alpha_residual)
    if classes.is_zero_bounded:
        tallies.append(zero_residual)
    return tallies


def _arborescence_boundary_check(
    oracles: OracleBundle, max_edges: int, max_subsets: int
) -> _Tally:
    """|boundary(R(psi))| <= t-1 for every realized psi on every (t-1)-seed domain."""
    graph, k = oracles.graph, oracles.k
    table = live_edge_table(graph, max_edges)
    tally = _Tally("arborescence_boundary_size", graph.n)
    sizes = range(min(k, graph.n + 1))
    _check_subset_budget(sum(math.comb(graph.n, h) for h in sizes), max_subsets, tally.name)
    for size in sizes:
        for domain in combinations(graph.nodes, size):
            for group in iter_partial_realizations(table, domain):
                tally.add(size, len(boundary(graph, group.psi.reached)))
    return tally


def _recursion_checks(oracles: OracleBundle, max_edges: int) -> list[_Tally]:
    """Per-step recursions on OPT_N(t) that chain into the class bounds, plus the hybrid value."""
    graph, k, classes = oracles.graph, oracles.k, oracles.classes
    opt_n = oracles.nonadaptive.values
    opt_a = oracles.tree.value
    alpha = classes.min_alpha

    hybrid = _Tally("hybrid_nonadaptive_value", graph.n)
    arb = _Tally("arborescence_recursion", graph.n)
    zero = _Tally("zero_bounded_recursion", graph.n)
    alpha_rec = _Tally("alpha_recursion", graph.n)
    for t in range(1, k + 1):
        value = hybrid_value(graph, k, t, oracles.marginals, oracles.nonadaptive, max_edges)
        hybrid.add(opt_n[t], value)
        arb.add(opt_n[t], opt_a / k + (1 - 2 / k) * opt_n[t - 1])
        zero.add(opt_n[t], opt_a / k + (1 - 3 / k) * opt_n[t - 1])
        if alpha is not None:
            alpha_rec.add(
                opt_n[t], (opt_a - (alpha / k + 2) * opt_n[k]) / k + (1 - 1 / k) * opt_n[t - 1]
            )

    tallies = [hybrid]
    if classes.is_in_arborescence:
        tallies.append(arb)
    if classes.is_zero_bounded:
        tallies.append(zero)
    if alpha is not None:
        tallies.append(alpha_rec)
    return tallies


def _subset_checks(oracles: OracleBundle, max_edges: int, max_subsets: int) -> list[_Tally]:
    graph, k = oracles.graph, oracles.k
    table = live_edge_table(graph, max_edges)
    opt_k = oracles.nonadaptive.value

    ratio = _Tally("subset_spread_ratio", graph.n)
    sizes = range(k, graph.n + 1)
    _check_subset_budget(sum(math.comb(graph.n, h) for h in sizes), max_subsets, ratio.name)
    for h in sizes:
        for subset in combinations(graph.nodes, h):
            ratio.add(h / k * opt_k, table.spread(subset))
    tallies = [ratio]

    alpha = oracles.classes.min_alpha
    if alpha is not None and graph.n <= BOUNDARY_MAX_NODES:
        size = _Tally("boundary_size", graph.n)
        for bits in range(1, 1 << graph.n):
            subset = from_bits(bits)
            if component_count(graph, subset) <= k:
                size.add(alpha + 2 * k, len(boundary(graph, subset)))
        tallies.append(size)
    return tallies


def _policy_checks(oracles: OracleBundle, max_edges: int) -> list[_Tally]:
    graph, k, tree = oracles.graph, oracles.k, oracles.tree
    opt_1 = oracles.nonadaptive.values[1]

    step = _Tally("adaptive_step_bound", graph.n)
    for psi, prob, node in tree.walk():
        if node.is_leaf or prob <= 0:
            continue
        expected = sum(b.prob * len(psi.reached | b.observed) for b in node.branches)
        step.add(opt_1, expected - psi.value)

    increments = _Tally("greedy_increments", graph.n)
    for a, b in pairwise(greedy_nonadaptive(graph, max_edges=max_edges).increments):
        increments.add(a, b)

    greedy = _Tally("greedy_adaptive_ratio", graph.n)
    value = policy_value_exact(graph, greedy_adaptive(graph, k, max_edges=max_edges), max_edges)
    greedy.add(value, GREEDY_FACTOR * tree.value)

    consistency = _Tally("marginal_consistency", graph.n)
    runs = marginals_from_runs(graph, TreePolicy(tree), max_edges)
    diff = np.abs(np.asarray(runs.x) - np.asarray(oracles.marginals.x))
    consistency.add(0.0, float(diff.max()))
    consistency.add(0.0, abs(policy_value_exact(graph, TreePolicy(tree), max_edges) - tree.value))
    return [step, increments, greedy, consistency]


def _submodularity_check(graph: InfluenceGraph, max_edges: int) -> _Tally:
    """Delta(i|psi') <= Delta(i|psi) for every realized psi' and every psi below it."""
    table = live_edge_table(graph, max_edges)
    gains: dict[tuple, np.ndarray] = {}
    realized = []
    for size in range(graph.n + 1):
        for domain in combinations(graph.nodes, size):
            for group in iter_partial_realizations(table, domain):
                psi = group.psi
                gains[psi.canonical()] = delta_vector(table, group.rows, psi.reached_bits)
                realized.append(psi)

    tally = _Tally("adaptive_submodularity", graph.n)
    for larger in realized:
        unreached = np.array([v not in larger.reached for v in graph.nodes])
        after = gains[larger.canonical()][unreached]
        seeds = sorted(larger.domain)
        for size in range(len(seeds)):
            for sub in combinations(seeds, size):
                before = gains[larger.restrict(sub).canonical()][unreached]
                tally.add_many(before, after)
    return tally


def verify_lemma_suite(
    graph: InfluenceGraph,
    k: int,
    oracles: OracleBundle | None = None,
    max_edges: int = DEFAULT_MAX_EDGES,
    max_subsets: int = DEFAULT_MAX_SUBSETS,
) -> list[LemmaCheck]:
    """Check every applicable inequality exhaustively; gated by the graph's classes."""
    oracles = oracles or solve_instance(graph, k, max_edges, max_subsets)
    tallies = _realized_feedback_checks(oracles, max_edges)
    if oracles.classes.is_in_arborescence:
        tallies.append(_arborescence_boundary_check(oracles, max_edges, max_subsets))
    tallies += _recursion_checks(oracles, max_edges)
    tallies += _subset_checks(oracles, max_edges, max_subsets)
    tallies += _policy_checks(oracles, max_edges)
    if graph.n <= SUBMODULARITY_MAX_NODES and graph.m <= SUBMODULARITY_MAX_EDGES:
        tallies.append(_submodularity_check(graph, max_edges))
    return [t.result() for t in tallies]


# Sweeps

SWEEPS = ("in_arborescence", "zero_bounded", "alpha")


def sweep_bound(
    name: str, k_min: int = 2, k_max: int = 100, alphas: Iterable[int] = range(0, 101)
) -> list[SweepRow]:
    """Tabulate a bound over k (and alpha), with limits and the prior-work constant."""
    key = name.strip().lower().replace("-", "_")
    _require_k(k_min)
    ks = range(k_min, k_max + 1)
    if key in ("in_arborescence", "zero_bounded"):
        formula, limit = (
            (bound_in_arborescence, ARBORESCENCE_LIMIT)
            if key == "in_arborescence"
            else (bound_zero_bounded, ZERO_BOUNDED_LIMIT)
        )
        return [
            SweepRow(k=k, bound=formula(k), limit=limit, prior_work=PRIOR_WORK_BOUND) for k in ks
        ]
    if key == "alpha":
        rows = []
        for alpha in alphas:
            closed = bound_alpha_closed_form(alpha)
            for k in ks:
                bound = bound_alpha(alpha, k)
                rows.append(
                    SweepRow(
                        alpha=alpha,
                        k=k,
                        bound=bound,
                        closed_form=closed,
                        below_closed_form=bound <= closed + 1e-9,
                    )
                )
        return rows
    raise ValueError(f"Unknown bound {name!r} (choose from {', '.join(SWEEPS)})")
