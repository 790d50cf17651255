"""Seeding policies, the policy executor and exact optimal oracles.

A policy maps the feedback observed so far (a PartialRealization) to the next seed,
or to None once it stops. Exact oracles work over the cached live-edge table and
break argmax ties toward the smallest node id.
"""

import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Literal, Protocol

import numpy as np

from .diffusion import (
    DEFAULT_MAX_EDGES,
    LiveEdgeGraph,
    LiveEdgeTable,
    live_edge_table,
    reach,
    spread_mc,
)
from .graph import InfluenceGraph
from .realization import PartialRealization, consistent_rows, delta_vector
from .utils import EPS, CapExceededError, PolicyError, close, from_bits, strictly_greater

DEFAULT_MAX_SUBSETS = 200_000
DEFAULT_MC_SAMPLES = 2000

GreedyMode = Literal["exact", "mc"]


class Policy(Protocol):
    budget: int

    def next(self, psi: PartialRealization) -> int | None: ...


# Policy trees


@dataclass(frozen=True)
class Branch:
    observed: frozenset[int]
    prob: float  # conditional on reaching the parent node
    child: "PolicyNode"


@dataclass(frozen=True)
class PolicyNode:
    """Decision node (seed set) or leaf (seed None). value is the expected final f."""

    seed: int | None
    value: float
    branches: tuple[Branch, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.seed is None


@dataclass(frozen=True)
class PolicyTree:
    root: PolicyNode
    budget: int
    n: int

    @property
    def value(self) -> float:
        return self.root.value

    def walk(self) -> Iterator[tuple[PartialRealization, float, PolicyNode]]:
        """Depth-first (psi, path probability, node) triples, branches in stored order."""
        stack = [(PartialRealization(), 1.0, self.root)]
        while stack:
            psi, prob, node = stack.pop()
            yield psi, prob, node
            for branch in reversed(node.branches):
                child_psi = psi.extend(node.seed, branch.observed)
                stack.append((child_psi, prob * branch.prob, branch.child))


@dataclass(frozen=True)
class TreePolicy:
    """Follows a PolicyTree along the observed feedback."""

    tree: PolicyTree

    @property
    def budget(self) -> int:
        return self.tree.budget

    def next(self, psi: PartialRealization) -> int | None:
        node = self.tree.root
        for seed, observed in psi.entries:
            if node.seed != seed:
                raise PolicyError(
                    f"Feedback seed {seed} does not follow the tree (expected {node.seed})"
                )
            for branch in node.branches:
                if branch.observed == observed:
                    node = branch.child
                    break
            else:
                raise PolicyError(f"No branch of seed {seed} observes {sorted(observed)}")
        return node.seed


@dataclass(frozen=True)
class FixedSetPolicy:
    """Non-adaptive policy: seeds a fixed set in increasing id order, ignoring feedback."""

    seeds: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(sorted(set(self.seeds))))

    @property
    def budget(self) -> int:
        return len(self.seeds)

    def next(self, psi: PartialRealization) -> int | None:
        for s in self.seeds:
            if s not in psi.domain:
                return s
        return None


def _argmax(values: Iterable[tuple[int, float]]) -> tuple[int, float]:
    """Best (node, value), scanning in the given order; later nodes win only strictly."""
    best, best_value = -1, -math.inf
    for node, value in values:
        if best < 0 or strictly_greater(value, best_value):
            best, best_value = node, value
    if best < 0:
        raise PolicyError("No candidate node left to seed")
    return best, best_value


def _greedy_gains(
    graph: InfluenceGraph,
    psi: PartialRealization,
    mode: GreedyMode,
    samples: int,
    seed: int,
    max_edges: int,
) -> np.ndarray:
    if mode == "exact":
        table = live_edge_table(graph, max_edges)
        return delta_vector(table, consistent_rows(table, psi), psi.reached_bits)
    gains = np.zeros(graph.n)
    unreached = [v for v in graph.nodes if v not in psi.reached]
    if unreached:
        sub, old_ids = graph.induced(unreached)
        for new, old in enumerate(old_ids):
            estimate = spread_mc(sub, {new}, samples, seed, stream=(len(psi), old))
            gains[old] = estimate.mean
    return gains


@lru_cache(maxsize=1 << 16)
def _greedy_choice(
    graph: InfluenceGraph,
    psi: PartialRealization,
    mode: GreedyMode,
    samples: int,
    seed: int,
    max_edges: int,
) -> int:
    gains = _greedy_gains(graph, psi, mode, samples, seed, max_edges)
    candidates = [v for v in graph.nodes if v not in psi.domain]
    return _argmax((v, float(gains[v])) for v in candidates)[0]


@dataclass(frozen=True)
class GreedyAdaptivePolicy:
    """Seeds argmax_i Delta(i|psi) at every step.

    In mc mode the gain is estimated on the subgraph induced by the unreached nodes:
    edges leaving R(psi) are known dead and every other edge is still unobserved, so
    the spread of i there is exactly Delta(i|psi).
    """

    graph: InfluenceGraph
    budget: int
    mode: GreedyMode = "exact"
    samples: int = DEFAULT_MC_SAMPLES
    seed: int = 0
    max_edges: int = DEFAULT_MAX_EDGES

    def gains(self, psi: PartialRealization) -> np.ndarray:
        return _greedy_gains(self.graph, psi, self.mode, self.samples, self.seed, self.max_edges)

    def next(self, psi: PartialRealization) -> int | None:
        if len(psi) >= self.budget:
            return None
        # Choices depend only on the feedback content, so memoize on the canonical order.
        canonical = PartialRealization(tuple(sorted(psi.entries, key=lambda e: e[0])))
        return _greedy_choice(
            self.graph, canonical, self.mode, self.samples, self.seed, self.max_edges
        )


# Executor


def _query(policy: Policy, psi: PartialRealization) -> int | None:
    seed = policy.next(psi)
    if seed is None:
        return None
    if seed in psi.domain:
        raise PolicyError(f"Policy selected seed {seed} twice")
    if len(psi) >= policy.budget:
        raise PolicyError(f"Policy exceeded its budget of {policy.budget} seeds")
    return seed


def run_policy(graph: InfluenceGraph, policy: Policy, live: LiveEdgeGraph) -> PartialRealization:
    """Query the policy until it stops, observing the full cascade of every seed."""
    psi = PartialRealization()
    while (seed := _query(policy, psi)) is not None:
        psi = psi.extend(seed, reach(graph, {seed}, live))
    return psi


def _split(
    table: LiveEdgeTable, rows: np.ndarray, seed: int
) -> Iterator[tuple[frozenset[int], np.ndarray]]:
    """Partition rows by what seeding `seed` observes, in increasing bitmask order."""
    observed, inverse = np.unique(table.phi[rows, seed], return_inverse=True)
    inverse = inverse.reshape(-1)
    for g, bits in enumerate(observed):
        yield from_bits(int(bits)), rows[inverse == g]


def policy_value_exact(
    graph: InfluenceGraph, policy: Policy, max_edges: int = DEFAULT_MAX_EDGES
) -> float:
    """Expected f of the executor's output over every live-edge graph.

    Live-edge graphs are grouped by the feedback they produce, so the policy is queried
    once per distinct partial realization instead of once per live-edge graph.
    """
    table = live_edge_table(graph, max_edges)

    def evaluate(psi: PartialRealization, rows: np.ndarray) -> float:
        seed = _query(policy, psi)
        if seed is None:
            return float(table.weights[rows].sum()) * psi.value
        return sum(evaluate(psi.extend(seed, obs), sub) for obs, sub in _split(table, rows, seed))

    return evaluate(PartialRealization(), np.flatnonzero(table.weights > 0))


# Non-adaptive oracles


@dataclass(frozen=True)
class NonAdaptiveOptimum:
    """Optimal seed sets for every size t = 0..k (lexicographically smallest among ties)."""

    sets: tuple[frozenset[int], ...]
    values: tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.sets) - 1

    @property
    def seeds(self) -> frozenset[int]:
        return self.sets[-1]

    @property
    def value(self) -> float:
        return self.values[-1]


@dataclass(frozen=True)
class GreedyTrace:
    seeds: tuple[int, ...]
    increments: tuple[float, ...]

    @property
    def spreads(self) -> tuple[float, ...]:
        return tuple(np.cumsum(self.increments).tolist())


def _check_budget(graph: InfluenceGraph, k: int) -> None:
    if not 0 <= k <= graph.n:
        raise PolicyError(f"Budget k={k} must be between 0 and n={graph.n}")


def opt_nonadaptive(
    graph: InfluenceGraph,
    k: int,
    max_edges: int = DEFAULT_MAX_EDGES,
    max_subsets: int = DEFAULT_MAX_SUBSETS,
) -> NonAdaptiveOptimum:
    """Exhaustive search over all seed sets of size <= k."""
    _check_budget(graph, k)
    subsets = sum(math.comb(graph.n, t) for t in range(k + 1))
    if subsets > max_subsets:
        raise CapExceededError(
            f"Subset search needs {subsets} spread evaluations, cap is {max_subsets} "
            "(raise --max-subsets)"
        )
    table = live_edge_table(graph, max_edges)
    sets, values = [frozenset()], [0.0]
    for t in range(1, k + 1):
        best, best_value = None, -math.inf
        for combo in combinations(graph.nodes, t):
            value = table.spread(combo)
            if best is None or strictly_greater(value, best_value):
                best, best_value = combo, value
        sets.append(frozenset(best))
        values.append(best_value)
    return NonAdaptiveOptimum(tuple(sets), tuple(values))


def greedy_nonadaptive(
    graph: InfluenceGraph,
    k: int | None = None,
    candidates: Iterable[int] | None = None,
    max_edges: int = DEFAULT_MAX_EDGES,
) -> GreedyTrace:
    """Greedy seed sequence over a candidate set (default: all nodes), recording increments."""
    pool = sorted(set(graph.nodes if candidates is None else candidates))
    for v in pool:
        if not 0 <= v < graph.n:
            raise ValueError(f"Candidate {v} outside 0..{graph.n - 1}")
    k = len(pool) if k is None else k
    if not 0 <= k <= len(pool):
        raise PolicyError(f"Greedy budget {k} exceeds the {len(pool)} candidates")
    table = live_edge_table(graph, max_edges)
    reached = np.zeros(len(table), dtype=np.int64)
    current = 0.0
    seeds, increments = [], []
    for _ in range(k):
        left = [v for v in pool if v not in seeds]
        counts = np.bitwise_count(reached[:, None] | table.phi[:, left])
        spreads = table.weights @ counts
        idx, value = _argmax((j, float(spreads[j])) for j in range(len(left)))
        seeds.append(left[idx])
        increments.append(value - current)
        current = value
        reached |= table.phi[:, left[idx]]
    return GreedyTrace(tuple(seeds), tuple(increments))


# Adaptive oracles


def opt_adaptive(graph: InfluenceGraph, k: int, max_edges: int = DEFAULT_MAX_EDGES) -> PolicyTree:
    """Exact optimal adaptive policy by expectimax over partial realizations.

    V(psi, 0) = f(psi), V(psi, r) = max_i E[V(psi + (i, phi(i)), r - 1) | psi].
    Memoized on the canonical form of psi. Every budget is spent in full.
    """
    _check_budget(graph, k)
    table = live_edge_table(graph, max_edges)
    memo: dict[tuple, PolicyNode] = {}

    def expand(
        psi: PartialRealization, rows: np.ndarray, seed: int, remaining: int
    ) -> tuple[Branch, ...]:
        total = table.weights[rows].sum()
        return tuple(
            Branch(
                obs,
                float(table.weights[sub].sum() / total),
                solve(psi.extend(seed, obs), sub, remaining - 1),
            )
            for obs, sub in _split(table, rows, seed)
        )

    def solve(psi: PartialRealization, rows: np.ndarray, remaining: int) -> PolicyNode:
        key = psi.canonical()
        if key in memo:
            return memo[key]
        if remaining == 0:
            node = PolicyNode(None, float(psi.value))
        else:
            candidates = [v for v in graph.nodes if v not in psi.domain]
            if remaining == 1:
                weights = table.weights[rows]
                options = table.phi[np.ix_(rows, candidates)]
                counts = np.bitwise_count(options | np.int64(psi.reached_bits))
                values = weights @ counts / weights.sum()
                seed, _ = _argmax(zip(candidates, values.tolist(), strict=True))
                branches = expand(psi, rows, seed, remaining)
            else:
                options = {v: expand(psi, rows, v, remaining) for v in candidates}
                seed, _ = _argmax(
                    (v, sum(b.prob * b.child.value for b in options[v])) for v in candidates
                )
                branches = options[seed]
            node = PolicyNode(seed, sum(b.prob * b.child.value for b in branches), branches)
        memo[key] = node
        return node

    root = solve(PartialRealization(), np.flatnonzero(table.weights > 0), k)
    return PolicyTree(root, k, graph.n)


def greedy_adaptive(
    graph: InfluenceGraph,
    k: int,
    mode: GreedyMode = "exact",
    samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    max_edges: int = DEFAULT_MAX_EDGES,
) -> GreedyAdaptivePolicy:
    _check_budget(graph, k)
    if mode not in ("exact", "mc"):
        raise ValueError(f"Unknown greedy mode {mode!r}")
    if mode == "exact":
        live_edge_table(graph, max_edges)
    return GreedyAdaptivePolicy(graph, k, mode, samples, seed, max_edges)


# Marginals and the hybrid non-adaptive policy


@dataclass(frozen=True)
class MarginalVector:
    """x[i]: probability that the policy ever seeds node i."""

    x: tuple[float, ...]

    def __getitem__(self, i: int) -> float:
        return self.x[i]

    def __len__(self) -> int:
        return len(self.x)

    @property
    def total(self) -> float:
        return math.fsum(self.x)


@dataclass(frozen=True)
class SeedSelector:
    """Random node with P[i] = x_i / k."""

    probs: tuple[float, ...]

    @classmethod
    def from_marginals(cls, x: MarginalVector, k: int) -> "SeedSelector":
        if k < 1 or not abs(x.total - k) <= EPS:
            raise PolicyError(f"Marginal vector sums to {x.total}, expected k={k}")
        probs = np.clip(np.asarray(x.x, dtype=np.float64), 0.0, None) / k
        return cls(tuple((probs / probs.sum()).tolist()))

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.choice(len(self.probs), p=self.probs))


def marginals(graph: InfluenceGraph, tree: PolicyTree) -> MarginalVector:
    """Selection probability of every node, by traversal of the policy tree."""
    x = np.zeros(graph.n)
    for psi, prob, node in tree.walk():
        if node.is_leaf:
            if node.branches:
                raise PolicyError("Leaf node carries branches")
            continue
        if not 0 <= node.seed < graph.n or node.seed in psi.domain:
            raise PolicyError(f"Invalid seed {node.seed} after {sorted(psi.domain)}")
        if len(psi) >= tree.budget:
            raise PolicyError(f"Tree is deeper than its budget {tree.budget}")
        if not node.branches or not close(sum(b.prob for b in node.branches), 1.0, EPS):
            raise PolicyError(f"Branch probabilities of seed {node.seed} do not sum to 1")
        x[node.seed] += prob
    vector = MarginalVector(tuple(x.tolist()))
    if not abs(vector.total - tree.budget) <= EPS:
        raise PolicyError(f"Marginals sum to {vector.total}, expected {tree.budget}")
    return vector


def marginals_from_runs(
    graph: InfluenceGraph, policy: Policy, max_edges: int = DEFAULT_MAX_EDGES
) -> MarginalVector:
    """Selection probabilities from executor runs on every positive-weight live-edge graph."""
    table = live_edge_table(graph, max_edges)
    x = np.zeros(graph.n)
    for row in np.flatnonzero(table.weights > 0):
        live = table.live_graph(int(row))
        for s in run_policy(graph, policy, live).domain:
            x[s] += live.weight
    return MarginalVector(tuple(x.tolist()))


def hybrid_value(
    graph: InfluenceGraph,
    k: int,
    t: int,
    x: MarginalVector,
    optimum: NonAdaptiveOptimum | None = None,
    max_edges: int = DEFAULT_MAX_EDGES,
) -> float:
    """Expected f of seeding the optimal (t-1)-set plus one node drawn with P[i] = x_i/k."""
    if not 1 <= t <= k:
        raise ValueError(f"t must be in 1..{k}, got {t}")
    selector = SeedSelector.from_marginals(x, k)
    if optimum is None or optimum.k < t - 1:
        optimum = opt_nonadaptive(graph, t - 1, max_edges)
    base = optimum.sets[t - 1]
    table = live_edge_table(graph, max_edges)
    return math.fsum(
        p * table.spread(base | {i}) for i, p in enumerate(selector.probs) if p > 0
    )
