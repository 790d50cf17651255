"""Realizations, partial realizations and conditioning on full-adoption feedback."""

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .diffusion import DEFAULT_MAX_EDGES, LiveEdgeGraph, LiveEdgeTable, live_edge_table, reach
from .graph import InfluenceGraph
from .utils import InconsistentRealizationError, from_bits, to_bits


@dataclass(frozen=True)
class Realization:
    """observed[v] is phi_L(v), the set reached from v alone."""

    observed: tuple[frozenset[int], ...]

    def __getitem__(self, v: int) -> frozenset[int]:
        return self.observed[v]

    def __len__(self) -> int:
        return len(self.observed)


@dataclass(frozen=True)
class PartialRealization:
    """Feedback observed so far: seeds in selection order with the set each one reached."""

    entries: tuple[tuple[int, frozenset[int]], ...] = ()

    def __post_init__(self):
        entries = tuple((int(s), frozenset(obs)) for s, obs in self.entries)
        object.__setattr__(self, "entries", entries)
        seeds = [s for s, _ in entries]
        if len(set(seeds)) != len(seeds):
            raise InconsistentRealizationError(f"Repeated seed in partial realization {seeds}")
        for s, obs in entries:
            if s not in obs:
                raise InconsistentRealizationError(f"Seed {s} missing from its observed set")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(s for s, _ in self.entries)

    @cached_property
    def reached(self) -> frozenset[int]:
        return frozenset().union(*(obs for _, obs in self.entries))

    @cached_property
    def reached_bits(self) -> int:
        return to_bits(self.reached)

    @property
    def value(self) -> int:
        """f(psi): number of reached nodes."""
        return len(self.reached)

    def observed(self, seed: int) -> frozenset[int] | None:
        for s, obs in self.entries:
            if s == seed:
                return obs
        return None

    def extend(self, seed: int, observed: Iterable[int]) -> "PartialRealization":
        return PartialRealization((*self.entries, (seed, frozenset(observed))))

    def restrict(self, seeds: Iterable[int]) -> "PartialRealization":
        keep = set(seeds)
        return PartialRealization(tuple(e for e in self.entries if e[0] in keep))

    def canonical(self) -> tuple[tuple[int, tuple[int, ...]], ...]:
        """Order-free key: entries sorted by seed, observed sets sorted."""
        return tuple(sorted((s, tuple(sorted(obs))) for s, obs in self.entries))

    def is_subrealization_of(self, other: "PartialRealization") -> bool:
        return all(other.observed(s) == obs for s, obs in self.entries)


@dataclass(frozen=True)
class Posterior:
    """Live-edge graphs consistent with a partial realization, weights renormalized."""

    support: tuple[tuple[LiveEdgeGraph, float], ...]

    @property
    def total(self) -> float:
        return sum(w for _, w in self.support)

    def __len__(self) -> int:
        return len(self.support)


def realize(graph: InfluenceGraph, live: LiveEdgeGraph) -> Realization:
    return Realization(tuple(reach(graph, {v}, live) for v in graph.nodes))


def is_consistent(graph: InfluenceGraph, psi: PartialRealization, live: LiveEdgeGraph) -> bool:
    """True iff every observed set equals the reach of its seed under `live`."""
    return all(reach(graph, {s}, live) == obs for s, obs in psi.entries)


def consistent_rows(table: LiveEdgeTable, psi: PartialRealization) -> np.ndarray:
    """Indices of table rows consistent with psi, zero-weight rows included."""
    ok = np.ones(len(table.weights), dtype=bool)
    for s, obs in psi.entries:
        ok &= table.phi[:, s] == to_bits(obs)
    rows = np.flatnonzero(ok)
    if not table.weights[rows].sum() > 0:
        raise InconsistentRealizationError(
            f"No positive-probability live-edge graph produces {psi.canonical()}"
        )
    return rows


def posterior(
    graph: InfluenceGraph, psi: PartialRealization, max_edges: int = DEFAULT_MAX_EDGES
) -> Posterior:
    table = live_edge_table(graph, max_edges)
    rows = consistent_rows(table, psi)
    mass = float(table.weights[rows].sum())
    return Posterior(tuple((table.live_graph(r), float(table.weights[r]) / mass) for r in rows))


def delta_vector(table: LiveEdgeTable, rows: np.ndarray, reached_bits: int) -> np.ndarray:
    """Delta(i|psi) for every node i, over the given consistent rows of psi."""
    weights = table.weights[rows]
    counts = np.bitwise_count(table.phi[rows] | np.int64(reached_bits)).astype(np.float64)
    gains = weights @ counts / weights.sum() - reached_bits.bit_count()
    # Nodes already reached gain exactly nothing.
    gains[np.array(sorted(from_bits(reached_bits)), dtype=np.intp)] = 0.0
    return gains


def delta(
    graph: InfluenceGraph,
    node: int,
    psi: PartialRealization,
    max_edges: int = DEFAULT_MAX_EDGES,
) -> float:
    """Expected increase of f when `node` is seeded next, given feedback psi."""
    if not 0 <= node < graph.n:
        raise ValueError(f"Node {node} outside 0..{graph.n - 1}")
    table = live_edge_table(graph, max_edges)
    rows = consistent_rows(table, psi)
    if node in psi.reached:
        return 0.0
    weights = table.weights[rows]
    counts = np.bitwise_count(table.phi[rows, node] | np.int64(psi.reached_bits))
    return float(np.dot(weights, counts) / weights.sum()) - psi.value


@dataclass(frozen=True, eq=False)
class FeedbackGroup:
    """One partial realization on a fixed domain, its probability and its table rows."""

    psi: PartialRealization
    prob: float
    rows: np.ndarray


def iter_partial_realizations(
    table: LiveEdgeTable, seeds: Sequence[int]
) -> Iterator[FeedbackGroup]:
    """Every psi with the given seeds (in order) realized with positive probability.

    Groups come out in increasing order of their observation bitmasks.
    """
    positive = np.flatnonzero(table.weights > 0)
    if not seeds:
        yield FeedbackGroup(PartialRealization(), float(table.weights[positive].sum()), positive)
        return
    cols = table.phi[np.ix_(positive, list(seeds))]
    unique, inverse = np.unique(cols, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    probs = np.bincount(inverse, weights=table.weights[positive], minlength=len(unique))
    for g, observed in enumerate(unique):
        psi = PartialRealization(
            tuple((s, from_bits(int(b))) for s, b in zip(seeds, observed, strict=True))
        )
        yield FeedbackGroup(psi, float(probs[g]), positive[inverse == g])
