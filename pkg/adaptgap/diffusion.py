"""Independent cascade diffusion: live-edge graphs, reachability, exact and Monte Carlo spread."""

import math
import multiprocessing
from collections import deque
from collections.abc import Iterable
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graph import InfluenceGraph
from .utils import MAX_BITMASK_NODES, CapExceededError, substream, to_bits

DEFAULT_MAX_EDGES = 20
DEFAULT_MC_CHUNK = 1000
TABLE_CHUNK = 1 << 15


@dataclass(frozen=True)
class LiveEdgeGraph:
    """One outcome of all edge coin flips: bit e of live_mask is set iff edge e is live."""

    live_mask: int
    weight: float

    def is_live(self, edge_index: int) -> bool:
        return bool(self.live_mask >> edge_index & 1)

    @property
    def live_edges(self) -> tuple[int, ...]:
        return tuple(e for e in range(self.live_mask.bit_length()) if self.is_live(e))


@dataclass(frozen=True)
class SpreadEstimate:
    mean: float
    stderr: float
    samples: int


@dataclass(frozen=True)
class DiffusionTrace:
    """Activation layers A_0 = S, A_1, ... of one diffusion run, with the live-edge graph used."""

    layers: tuple[frozenset[int], ...]
    live: LiveEdgeGraph

    @property
    def reached(self) -> frozenset[int]:
        return frozenset().union(*self.layers)


def live_weight(graph: InfluenceGraph, live_mask: int) -> float:
    weight = 1.0
    for e, edge in enumerate(graph.edges):
        weight *= edge.prob if live_mask >> e & 1 else 1.0 - edge.prob
    return weight


def sample_live(graph: InfluenceGraph, rng: np.random.Generator) -> LiveEdgeGraph:
    """Include every edge independently with its probability."""
    draws = rng.random(graph.m) < graph.probs
    mask = 0
    for e in np.flatnonzero(draws):
        mask |= 1 << int(e)
    return LiveEdgeGraph(mask, live_weight(graph, mask))


def reach(graph: InfluenceGraph, seeds: Iterable[int], live: LiveEdgeGraph) -> frozenset[int]:
    """Forward closure of the seeds over live edges (BFS)."""
    visited = set(seeds)
    queue = deque(visited)
    while queue:
        u = queue.popleft()
        for e, v in graph.out_edges[u]:
            if v not in visited and live.live_mask >> e & 1:
                visited.add(v)
                queue.append(v)
    return frozenset(visited)


def simulate_rounds(
    graph: InfluenceGraph, seeds: Iterable[int], rng: np.random.Generator
) -> DiffusionTrace:
    """Run the step-by-step cascade on a sampled live-edge graph, recording each layer."""
    layer = frozenset(seeds)
    if not layer:
        raise ValueError("simulate_rounds needs a nonempty seed set")
    live = sample_live(graph, rng)
    active = set(layer)
    layers = [layer]
    while True:
        nxt = set()
        for u in layer:
            for e, v in graph.out_edges[u]:
                if v not in active and live.live_mask >> e & 1:
                    nxt.add(v)
        if not nxt:
            break
        active |= nxt
        layer = frozenset(nxt)
        layers.append(layer)
    return DiffusionTrace(tuple(layers), live)


# Exact enumeration


def check_caps(graph: InfluenceGraph, max_edges: int) -> None:
    if graph.m > max_edges:
        raise CapExceededError(
            f"Exact enumeration needs 2^{graph.m} live-edge graphs; graph has m={graph.m} "
            f"edges but the cap is {max_edges} (raise --max-edges)"
        )
    if graph.n > MAX_BITMASK_NODES:
        raise CapExceededError(
            f"Exact oracles support at most {MAX_BITMASK_NODES} nodes, graph has n={graph.n}"
        )


@dataclass(frozen=True, eq=False)
class LiveEdgeTable:
    """Every live-edge graph of a graph with its weight and realization.

    Row l is the live mask l (increasing binary order). phi[l, v] is the bitmask of
    R({v}, L_l), so reach sets of any seed set are ORs of columns.
    """

    graph: InfluenceGraph
    masks: np.ndarray  # (N,) int64
    weights: np.ndarray  # (N,) float64
    phi: np.ndarray  # (N, n) int64

    def __len__(self) -> int:
        return len(self.masks)

    def reached(self, seeds_bits: int, rows: np.ndarray | None = None) -> np.ndarray:
        """Bitmask of R(S, L) for each row (all rows when rows is None)."""
        phi = self.phi if rows is None else self.phi[rows]
        out = np.zeros(len(phi), dtype=np.int64)
        v = 0
        while seeds_bits:
            if seeds_bits & 1:
                out |= phi[:, v]
            seeds_bits >>= 1
            v += 1
        return out

    def spread(self, seeds: Iterable[int]) -> float:
        counts = np.bitwise_count(self.reached(to_bits(seeds)))
        return float(np.dot(self.weights, counts))

    def live_graph(self, row: int) -> LiveEdgeGraph:
        return LiveEdgeGraph(int(self.masks[row]), float(self.weights[row]))


def _closure_chunk(graph: InfluenceGraph, masks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, m = graph.n, graph.m
    bits = ((masks[:, None] >> np.arange(m, dtype=np.int64)) & 1).astype(bool)
    weights = np.prod(np.where(bits, graph.probs, 1.0 - graph.probs), axis=1)

    adj = np.zeros((len(masks), n, n), dtype=np.uint8)
    for e, (u, v, _) in enumerate(graph.edges):
        adj[:, u, v] = bits[:, e]
    closure = adj | np.eye(n, dtype=np.uint8)
    # Squaring doubles the covered path length; n-1 hops suffice.
    for _ in range(max(1, (n - 1).bit_length())):
        closure = (np.matmul(closure, closure) > 0).astype(np.uint8)

    phi = closure.astype(np.int64) @ (np.int64(1) << np.arange(n, dtype=np.int64))
    return weights, phi


@lru_cache(maxsize=64)
def live_edge_table(graph: InfluenceGraph, max_edges: int = DEFAULT_MAX_EDGES) -> LiveEdgeTable:
    """Enumerate all 2^m live-edge graphs (cached per graph)."""
    check_caps(graph, max_edges)
    masks = np.arange(1 << graph.m, dtype=np.int64)
    weights = np.empty(len(masks), dtype=np.float64)
    phi = np.empty((len(masks), graph.n), dtype=np.int64)
    for start in range(0, len(masks), TABLE_CHUNK):
        stop = min(start + TABLE_CHUNK, len(masks))
        weights[start:stop], phi[start:stop] = _closure_chunk(graph, masks[start:stop])
    return LiveEdgeTable(graph, masks, weights, phi)


def enumerate_live(
    graph: InfluenceGraph, max_edges: int = DEFAULT_MAX_EDGES
) -> list[LiveEdgeGraph]:
    """All 2^m live-edge graphs in increasing live-mask order, with product weights."""
    table = live_edge_table(graph, max_edges)
    return [table.live_graph(row) for row in range(len(table))]


def _check_seeds(graph: InfluenceGraph, seeds: Iterable[int]) -> frozenset[int]:
    nodes = frozenset(seeds)
    for v in nodes:
        if not 0 <= v < graph.n:
            raise ValueError(f"Seed {v} outside 0..{graph.n - 1}")
    return nodes


def spread_exact(
    graph: InfluenceGraph, seeds: Iterable[int], max_edges: int = DEFAULT_MAX_EDGES
) -> float:
    """Expected number of reached nodes, summed over every live-edge graph."""
    nodes = _check_seeds(graph, seeds)
    return live_edge_table(graph, max_edges).spread(nodes)


ChunkItem = tuple[InfluenceGraph, frozenset[int], tuple[int, ...], int]


def _mc_chunk(item: ChunkItem) -> tuple[int, int]:
    """Sum and sum of squares of reach sizes over one chunk."""
    graph, nodes, key, size = item
    rng = substream(*key)
    total = square = 0
    for _ in range(size):
        r = len(reach(graph, nodes, sample_live(graph, rng)))
        total += r
        square += r * r
    return total, square


def spread_mc(
    graph: InfluenceGraph,
    seeds: Iterable[int],
    samples: int,
    seed: int = 0,
    workers: int = 1,
    chunk: int = DEFAULT_MC_CHUNK,
    stream: tuple[int, ...] = (),
) -> SpreadEstimate:
    """Monte Carlo spread estimate.

    Samples are split into fixed-size chunks; chunk i draws from substream
    (seed, *stream, i), so the result is identical for any worker count.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    nodes = _check_seeds(graph, seeds)
    items = [
        (graph, nodes, (seed, *stream, i), min(chunk, samples - start))
        for i, start in enumerate(range(0, samples, chunk))
    ]

    if workers > 1 and len(items) > 1:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(processes=min(workers, len(items))) as pool:
            results = pool.map(_mc_chunk, items)
    else:
        results = [_mc_chunk(item) for item in items]

    # Integer sums: exact, so combination order cannot change the result.
    total = sum(t for t, _ in results)
    square = sum(s for _, s in results)
    mean = total / samples
    if samples == 1:
        return SpreadEstimate(mean, 0.0, samples)
    variance = (samples * square - total * total) / (samples * (samples - 1))
    return SpreadEstimate(mean, math.sqrt(max(variance, 0.0) / samples), samples)
