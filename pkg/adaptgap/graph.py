"""Influence graphs: representation, file I/O, class recognition, boundaries, generators."""

from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import networkx as nx
import numpy as np

from .utils import GraphFormatError, InfeasibleSpecError


class Edge(NamedTuple):
    src: int
    dst: int
    prob: float


@dataclass(frozen=True)
class InfluenceGraph:
    """Directed graph on nodes 0..n-1 with per-edge activation probabilities.

    Undirected inputs are stored expanded: every undirected edge {u, v} becomes the
    two directed edges (u, v) and (v, u), each with its own probability, and
    `directed` is False.
    """

    n: int
    edges: tuple[Edge, ...]
    directed: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise GraphFormatError(f"Graph needs at least one node, got n={self.n}")
        edges = tuple(Edge(int(u), int(v), float(p)) for u, v, p in self.edges)
        object.__setattr__(self, "edges", edges)
        seen = set()
        for u, v, p in edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphFormatError(f"Edge ({u},{v}) has a node outside 0..{self.n - 1}")
            if u == v:
                raise GraphFormatError(f"Self-loop on node {u}")
            if (u, v) in seen:
                raise GraphFormatError(f"Duplicate edge ({u},{v})")
            if not 0.0 <= p <= 1.0:
                raise GraphFormatError(f"Probability {p} of edge ({u},{v}) is outside [0,1]")
            seen.add((u, v))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def nodes(self) -> range:
        return range(self.n)

    @cached_property
    def out_edges(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per node: (edge index, destination) pairs, in edge order."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for idx, (u, v, _) in enumerate(self.edges):
            adj[u].append((idx, v))
        return tuple(tuple(a) for a in adj)

    @cached_property
    def probs(self) -> np.ndarray:
        return np.array([e.prob for e in self.edges], dtype=np.float64)

    @cached_property
    def is_symmetric(self) -> bool:
        pairs = {(e.src, e.dst) for e in self.edges}
        return all((v, u) in pairs for u, v in pairs)

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(range(self.n))
        for u, v, p in self.edges:
            g.add_edge(u, v, prob=p)
        return g

    def undirected_view(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from((e.src, e.dst) for e in self.edges)
        return g

    def induced(self, keep: Iterable[int]) -> tuple["InfluenceGraph", tuple[int, ...]]:
        """Induced subgraph on `keep`, relabeled to 0..len-1. Returns (subgraph, new->old ids)."""
        old_ids = tuple(sorted(set(keep)))
        new_id = {old: new for new, old in enumerate(old_ids)}
        edges = tuple(
            Edge(new_id[u], new_id[v], p) for u, v, p in self.edges if u in new_id and v in new_id
        )
        return InfluenceGraph(len(old_ids), edges, self.directed), old_ids


# Graph files


def parse_graph(text: str, source: str = "<string>") -> InfluenceGraph:
    """Parse the line-oriented edge-list format.

    Line 1 is "directed" or "undirected", line 2 is n, every further line is
    "u v p" (directed) or "u v p_uv [p_vu]" (undirected). '#' starts a comment.
    """
    header: str | None = None
    n: int | None = None
    edges: list[Edge] = []
    seen: set[tuple[int, int]] = set()

    def fail(lineno: int, msg: str) -> GraphFormatError:
        return GraphFormatError(f"{source}:{lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            if line not in ("directed", "undirected"):
                raise fail(lineno, f"expected 'directed' or 'undirected', got {line!r}")
            header = line
            continue
        if n is None:
            try:
                n = int(line)
            except ValueError:
                raise fail(lineno, f"expected node count, got {line!r}") from None
            if n < 1:
                raise fail(lineno, f"node count must be positive, got {n}")
            continue

        fields = line.split()
        expected = (3,) if header == "directed" else (3, 4)
        if len(fields) not in expected:
            wanted = ' or '.join(map(str, expected))
            raise fail(lineno, f"expected {wanted} fields, got {len(fields)}")
        try:
            u, v = int(fields[0]), int(fields[1])
            probs = [float(x) for x in fields[2:]]
        except ValueError:
            raise fail(lineno, f"malformed edge {line!r}") from None

        if not (0 <= u < n and 0 <= v < n):
            raise fail(lineno, f"node id outside 0..{n - 1} in {line!r}")
        if u == v:
            raise fail(lineno, f"self-loop on node {u}")
        for p in probs:
            if not 0.0 <= p <= 1.0:
                raise fail(lineno, f"probability {p} outside [0,1]")

        pairs = [(u, v, probs[0])]
        if header == "undirected":
            pairs.append((v, u, probs[-1]))
        for a, b, p in pairs:
            if (a, b) in seen:
                raise fail(lineno, f"duplicate edge ({a},{b})")
            seen.add((a, b))
            edges.append(Edge(a, b, p))

    if header is None or n is None:
        raise GraphFormatError(f"{source}: missing header or node count")
    return InfluenceGraph(n, tuple(edges), directed=header == "directed")


def load_graph(path: Path) -> InfluenceGraph:
    """Load and validate a graph file."""
    return parse_graph(path.read_text(), source=str(path))


def dump_graph(graph: InfluenceGraph) -> str:
    """Serialize a graph in the edge-list format (probabilities written round-trip exact)."""
    lines = ["directed" if graph.directed else "undirected", str(graph.n)]
    if graph.directed:
        lines += [f"{u} {v} {p!r}" for u, v, p in graph.edges]
    else:
        prob = {(u, v): p for u, v, p in graph.edges}
        for u, v, p in graph.edges:
            if u < v:
                lines.append(f"{u} {v} {p!r} {prob[(v, u)]!r}")
    return "\n".join(lines) + "\n"


def save_graph(graph: InfluenceGraph, path: Path) -> None:
    path.write_text(dump_graph(graph))


# Class recognition


@dataclass(frozen=True)
class GraphClassReport:
    """Which of the supported graph classes a graph belongs to."""

    is_in_arborescence: bool
    is_out_arborescence: bool
    is_one_directional_bipartite: bool
    min_alpha: int | None  # None: edge set not symmetric, alpha-boundedness not applicable
    is_zero_bounded: bool

    @property
    def is_alpha_bounded(self) -> bool:
        return self.min_alpha is not None

    @property
    def label(self) -> str:
        if self.is_in_arborescence:
            return "in_arborescence"
        if self.is_zero_bounded:
            return "zero_bounded"
        if self.is_alpha_bounded:
            return "alpha_bounded"
        if self.is_out_arborescence:
            return "out_arborescence"
        if self.is_one_directional_bipartite:
            return "one_directional_bipartite"
        return "general"


def classify(graph: InfluenceGraph) -> GraphClassReport:
    """Recognize in/out-arborescences, one-directional bipartite and alpha-bounded graphs."""
    dg = graph.to_networkx()
    # An in-arborescence is a rooted tree with every edge pointing from child to father.
    in_arb = nx.is_arborescence(dg.reverse(copy=False))
    out_arb = nx.is_arborescence(dg)
    one_directional = not any(dg.in_degree(v) > 0 and dg.out_degree(v) > 0 for v in dg)

    min_alpha = None
    if graph.is_symmetric:
        min_alpha = sum(d for _, d in graph.undirected_view().degree() if d > 2)

    return GraphClassReport(
        is_in_arborescence=in_arb,
        is_out_arborescence=out_arb,
        is_one_directional_bipartite=one_directional,
        min_alpha=min_alpha,
        is_zero_bounded=min_alpha == 0,
    )


def boundary(graph: InfluenceGraph, nodes: Iterable[int]) -> frozenset[int]:
    """Nodes of U with at least one out-edge leaving U."""
    inside = frozenset(nodes)
    for u in inside:
        if not 0 <= u < graph.n:
            raise ValueError(f"Node {u} outside 0..{graph.n - 1}")
    return frozenset(
        u for u in inside if any(v not in inside for _, v in graph.out_edges[u])
    )


def component_count(graph: InfluenceGraph, nodes: Iterable[int]) -> int:
    """Connected components of the undirected view restricted to the given nodes."""
    sub = graph.undirected_view().subgraph(nodes)
    if sub.number_of_nodes() == 0:
        return 0
    return nx.number_connected_components(sub)


# Generators


@dataclass(frozen=True)
class ProbabilityRule:
    """Constant probability, or i.i.d. uniform on [low, high] when constant is None."""

    constant: float | None = 0.5
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if self.constant is not None and not 0.0 <= self.constant <= 1.0:
            raise InfeasibleSpecError(f"Probability {self.constant} outside [0,1]")
        if self.constant is None and not 0.0 <= self.low <= self.high <= 1.0:
            raise InfeasibleSpecError(f"Invalid uniform interval [{self.low}, {self.high}]")

    def draw(self, rng: np.random.Generator, count: int) -> list[float]:
        if self.constant is not None:
            return [self.constant] * count
        return [float(p) for p in rng.uniform(self.low, self.high, size=count)]

    def describe(self) -> str:
        if self.constant is not None:
            return f"p={self.constant:g}"
        return f"p~U[{self.low:g},{self.high:g}]"


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    params: tuple[int, ...]
    probability: ProbabilityRule = field(default_factory=ProbabilityRule)

    def describe(self) -> str:
        return f"{self.kind}({','.join(map(str, self.params))}) {self.probability.describe()}"


# A shape is (n, edge pairs, directed). Undirected shapes list each edge once as (u, v), u < v.
Shape = tuple[int, list[tuple[int, int]], bool]


def _require(ok: bool, msg: str) -> None:
    if not ok:
        raise InfeasibleSpecError(msg)


def _random_parents(n: int, rng: np.random.Generator) -> list[int]:
    # Random recursive tree rooted at node 0.
    return [int(rng.integers(0, v)) for v in range(1, n)]


def _in_arborescence(rng: np.random.Generator, n: int) -> Shape:
    _require(n >= 1, "in_arborescence needs n >= 1")
    return n, [(v, p) for v, p in enumerate(_random_parents(n, rng), 1)], True


def _out_arborescence(rng: np.random.Generator, n: int) -> Shape:
    _require(n >= 1, "out_arborescence needs n >= 1")
    return n, [(p, v) for v, p in enumerate(_random_parents(n, rng), 1)], True


def _directed_path(rng: np.random.Generator, n: int) -> Shape:
    _require(n >= 1, "directed_path needs n >= 1")
    return n, [(i, i + 1) for i in range(n - 1)], True


def _path(rng: np.random.Generator, n: int) -> Shape:
    _require(n >= 1, "path needs n >= 1")
    return n, sorted(nx.path_graph(n).edges()), False


def _cycle(rng: np.random.Generator, n: int) -> Shape:
    _require(n >= 3, f"cycle needs n >= 3, got {n}")
    return n, sorted(tuple(sorted(e)) for e in nx.cycle_graph(n).edges()), False


def _one_directional_bipartite(rng: np.random.Generator, a: int, b: int) -> Shape:
    _require(a >= 1 and b >= 1, "one_directional_bipartite needs a, b >= 1")
    g = nx.complete_bipartite_graph(a, b)
    return a + b, sorted((min(e), max(e)) for e in g.edges()), True


def _star_subdivision(rng: np.random.Generator, h: int, length: int) -> Shape:
    _require(h >= 1 and length >= 1, "star_subdivision needs h, len >= 1")
    edges = []
    for leg in range(h):
        first = 1 + leg * length
        edges.append((0, first))
        edges += [(first + i, first + i + 1) for i in range(length - 1)]
    return 1 + h * length, edges, False


def _parallel_links(rng: np.random.Generator, h: int, length: int) -> Shape:
    _require(h >= 1 and length >= 1, "parallel_links needs h, len >= 1")
    edges = []
    for leg in range(h):
        first = 2 + leg * length
        last = first + length - 1
        edges.append((0, first))
        edges += [(first + i, first + i + 1) for i in range(length - 1)]
        edges.append((1, last))
    return 2 + h * length, edges, False


def _clique(rng: np.random.Generator, h: int) -> Shape:
    _require(h >= 1, "clique needs h >= 1")
    return h, sorted(nx.complete_graph(h).edges()), False


def _chorded_cycle(rng: np.random.Generator, n: int, h: int) -> Shape:
    _require(n >= 4, f"chorded_cycle needs n >= 4, got {n}")
    _require(0 <= h <= n // 2, f"chorded_cycle supports 0..{n // 2} disjoint chords, got {h}")
    _, edges, _ = _cycle(rng, n)
    edges += [(j, j + n // 2) for j in range(h)]
    return n, edges, False


def _random_digraph(rng: np.random.Generator, n: int, m: int) -> Shape:
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    _require(n >= 1 and 0 <= m <= len(pairs), f"random_digraph({n},{m}) needs 0 <= m <= n(n-1)")
    chosen = sorted(rng.choice(len(pairs), size=m, replace=False).tolist())
    return n, [pairs[i] for i in chosen], True


GENERATORS: dict[str, Callable[..., Shape]] = {
    "in_arborescence": _in_arborescence,
    "out_arborescence": _out_arborescence,
    "directed_path": _directed_path,
    "path": _path,
    "cycle": _cycle,
    "one_directional_bipartite": _one_directional_bipartite,
    "star_subdivision": _star_subdivision,
    "parallel_links": _parallel_links,
    "clique": _clique,
    "chorded_cycle": _chorded_cycle,
    "random_digraph": _random_digraph,
}

ALIASES = {"in_arb": "in_arborescence", "out_arb": "out_arborescence", "dipath": "directed_path"}


def normalize_kind(kind: str) -> str:
    key = kind.strip().lower().replace("-", "_")
    key = ALIASES.get(key, key)
    if key not in GENERATORS:
        raise InfeasibleSpecError(
            f"Unknown generator {kind!r} (choose from {', '.join(sorted(GENERATORS))})"
        )
    return key


def generate(spec: GeneratorSpec, seed: int = 0) -> InfluenceGraph:
    """Build an instance of the requested family; node 0 is always the arborescence root."""
    kind = normalize_kind(spec.kind)
    builder = GENERATORS[kind]
    arity = builder.__code__.co_argcount - 1
    if len(spec.params) != arity:
        raise InfeasibleSpecError(f"{kind} takes {arity} parameter(s), got {len(spec.params)}")

    rng = np.random.default_rng(seed)
    n, pairs, directed = builder(rng, *spec.params)

    if directed:
        probs = spec.probability.draw(rng, len(pairs))
        edges = [Edge(u, v, p) for (u, v), p in zip(pairs, probs, strict=True)]
    else:
        probs = spec.probability.draw(rng, 2 * len(pairs))
        edges = []
        for i, (u, v) in enumerate(pairs):
            edges.append(Edge(u, v, probs[2 * i]))
            edges.append(Edge(v, u, probs[2 * i + 1]))
    return InfluenceGraph(n, tuple(edges), directed=directed)
