"""Tests for live-edge sampling, reachability and spread estimation."""

import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings

from adaptgap.diffusion import (
    LiveEdgeGraph,
    enumerate_live,
    live_edge_table,
    reach,
    sample_live,
    simulate_rounds,
    spread_exact,
    spread_mc,
)
from adaptgap.graph import GeneratorSpec, ProbabilityRule, generate
from adaptgap.utils import CapExceededError

from .conftest import TEST_SEED, directed, small_graphs


def test_sample_live_extremes():
    rng = np.random.default_rng(TEST_SEED)
    certain = directed(3, (0, 1, 1.0), (1, 2, 1.0))
    assert sample_live(certain, rng) == LiveEdgeGraph(0b11, 1.0)
    dead = directed(3, (0, 1, 0.0), (1, 2, 0.0))
    assert sample_live(dead, rng) == LiveEdgeGraph(0, 1.0)


def test_sample_live_frequency():
    graph = directed(2, (0, 1, 0.5))
    rng = np.random.default_rng(TEST_SEED)
    draws = 10_000
    live = sum(sample_live(graph, rng).is_live(0) for _ in range(draws))
    assert abs(live / draws - 0.5) <= 4 * math.sqrt(0.25 / draws)


def test_enumerate_live_weights():
    graph = directed(3, (0, 1, 0.5), (1, 2, 0.5))
    outcomes = enumerate_live(graph)
    assert [g.live_mask for g in outcomes] == [0, 1, 2, 3]
    assert [g.weight for g in outcomes] == pytest.approx([0.25] * 4)

    single = enumerate_live(directed(2, (0, 1, 0.3)))
    assert [g.weight for g in single] == pytest.approx([0.7, 0.3])
    assert single[1].live_edges == (0,)

    mixed = enumerate_live(directed(3, (0, 1, 0.2), (1, 2, 0.7), (2, 0, 0.45)))
    assert len(mixed) == 8
    assert math.fsum(g.weight for g in mixed) == pytest.approx(1.0, abs=1e-9)


def test_reach():
    graph = directed(4, (0, 1, 0.5), (1, 2, 0.5), (3, 0, 0.5))
    everything = LiveEdgeGraph(0b111, 0.125)
    assert reach(graph, {0}, everything) == {0, 1, 2}
    assert reach(graph, {3}, everything) == {0, 1, 2, 3}
    assert reach(graph, {0}, LiveEdgeGraph(0b010, 0.125)) == {0}
    assert reach(graph, (), everything) == frozenset()


def test_spread_exact_examples(path4, two_node):
    assert spread_exact(two_node, {0}) == pytest.approx(1.5)
    assert spread_exact(two_node, {1}) == pytest.approx(1.0)
    assert spread_exact(two_node, ()) == 0.0
    assert [spread_exact(path4, {v}) for v in range(4)] == pytest.approx([1.875, 1.75, 1.5, 1.0])
    assert spread_exact(path4, {0, 2}) == pytest.approx(3.0)


def test_spread_exact_rejects_unknown_seed(two_node):
    with pytest.raises(ValueError):
        spread_exact(two_node, {2})


def test_edge_cap():
    graph = generate(GeneratorSpec("clique", (4,)))
    with pytest.raises(CapExceededError, match="max-edges"):
        spread_exact(graph, {0}, max_edges=11)
    assert spread_exact(graph, {0}) >= 1.0


def test_table_matches_bfs():
    graph = generate(GeneratorSpec("random_digraph", (5, 8), ProbabilityRule(0.4)), seed=11)
    table = live_edge_table(graph)
    for row in range(len(table)):
        live = table.live_graph(row)
        for v in graph.nodes:
            expected = sum(1 << u for u in reach(graph, {v}, live))
            assert int(table.phi[row, v]) == expected


def test_simulate_rounds_layers():
    graph = directed(3, (0, 1, 1.0), (1, 2, 1.0))
    trace = simulate_rounds(graph, {0}, np.random.default_rng(TEST_SEED))
    assert trace.layers == (frozenset({0}), frozenset({1}), frozenset({2}))

    graph = directed(3, (0, 1, 0.0), (1, 2, 0.0))
    trace = simulate_rounds(graph, {0, 2}, np.random.default_rng(TEST_SEED))
    assert trace.layers == (frozenset({0, 2}),)


def test_simulate_rounds_matches_live_edge_reach():
    graph = generate(GeneratorSpec("random_digraph", (6, 10), ProbabilityRule(0.5)), seed=4)
    rng = np.random.default_rng(TEST_SEED)
    for _ in range(50):
        trace = simulate_rounds(graph, {0, 3}, rng)
        assert trace.reached == reach(graph, {0, 3}, trace.live)
        assert all(not (a & b) for a, b in combinations(trace.layers, 2))


def test_simulate_rounds_needs_seeds(two_node):
    with pytest.raises(ValueError):
        simulate_rounds(two_node, (), np.random.default_rng(0))


def test_spread_mc_deterministic_graph():
    graph = generate(GeneratorSpec("out_arborescence", (5,), ProbabilityRule(1.0)), seed=2)
    estimate = spread_mc(graph, {0}, samples=100)
    assert estimate.mean == 5.0
    assert estimate.stderr == 0.0
    assert spread_mc(graph, (), samples=10).mean == 0.0


def test_spread_mc_close_to_exact():
    graph = generate(GeneratorSpec("random_digraph", (5, 8), ProbabilityRule(0.5)), seed=9)
    exact = spread_exact(graph, {0, 1})
    estimate = spread_mc(graph, {0, 1}, samples=100_000, seed=TEST_SEED)
    assert abs(estimate.mean - exact) <= 4 * estimate.stderr + 1e-12


def test_spread_mc_independent_of_workers(path4):
    one = spread_mc(path4, {0}, samples=5000, seed=7, workers=1)
    four = spread_mc(path4, {0}, samples=5000, seed=7, workers=4)
    assert one == four


def test_spread_mc_rejects_zero_samples(two_node):
    with pytest.raises(ValueError):
        spread_mc(two_node, {0}, samples=0)


@settings(max_examples=40, deadline=None)
@given(small_graphs())
def test_spread_is_monotone_and_submodular(graph):
    table = live_edge_table(graph)
    nodes = list(graph.nodes)
    sigma = {}
    for size in range(len(nodes) + 1):
        for subset in combinations(nodes, size):
            sigma[frozenset(subset)] = table.spread(subset)

    for subset, value in sigma.items():
        assert len(subset) - 1e-9 <= value <= graph.n + 1e-9
        for v in nodes:
            if v in subset:
                continue
            gain = sigma[subset | {v}] - value
            assert gain >= -1e-9
            for u in nodes:
                if u in subset or u == v:
                    continue
                assert sigma[subset | {u, v}] - sigma[subset | {u}] <= gain + 1e-9


@pytest.mark.slow
def test_spread_mc_agrees_on_random_instances():
    for i in range(50):
        n = 3 + i % 4
        m = min(2 + i % 7, n * (n - 1))
        spec = GeneratorSpec("random_digraph", (n, m), ProbabilityRule(None, 0.1, 0.9))
        graph = generate(spec, seed=TEST_SEED + i)
        exact = spread_exact(graph, {0})
        estimate = spread_mc(graph, {0}, samples=100_000, seed=TEST_SEED + i, workers=4)
        assert abs(estimate.mean - exact) <= 4 * estimate.stderr + 1e-12, spec
