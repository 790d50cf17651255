"""Tests for the policy executor, optimal oracles, greedy policies and marginals."""

import math
from dataclasses import FrozenInstanceError, dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptgap.diffusion import LiveEdgeGraph, live_edge_table, spread_exact
from adaptgap.graph import GeneratorSpec, InfluenceGraph, ProbabilityRule, generate
from adaptgap.policies import (
    Branch,
    FixedSetPolicy,
    MarginalVector,
    PolicyNode,
    PolicyTree,
    SeedSelector,
    TreePolicy,
    greedy_adaptive,
    greedy_nonadaptive,
    hybrid_value,
    marginals,
    marginals_from_runs,
    opt_adaptive,
    opt_nonadaptive,
    policy_value_exact,
    run_policy,
)
from adaptgap.realization import PartialRealization
from adaptgap.utils import CapExceededError, PolicyError

from .conftest import TEST_SEED, directed, small_graphs

GREEDY_FACTOR = 1 - 1 / math.e


def deterministic_graph(seed: int = 0) -> InfluenceGraph:
    return generate(GeneratorSpec("random_digraph", (5, 6), ProbabilityRule(1.0)), seed=seed)


@dataclass
class RepeatingPolicy:
    budget: int = 2

    def next(self, psi):
        return 0


@dataclass
class GreedyBudgetPolicy:
    """Ignores its own budget and keeps seeding."""

    budget: int = 1

    def next(self, psi):
        return len(psi)


# Executor


def test_run_policy_empty_and_fixed():
    graph = directed(3, (0, 1, 0.5), (1, 2, 0.5))
    dead = LiveEdgeGraph(0, 0.25)
    assert run_policy(graph, FixedSetPolicy(()), dead) == PartialRealization()
    psi = run_policy(graph, FixedSetPolicy((1, 0)), dead)
    assert psi.entries == ((0, frozenset({0})), (1, frozenset({1})))


def test_run_policy_observes_full_cascade():
    graph = directed(2, (1, 0, 1.0))
    psi = run_policy(graph, greedy_adaptive(graph, 1), LiveEdgeGraph(1, 1.0))
    assert psi.entries == ((1, frozenset({0, 1})),)


def test_run_policy_rejects_misbehaving_policies(two_node):
    live = LiveEdgeGraph(0, 0.5)
    with pytest.raises(PolicyError, match="twice"):
        run_policy(two_node, RepeatingPolicy(), live)
    with pytest.raises(PolicyError, match="budget"):
        run_policy(two_node, GreedyBudgetPolicy(), live)


def test_policy_value_exact(path4):
    assert policy_value_exact(InfluenceGraph(1, ()), FixedSetPolicy((0,))) == 1.0
    assert policy_value_exact(path4, FixedSetPolicy((0, 2))) == pytest.approx(3.0)
    assert policy_value_exact(path4, TreePolicy(opt_adaptive(path4, 2))) == pytest.approx(3.25)


def test_policy_value_matches_brute_force():
    graph = generate(GeneratorSpec("random_digraph", (5, 7), ProbabilityRule(0.5)), seed=3)
    policy = greedy_adaptive(graph, 2)
    table = live_edge_table(graph)
    brute = math.fsum(
        table.weights[row] * run_policy(graph, policy, table.live_graph(row)).value
        for row in range(len(table))
    )
    assert policy_value_exact(graph, policy) == pytest.approx(brute)


# Non-adaptive oracles


def test_opt_nonadaptive_path(path4):
    optimum = opt_nonadaptive(path4, 2)
    assert optimum.seeds == {0, 2}
    assert optimum.values == pytest.approx((0.0, 1.875, 3.0))
    assert optimum.sets[1] == {0}


def test_opt_nonadaptive_prefers_the_source():
    graph = directed(4, (2, 3, 0.9))
    optimum = opt_nonadaptive(graph, 1)
    assert optimum.seeds == {2}
    assert optimum.value == pytest.approx(1.9)


def test_opt_nonadaptive_full_budget(path4):
    optimum = opt_nonadaptive(path4, 4)
    assert optimum.seeds == {0, 1, 2, 3}
    assert optimum.value == pytest.approx(4.0)


def test_opt_nonadaptive_caps(path4):
    with pytest.raises(CapExceededError, match="max-subsets"):
        opt_nonadaptive(path4, 2, max_subsets=5)
    with pytest.raises(PolicyError):
        opt_nonadaptive(path4, 5)


def test_greedy_nonadaptive_examples():
    isolated = directed(3, (0, 1, 0.0), (1, 2, 0.0))
    assert greedy_nonadaptive(isolated).increments == (1.0, 1.0, 1.0)

    star = directed(4, (0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0))
    trace = greedy_nonadaptive(star)
    assert trace.seeds[0] == 0
    assert trace.increments == pytest.approx((4.0, 0.0, 0.0, 0.0))
    assert trace.spreads[-1] == pytest.approx(4.0)


def test_greedy_nonadaptive_candidates(path4):
    trace = greedy_nonadaptive(path4, 1, candidates=[2, 3])
    assert trace.seeds == (2,)
    with pytest.raises(PolicyError):
        greedy_nonadaptive(path4, 3, candidates=[2, 3])


@pytest.mark.parametrize("bad", [-1, 4])
def test_greedy_nonadaptive_rejects_unknown_candidates(path4, bad):
    with pytest.raises(ValueError, match="outside 0..3"):
        greedy_nonadaptive(path4, 1, candidates=[bad])


@settings(max_examples=40, deadline=None)
@given(small_graphs())
def test_greedy_increments_never_grow(graph):
    increments = greedy_nonadaptive(graph).increments
    assert all(b <= a + 1e-9 for a, b in zip(increments, increments[1:]))


# Adaptive oracles


def test_opt_adaptive_path(path4):
    tree = opt_adaptive(path4, 2)
    assert tree.value == pytest.approx(3.25)
    assert tree.root.seed == 0
    for _, _, node in tree.walk():
        if not node.is_leaf:
            assert sum(b.prob for b in node.branches) == pytest.approx(1.0)
            assert node.value == pytest.approx(sum(b.prob * b.child.value for b in node.branches))


def test_opt_adaptive_single_node():
    assert opt_adaptive(InfluenceGraph(1, ()), 1).value == 1.0


def test_adaptivity_gives_nothing_without_randomness():
    graph = deterministic_graph()
    for k in range(1, graph.n + 1):
        assert opt_adaptive(graph, k).value == pytest.approx(opt_nonadaptive(graph, k).value)


def test_walk_tracks_path_probabilities(path4):
    tree = opt_adaptive(path4, 2)
    leaves = [(psi, prob) for psi, prob, node in tree.walk() if node.is_leaf]
    assert sum(prob for _, prob in leaves) == pytest.approx(1.0)
    assert all(len(psi) == 2 for psi, _ in leaves)


@settings(max_examples=15, deadline=None)
@given(small_graphs(max_nodes=4, max_edges=6), st.data())
def test_oracle_ordering(graph, data):
    k = data.draw(st.integers(1, graph.n))
    opt_a = opt_adaptive(graph, k).value
    opt_n = opt_nonadaptive(graph, k).value
    greedy = policy_value_exact(graph, greedy_adaptive(graph, k))
    assert opt_n <= opt_a + 1e-9
    assert opt_a <= graph.n + 1e-9
    assert greedy <= opt_a + 1e-9
    assert greedy >= GREEDY_FACTOR * opt_a - 1e-9
    values = opt_nonadaptive(graph, k).values
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))
    if k > 1:
        assert opt_adaptive(graph, k - 1).value <= opt_a + 1e-9


# Greedy adaptive


def test_greedy_adaptive_first_pick(path4):
    policy = greedy_adaptive(path4, 1)
    assert policy.next(PartialRealization()) == 0
    assert policy.next(PartialRealization(((0, frozenset({0})),))) is None


def test_greedy_adaptive_matches_greedy_without_randomness():
    graph = deterministic_graph(seed=5)
    everything = LiveEdgeGraph((1 << graph.m) - 1, 1.0)
    psi = run_policy(graph, greedy_adaptive(graph, 3), everything)
    assert tuple(s for s, _ in psi.entries) == greedy_nonadaptive(graph, 3).seeds


def test_greedy_adaptive_mc(path4):
    policy = greedy_adaptive(path4, 2, mode="mc", samples=4000, seed=TEST_SEED)
    assert policy.next(PartialRealization()) == 0
    again = greedy_adaptive(path4, 2, mode="mc", samples=4000, seed=TEST_SEED)
    psi = PartialRealization(((0, frozenset({0})),))
    assert np.array_equal(policy.gains(psi), again.gains(psi))
    assert policy.next(psi) == again.next(psi)


def test_greedy_adaptive_policy_is_immutable(path4):
    policy = greedy_adaptive(path4, 3)
    with pytest.raises(FrozenInstanceError):
        policy.budget = 4
    forward = PartialRealization(((0, frozenset({0})), (2, frozenset({2, 3}))))
    backward = PartialRealization(((2, frozenset({2, 3})), (0, frozenset({0}))))
    assert policy.next(forward) == policy.next(backward) == 1


def test_greedy_adaptive_rejects_unknown_mode(path4):
    with pytest.raises(ValueError):
        greedy_adaptive(path4, 1, mode="sampled")


# Marginals and the hybrid policy


def test_marginals_path(path4):
    x = marginals(path4, opt_adaptive(path4, 2))
    assert x.x == pytest.approx((1.0, 0.625, 0.25, 0.125))
    assert x.total == pytest.approx(2.0)


def test_marginals_without_randomness_are_indicators():
    graph = deterministic_graph()
    x = marginals(graph, opt_adaptive(graph, 3))
    assert sorted(x.x) == pytest.approx([0.0, 0.0, 1.0, 1.0, 1.0])

    disconnected = InfluenceGraph(2, ())
    assert marginals(disconnected, opt_adaptive(disconnected, 2)).x == (1.0, 1.0)


def test_marginals_from_runs_match_tree():
    graph = generate(GeneratorSpec("random_digraph", (5, 7), ProbabilityRule(0.5)), seed=12)
    tree = opt_adaptive(graph, 2)
    traversal = np.asarray(marginals(graph, tree).x)
    runs = np.asarray(marginals_from_runs(graph, TreePolicy(tree)).x)
    assert np.allclose(traversal, runs, atol=1e-9)


def test_malformed_tree_is_rejected(two_node):
    half = PolicyNode(0, 1.0, (Branch(frozenset({0}), 0.5, PolicyNode(None, 1.0)),))
    with pytest.raises(PolicyError):
        marginals(two_node, PolicyTree(half, 1, 2))

    leaf = PolicyNode(None, 1.0)
    again = PolicyNode(0, 1.0, (Branch(frozenset({0}), 1.0, leaf),))
    repeat = PolicyNode(0, 1.0, (Branch(frozenset({0}), 1.0, again),))
    with pytest.raises(PolicyError):
        marginals(two_node, PolicyTree(repeat, 2, 2))


def test_hybrid_value_concentrated(path4):
    on_two = MarginalVector((0.0, 0.0, 2.0, 0.0))
    assert hybrid_value(path4, 2, 1, on_two) == pytest.approx(spread_exact(path4, {2}))
    # The drawn node is already in the optimal 1-set {0}.
    on_zero = MarginalVector((2.0, 0.0, 0.0, 0.0))
    assert hybrid_value(path4, 2, 2, on_zero) == pytest.approx(1.875)


def test_hybrid_value_never_beats_optimum(path4):
    optimum = opt_nonadaptive(path4, 2)
    x = marginals(path4, opt_adaptive(path4, 2))
    for t in (1, 2):
        assert hybrid_value(path4, 2, t, x, optimum) <= optimum.values[t] + 1e-9


def test_hybrid_value_validation(path4):
    x = MarginalVector((1.0, 0.5, 0.25, 0.25))
    with pytest.raises(ValueError):
        hybrid_value(path4, 2, 3, x)
    with pytest.raises(PolicyError):
        hybrid_value(path4, 2, 1, MarginalVector((1.0, 0.0, 0.0, 0.0)))


def test_seed_selector(path4):
    x = marginals(path4, opt_adaptive(path4, 2))
    selector = SeedSelector.from_marginals(x, 2)
    assert sum(selector.probs) == pytest.approx(1.0)
    assert selector.probs == pytest.approx((0.5, 0.3125, 0.125, 0.0625))
    rng = np.random.default_rng(TEST_SEED)
    assert all(0 <= selector.sample(rng) < 4 for _ in range(20))
