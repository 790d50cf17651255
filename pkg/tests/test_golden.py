"""Regression tests for the exact oracles against hand-checked golden values."""

import pytest

from adaptgap.gaps import solve_instance

from .conftest import fixture_graph


def test_golden_oracles(golden):
    """Optimal values, sets, marginals and the first policy level match the golden file."""
    graph = fixture_graph(golden["graph"])
    oracles = solve_instance(graph, golden["k"])

    assert oracles.tree.value == pytest.approx(golden["opt_a"], rel=1e-9)
    assert list(oracles.nonadaptive.values) == pytest.approx(golden["opt_n"], rel=1e-9)
    assert [sorted(s) for s in oracles.nonadaptive.sets] == golden["optimal_sets"]
    assert oracles.tree.value / oracles.nonadaptive.value == pytest.approx(golden["ratio"])
    assert list(oracles.marginals.x) == pytest.approx(golden["marginals"], abs=1e-9)

    root = oracles.tree.root
    assert root.seed == golden["root_seed"]
    actual = [(sorted(b.observed), b.child.seed) for b in root.branches]
    expected = [(b["observed"], b["seed"]) for b in golden["root_branches"]]
    assert actual == expected, (
        f"Policy mismatch for {golden['graph']}:\n  Expected: {expected}\n  Actual:   {actual}"
    )
    assert [b.prob for b in root.branches] == pytest.approx(
        [b["prob"] for b in golden["root_branches"]]
    )
