"""Pytest configuration: suite selection, shared graphs and golden regression files."""

import json
import os
from pathlib import Path

import pytest
from hypothesis import strategies as st

from adaptgap.graph import Edge, InfluenceGraph, load_graph

TEST_SUITE = os.environ.get("ADAPTGAP_TEST_SUITE", "quick")  # quick or full
TEST_SEED = int(os.environ.get("ADAPTGAP_TEST_SEED", 0))

FIXTURES_DIR = Path(__file__).parent.parent / "fixtures"
PROBS = (0.0, 0.3, 0.5, 0.8, 1.0)


def pytest_configure(config):
    """Register custom markers."""
    config.addinivalue_line("markers", "slow: acceptance-size suite (ADAPTGAP_TEST_SUITE=full)")


def pytest_collection_modifyitems(config, items):
    if TEST_SUITE == "full":
        return
    skip = pytest.mark.skip(reason="set ADAPTGAP_TEST_SUITE=full to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def fixture_graph(name: str) -> InfluenceGraph:
    return load_graph(FIXTURES_DIR / name)


@pytest.fixture
def path4():
    """Directed path 0->1->2->3 with p = 0.5 (the gap witness)."""
    return fixture_graph("directed_path4_p05.txt")


@pytest.fixture
def two_node():
    """Single edge 0->1 with p = 0.5."""
    return fixture_graph("two_node_p05.txt")


def directed(n: int, *edges: tuple[int, int, float]) -> InfluenceGraph:
    return InfluenceGraph(n, tuple(Edge(u, v, p) for u, v, p in edges))


@st.composite
def small_graphs(draw, max_nodes: int = 5, max_edges: int = 8) -> InfluenceGraph:
    """Random directed graphs small enough for every exhaustive oracle."""
    n = draw(st.integers(min_value=1, max_value=max_nodes))
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    chosen = []
    if pairs:
        chosen = draw(
            st.lists(st.sampled_from(pairs), unique=True, max_size=min(max_edges, len(pairs)))
        )
    probs = draw(st.lists(st.sampled_from(PROBS), min_size=len(chosen), max_size=len(chosen)))
    return InfluenceGraph(
        n, tuple(Edge(u, v, p) for (u, v), p in zip(chosen, probs, strict=True))
    )


def load_golden_files():
    """Load all golden files from tests/golden/."""
    golden_dir = Path(__file__).parent / "golden"
    if not golden_dir.exists():
        return []

    golden_files = []
    for f in sorted(golden_dir.glob("*.json")):
        try:
            data = json.loads(f.read_text())
            data["_file"] = f.name
            golden_files.append(data)
        except json.JSONDecodeError as e:
            print(f"Warning: Failed to parse {f}: {e}")
    return golden_files


def pytest_generate_tests(metafunc):
    """Parametrize tests with golden files."""
    if "golden" in metafunc.fixturenames:
        golden_files = load_golden_files()
        ids = [g.get("_file", f"golden_{i}") for i, g in enumerate(golden_files)]
        metafunc.parametrize("golden", golden_files, ids=ids)
