"""Shared utilities: errors, tolerances, node-set bitmasks, seeding, output."""

import os
import sys
from collections.abc import Iterable
from pathlib import Path

import numpy as np

REL_TOL = 1e-9
EPS = 1e-7
MAX_BITMASK_NODES = 62


class AdaptGapError(Exception):
    """Base class for all library errors."""

    pass


class GraphFormatError(AdaptGapError):
    """Raised when a graph file or edge list is malformed."""

    pass


class InfeasibleSpecError(AdaptGapError):
    """Raised when a generator spec cannot be realized."""

    pass


class CapExceededError(AdaptGapError):
    """Raised when an exact computation would exceed a configured size cap."""

    pass


class InconsistentRealizationError(AdaptGapError):
    """Raised when a partial realization has no positive-probability live-edge graph."""

    pass


class PolicyError(AdaptGapError):
    """Raised on policy contract violations and malformed policy trees."""

    pass


def close(a: float, b: float, rel_tol: float = REL_TOL) -> bool:
    """Equality with relative tolerance (absolute floor of rel_tol near zero)."""
    return abs(a - b) <= rel_tol * max(1.0, abs(a), abs(b))


def strictly_greater(a: float, b: float, rel_tol: float = REL_TOL) -> bool:
    """True if a beats b by more than the tie tolerance."""
    return a > b and not close(a, b, rel_tol)


def to_bits(nodes: Iterable[int]) -> int:
    """Encode a node set as an integer bitmask."""
    bits = 0
    for v in nodes:
        bits |= 1 << v
    return bits


def from_bits(bits: int) -> frozenset[int]:
    """Decode an integer bitmask into a node set."""
    nodes = []
    v = 0
    while bits:
        if bits & 1:
            nodes.append(v)
        bits >>= 1
        v += 1
    return frozenset(nodes)


def substream(master_seed: int, *keys: int) -> np.random.Generator:
    """Derive an independent RNG stream from (master seed, stream id...).

    Counter-based: the stream for a given key never depends on how many other
    streams exist, so partitioning work across workers never reorders randomness.
    """
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(keys)))


def get_default_workers() -> int:
    """Get default worker count for instance-parallel commands."""
    return min(os.cpu_count() or 4, 8)


def write_output(text: str, out: Path | None) -> None:
    """Write an artifact to a file, or to stdout when no path is given."""
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text if text.endswith("\n") else text + "\n")


def log_stderr(msg: str) -> None:
    """Log sink for CLI progress lines (keeps stdout for artifacts)."""
    print(msg, file=sys.stderr)
