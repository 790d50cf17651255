"""Serialized artifacts: gap and lemma reports, policy tree JSON, experiment config."""

import csv
import io
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, computed_field

from .diffusion import DEFAULT_MAX_EDGES
from .policies import DEFAULT_MAX_SUBSETS, PolicyNode
from .utils import EPS

OutputFormat = Literal["json", "csv"]


class ExperimentConfig(BaseModel):
    """Effective configuration of a CLI run, embedded in its output."""

    command: str
    master_seed: int = 0
    max_edges: int = Field(default=DEFAULT_MAX_EDGES, gt=0)
    max_subsets: int = Field(default=DEFAULT_MAX_SUBSETS, gt=0)
    format: OutputFormat = "json"
    suite: str | None = None
    filter: str | None = None
    self_test: bool = False
    # Output must not depend on the worker count.
    workers: int = Field(default=1, gt=0, exclude=True)


class BoundCheck(BaseModel):
    """Measured ratio against one closed-form bound (a floor when `lower` is set)."""

    name: str
    bound: float
    passed: bool
    slack: float
    lower: bool = False

    def describe(self, ratio: float) -> str:
        op = "<" if self.lower else ">"
        return f"bound {self.name} (ratio {ratio:.6f} {op} {self.bound:.6f})"


class GapReport(BaseModel):
    instance_id: str
    source: str = ""
    graph_class: str
    n: int
    m: int
    k: int
    opt_a: float
    opt_n: float
    ratio: float
    optimal_seeds: list[int] = Field(default_factory=list)
    checks: list[BoundCheck] = Field(default_factory=list)

    @computed_field
    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def save(self, path: Path) -> None:
        path.write_text(self.model_dump_json(indent=2))

    @classmethod
    def load(cls, path: Path) -> "GapReport":
        return cls.model_validate_json(path.read_text())


class LemmaCheck(BaseModel):
    """One inequality family checked exhaustively on one instance.

    worst_slack is the minimum of (larger side - smaller side) / n over all checked
    cases, or None when no case applied.
    """

    lemma: str
    instances: int
    worst_slack: float | None = None

    @computed_field
    @property
    def passed(self) -> bool:
        return self.worst_slack is None or self.worst_slack >= -EPS


class InstanceReport(BaseModel):
    gap: GapReport
    lemmas: list[LemmaCheck] = Field(default_factory=list)

    @computed_field
    @property
    def passed(self) -> bool:
        return self.gap.passed and all(lemma.passed for lemma in self.lemmas)

    def failures(self) -> list[str]:
        out = [
            f"{self.gap.instance_id}: {c.describe(self.gap.ratio)}"
            for c in self.gap.checks
            if not c.passed
        ]
        out += [
            f"{self.gap.instance_id}: {lemma.lemma} (worst slack {lemma.worst_slack:.3e})"
            for lemma in self.lemmas
            if not lemma.passed
        ]
        return out


class SuiteReport(BaseModel):
    config: ExperimentConfig
    instances: list[InstanceReport] = Field(default_factory=list)

    @computed_field
    @property
    def failures(self) -> list[str]:
        return [f for report in self.instances for f in report.failures()]

    @computed_field
    @property
    def passed(self) -> bool:
        return not self.failures

    def save(self, path: Path) -> None:
        path.write_text(self.model_dump_json(indent=2))

    @classmethod
    def load(cls, path: Path) -> "SuiteReport":
        return cls.model_validate_json(path.read_text())


# Policy trees


class BranchModel(BaseModel):
    observed: list[int]
    prob: float
    child: "PolicyNodeModel"


class PolicyNodeModel(BaseModel):
    """Nested {seed, value, branches: [{observed, prob, child}]}; leaves have seed null."""

    seed: int | None
    value: float
    branches: list[BranchModel] = Field(default_factory=list)

    @classmethod
    def from_node(cls, node: PolicyNode) -> "PolicyNodeModel":
        return cls(
            seed=node.seed,
            value=node.value,
            branches=[
                BranchModel(observed=sorted(b.observed), prob=b.prob, child=cls.from_node(b.child))
                for b in node.branches
            ],
        )


BranchModel.model_rebuild()


class SpreadReport(BaseModel):
    graph: str
    seeds: list[int]
    method: Literal["exact", "mc"]
    mean: float
    stderr: float | None = None
    samples: int | None = None
    config: ExperimentConfig


class OptimumReport(BaseModel):
    graph: str
    n: int
    m: int
    k: int
    opt_n: list[float]
    optimal_sets: list[list[int]]
    opt_a: float
    marginals: list[float]
    policy: PolicyNodeModel
    config: ExperimentConfig


class GapRun(BaseModel):
    config: ExperimentConfig
    report: GapReport


class SweepRow(BaseModel):
    """One tabulated bound value; columns a sweep does not use stay None."""

    alpha: int | None = None
    k: int
    bound: float
    limit: float | None = None
    prior_work: float | None = None
    closed_form: float | None = None
    below_closed_form: bool | None = None


class SweepReport(BaseModel):
    bound: str
    config: ExperimentConfig
    rows: list[SweepRow] = Field(default_factory=list)

    def csv_rows(self) -> list[dict]:
        return [row.model_dump(exclude_none=True) for row in self.rows]


# CSV projection

CSV_COLUMNS = ["instance", "class", "k", "kind", "check", "bound", "value", "slack", "passed"]


def check_rows(report: InstanceReport) -> list[dict]:
    gap = report.gap
    base = {"instance": gap.instance_id, "class": gap.graph_class, "k": gap.k}
    rows = [
        base
        | {
            "kind": "bound",
            "check": c.name,
            "bound": c.bound,
            "value": gap.ratio,
            "slack": c.slack,
            "passed": c.passed,
        }
        for c in gap.checks
    ]
    rows += [
        base
        | {
            "kind": "lemma",
            "check": lemma.lemma,
            "bound": "",
            "value": lemma.instances,
            "slack": "" if lemma.worst_slack is None else lemma.worst_slack,
            "passed": lemma.passed,
        }
        for lemma in report.lemmas
    ]
    return rows


def to_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
