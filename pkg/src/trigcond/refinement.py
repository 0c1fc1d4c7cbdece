"""Structural refinements and their validation by relevant scene score.

Three edits are supported: a new root node with one edge into an existing
node (direct cause), a new root node with edges into two existing nodes
(confounder), and deletion of a parent edge. A refinement is judged by the
number of relevant test scenes (RSS) at a chosen node before and after the
edit: fewer relevant scenes make the proposition valid, more make it
invalid, and an unchanged count is reported as a tie and treated as invalid.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import yaml

from .bn import BnStructure, NodeSpec
from .dataset import Dataset, split
from .errors import ConfigError, MissingAttribute, NoSuchEdge, UnknownNode
from .hypothesis import AnalysisConfig, score_scenes
from .learning import LearnConfig, learn_cbts

VALIDATION_FORMAT = "trigcond-validation/1"


class RefinementKind(str, Enum):
    ADD_DIRECT_CAUSE = "AddDirectCause"
    ADD_CONFOUNDER = "AddConfounder"
    REMOVE_CAUSE = "RemoveCause"


@dataclass(frozen=True)
class RefinementOp:
    kind: RefinementKind
    targets: tuple[str, ...]
    new_node: NodeSpec | None = None
    removed_parent: str | None = None
    prune: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", RefinementKind(self.kind))
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.kind is RefinementKind.ADD_CONFOUNDER:
            if len(self.targets) != 2 or self.targets[0] == self.targets[1]:
                raise ConfigError("AddConfounder needs two distinct targets")
        elif len(self.targets) != 1:
            raise ConfigError(f"{self.kind.value} needs exactly one target")
        if self.kind is RefinementKind.REMOVE_CAUSE:
            if not self.removed_parent:
                raise ConfigError("RemoveCause needs removed_parent")
        elif self.new_node is None:
            raise ConfigError(f"{self.kind.value} needs new_node")

    @classmethod
    def direct_cause(cls, new_node: NodeSpec, target: str) -> "RefinementOp":
        return cls(RefinementKind.ADD_DIRECT_CAUSE, (target,), new_node)

    @classmethod
    def confounder(cls, new_node: NodeSpec, first: str, second: str) -> "RefinementOp":
        return cls(RefinementKind.ADD_CONFOUNDER, (first, second), new_node)

    @classmethod
    def remove_cause(cls, parent: str, target: str, prune: bool = False) -> "RefinementOp":
        return cls(RefinementKind.REMOVE_CAUSE, (target,), removed_parent=parent, prune=prune)

    def to_dict(self) -> dict:
        doc = {"kind": self.kind.value, "targets": list(self.targets)}
        if self.new_node is not None:
            doc["node"] = self.new_node.name
            doc["states"] = list(self.new_node.states)
        if self.removed_parent is not None:
            doc["removed_parent"] = self.removed_parent
        if self.prune:
            doc["prune"] = True
        return doc

    @classmethod
    def from_dict(cls, doc) -> "RefinementOp":
        try:
            kind = RefinementKind(doc["kind"])
            node = None
            if "node" in doc and kind is not RefinementKind.REMOVE_CAUSE:
                node = NodeSpec(str(doc["node"]), tuple(doc["states"]))
            return cls(kind, tuple(doc["targets"]), node,
                       doc.get("removed_parent"), bool(doc.get("prune", False)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed refinement declaration {doc!r}: {exc}") from None


def load_refinements(path) -> list[RefinementOp]:
    """Read refinement declarations (a YAML list, or a mapping with ``refinements``)."""
    doc = yaml.safe_load(Path(path).read_text())
    if isinstance(doc, dict):
        doc = doc.get("refinements", [])
    if not isinstance(doc, list):
        raise ConfigError(f"{path}: expected a list of refinements")
    return [RefinementOp.from_dict(d) for d in doc]


def apply_refinement(structure: BnStructure, op: RefinementOp) -> BnStructure:
    """Return a new structure with ``op`` applied; ``structure`` is untouched."""
    nodes = list(structure.nodes)
    edges = list(structure.edges)
    for t in op.targets:
        structure.node(t)

    if op.kind is RefinementKind.REMOVE_CAUSE:
        (target,) = op.targets
        structure.node(op.removed_parent)
        if not structure.has_edge(op.removed_parent, target):
            raise NoSuchEdge(f"{op.removed_parent} -> {target}")
        edges.remove((op.removed_parent, target))
        if op.prune and not any(p == op.removed_parent for p, _ in edges) \
                and not any(c == op.removed_parent for _, c in edges):
            nodes = [n for n in nodes if n.name != op.removed_parent]
        return BnStructure(nodes, edges)

    if op.new_node.name in structure:
        raise ConfigError(f"node {op.new_node.name!r} already exists")
    nodes.append(op.new_node)
    edges.extend((op.new_node.name, t) for t in op.targets)
    return BnStructure(nodes, edges)


# -- validation --------------------------------------------------------------

def proposition(rss_initial: float, rss_after: float) -> tuple[str, bool]:
    """Verdict and tie flag for a before/after RSS pair."""
    if rss_initial > rss_after:
        return "valid", False
    if rss_initial < rss_after:
        return "invalid", False
    return "invalid", True


def relative_change(rss_initial: float, rss_after: float) -> float:
    """Percent change of RSS relative to the initial value."""
    if rss_initial == 0:
        return 0.0 if rss_after == 0 else math.inf
    return 100.0 * (rss_after - rss_initial) / rss_initial


@dataclass(frozen=True)
class ValidationReport:
    """Before/after comparison at one node.

    With several splits, ``rss_initial``/``rss_after`` are the medians over
    ``iterations`` and ``relative_rss_change`` is the median per-split change.
    """

    node: str
    rss_initial: float
    rss_after: float
    relative_rss_change: float
    proposition: str
    tie: bool
    iterations: tuple[tuple[int, int], ...] = ()
    seeds: tuple[int, ...] = ()
    n_test_scenes: tuple[int, ...] = ()

    @property
    def valid(self) -> bool:
        return self.proposition == "valid"

    def per_seed_changes(self) -> list[float]:
        return [relative_change(a, b) for a, b in self.iterations]

    def to_dict(self) -> dict:
        return {
            "format": VALIDATION_FORMAT,
            "node": self.node,
            "rss_initial": self.rss_initial,
            "rss_after": self.rss_after,
            "relative_rss_change": _json_float(self.relative_rss_change),
            "proposition": self.proposition,
            "tie": self.tie,
            "iterations": [
                {"seed": s, "rss_initial": a, "rss_after": b, "n_test_scenes": n}
                for s, (a, b), n in zip(self.seeds, self.iterations, self.n_test_scenes)
            ],
        }

    @classmethod
    def from_dict(cls, doc) -> "ValidationReport":
        its = doc.get("iterations", [])
        rel = doc["relative_rss_change"]
        return cls(
            node=doc["node"], rss_initial=doc["rss_initial"], rss_after=doc["rss_after"],
            relative_rss_change=math.inf if rel is None else float(rel),
            proposition=doc["proposition"], tie=bool(doc["tie"]),
            iterations=tuple((int(i["rss_initial"]), int(i["rss_after"])) for i in its),
            seeds=tuple(i["seed"] for i in its),
            n_test_scenes=tuple(int(i["n_test_scenes"]) for i in its),
        )


def _json_float(x: float):
    return None if math.isinf(x) or math.isnan(x) else x


def _check_labels(structure: BnStructure, data: Dataset, what: str):
    names = set(data.attribute_names()) if data.M else set(structure.names)
    missing = [n for n in structure.names if n not in names]
    if missing:
        raise MissingAttribute(f"{what} data has no labels for {missing}")


def _rss(structure, train, test, node, alpha, learn_cfg):
    model = learn_cbts(structure, train, learn_cfg)
    return score_scenes(model, train, test, AnalysisConfig(alpha, (node,))).rss


def validate(before: BnStructure, after: BnStructure, train: Dataset, test: Dataset,
             cfg: AnalysisConfig | None = None, eval_node: str = "FN", *,
             learn_cfg: LearnConfig = LearnConfig(), seed: int | None = None) -> ValidationReport:
    """Learn both structures on ``train`` and compare their RSS on ``test``.

    Only ``cfg.alpha`` is used; the target node is always ``eval_node``.

    Raises:
        MissingAttribute: a node of either structure is unlabelled.
        UnknownNode: ``eval_node`` is missing from a structure.
    """
    alpha = (cfg or AnalysisConfig()).alpha
    for s in (before, after):
        if eval_node not in s:
            raise UnknownNode(eval_node)
        _check_labels(s, train, "training")
        _check_labels(s, test, "test")
    rss0 = _rss(before, train, test, eval_node, alpha, learn_cfg)
    rss1 = _rss(after, train, test, eval_node, alpha, learn_cfg)
    verdict, tie = proposition(rss0, rss1)
    return ValidationReport(eval_node, rss0, rss1, relative_change(rss0, rss1), verdict, tie,
                            ((rss0, rss1),), (seed,) if seed is not None else (None,),
                            (len(test),))


def validate_splits(before: BnStructure, after: BnStructure, data: Dataset,
                    eval_node: str = "FN", seeds: Sequence[int] = tuple(range(10)),
                    train_fraction: float = 0.8, cfg: AnalysisConfig | None = None,
                    learn_cfg: LearnConfig = LearnConfig()) -> ValidationReport:
    """:func:`validate` repeated over one random split per seed.

    The verdict is taken from the median RSS before and after.
    """
    if not seeds:
        raise ConfigError("at least one seed is required")
    runs = []
    for s in seeds:
        train, test = split(data, train_fraction, s)
        runs.append(validate(before, after, train, test, cfg, eval_node, learn_cfg=learn_cfg, seed=s))
    return combine(runs)


def combine(runs: Sequence[ValidationReport]) -> ValidationReport:
    """Merge single-split reports of one node into a multi-split report."""
    nodes = {r.node for r in runs}
    if len(nodes) != 1:
        raise ConfigError(f"cannot combine reports for different nodes {sorted(nodes)}")
    iterations = tuple(it for r in runs for it in r.iterations)
    med0 = statistics.median(a for a, _ in iterations)
    med1 = statistics.median(b for _, b in iterations)
    verdict, tie = proposition(med0, med1)
    return ValidationReport(
        node=nodes.pop(), rss_initial=med0, rss_after=med1,
        relative_rss_change=statistics.median(relative_change(a, b) for a, b in iterations),
        proposition=verdict, tie=tie, iterations=iterations,
        seeds=tuple(s for r in runs for s in r.seeds),
        n_test_scenes=tuple(n for r in runs for n in r.n_test_scenes),
    )


@dataclass(frozen=True)
class ConfounderReport:
    """Direct-cause checks of one new node against a child and one of its parents."""

    new_node: str
    child: ValidationReport
    parent: ValidationReport
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def indicated(self) -> bool:
        return self.child.valid and self.parent.valid

    def to_dict(self) -> dict:
        return {
            "format": VALIDATION_FORMAT,
            "new_node": self.new_node,
            "confounder_indicated": self.indicated,
            "child": self.child.to_dict(),
            "parent": self.parent.to_dict(),
        }


def confounder_workflow(structure: BnStructure, new_node: NodeSpec, child: str, parent: str,
                        train: Dataset, test: Dataset, cfg: AnalysisConfig | None = None, *,
                        learn_cfg: LearnConfig = LearnConfig(),
                        seed: int | None = None) -> ConfounderReport:
    """Validate ``new_node -> child`` at ``child`` and ``new_node -> parent`` at ``parent``.

    A confounder is indicated when both direct-cause refinements are valid.
    """
    if parent not in structure.parents(child):
        raise ConfigError(f"{parent!r} is not a parent of {child!r}")
    at_child = validate(structure, apply_refinement(structure, RefinementOp.direct_cause(new_node, child)),
                        train, test, cfg, child, learn_cfg=learn_cfg, seed=seed)
    at_parent = validate(structure, apply_refinement(structure, RefinementOp.direct_cause(new_node, parent)),
                         train, test, cfg, parent, learn_cfg=learn_cfg, seed=seed)
    return ConfounderReport(new_node.name, at_child, at_parent)


def save_validation(report: ValidationReport | ConfounderReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=1) + "\n")


def load_validation(path) -> ValidationReport:
    return ValidationReport.from_dict(json.loads(Path(path).read_text()))


def rss_distribution(values: Iterable[float]) -> tuple[float, float, float]:
    """(min, median, max) of per-seed RSS values."""
    values = list(values)
    return min(values), statistics.median(values), max(values)
