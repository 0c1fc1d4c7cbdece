"""Empirical p-value testing of test scenes against a learned network.

For a target node, every instance realises a conditional belief likelihood
(CBL): the learned theta of its own state given its parents' states. A test
CBL is ranked against the CBLs of all training instances for the same node,
which yields an interval of p-values when ties are present::

    p_min = M_lower / (M_train + 1)
    p_max = (M_lower + M_equal + 1) / (M_train + 1)

The fractional significance of an interval at level ``alpha`` is 0 when
``p_min > alpha``, 1 when ``p_max < alpha`` and the linear interpolation
``(alpha - p_min) / (p_max - p_min)`` otherwise. A scene S is relevant when
the sum of its significances exceeds ``alpha`` times the number of
(instance, target node) assignments it contains.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bn import BnModel
from .dataset import Dataset
from .errors import ConfigError, EmptyTrainCorpus, MalformedReport
from .learning import cbl_values

REPORT_FORMAT = "trigcond-run-report/1"


@dataclass(frozen=True)
class CblAssignment:
    scene_id: str
    instance: int
    node: str
    cbl: float


@dataclass(frozen=True)
class PValueRange:
    p_min: float
    p_max: float

    def __post_init__(self):
        if not 0.0 <= self.p_min < self.p_max <= 1.0:
            raise ValueError(f"invalid p-value range [{self.p_min}, {self.p_max}]")


@dataclass(frozen=True)
class AnalysisConfig:
    alpha: float = 0.05
    target_nodes: tuple[str, ...] = ("FN",)

    def __post_init__(self):
        if isinstance(self.target_nodes, str):
            object.__setattr__(self, "target_nodes", (self.target_nodes,))
        object.__setattr__(self, "target_nodes", tuple(self.target_nodes))
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie strictly between 0 and 1")
        if not self.target_nodes:
            raise ConfigError("at least one target node is required")
        if len(set(self.target_nodes)) != len(self.target_nodes):
            raise ConfigError("duplicate target nodes")


@dataclass(frozen=True)
class InstanceDetail:
    instance: int
    node: str
    cbl: float
    p_min: float
    p_max: float
    n_alpha: float


@dataclass(frozen=True)
class SceneReport:
    scene_id: str
    n_total: int
    n_significant: float
    relevant: bool
    details: tuple[InstanceDetail, ...] = ()

    @property
    def ratio(self) -> float:
        return self.n_significant / self.n_total if self.n_total else 0.0


@dataclass(frozen=True)
class RunReport:
    scenes: tuple[SceneReport, ...]
    alpha: float
    target_nodes: tuple[str, ...]
    model_fingerprint: str = ""
    seed: int | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def rss(self) -> int:
        return sum(1 for s in self.scenes if s.relevant)

    @property
    def rss_fraction(self) -> float:
        return self.rss / len(self.scenes) if self.scenes else 0.0

    def relevant_scene_ids(self) -> list[str]:
        return [s.scene_id for s in self.scenes if s.relevant]


# -- elementary operations ---------------------------------------------------

def assign_cbls(model: BnModel, data: Dataset, targets: Iterable[str]) -> list[CblAssignment]:
    """One CBL per (instance, target node), instance-major order."""
    targets = list(targets)
    nodes = _required_nodes(model, targets)
    enc = data.encode(nodes)
    values = {t: cbl_values(model, t, enc) for t in targets}
    out = []
    m = 0
    for scene in data.scenes:
        for i in range(len(scene)):
            for t in targets:
                out.append(CblAssignment(scene.scene_id, i, t, float(values[t][m])))
            m += 1
    return out


def _required_nodes(model: BnModel, targets: Sequence[str]):
    names: dict[str, None] = {}
    for t in targets:
        model.structure.node(t)
        names.update(dict.fromkeys(model.structure.sorted_parents(t)))
        names[t] = None
    return tuple(model.structure.node(n) for n in model.structure.names if n in names)


class TrainCorpus:
    """Sorted training CBLs of one node, answering rank queries in O(log M)."""

    def __init__(self, train_cbls):
        values = np.sort(np.asarray(train_cbls, dtype=np.float64).ravel())
        if values.size == 0:
            raise EmptyTrainCorpus("no training CBLs to compare against")
        self.values = values

    def __len__(self):
        return self.values.size

    def ranges(self, test_cbls) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised ``(p_min, p_max)`` for an array of test CBLs."""
        test = np.asarray(test_cbls, dtype=np.float64)
        lower = np.searchsorted(self.values, test, side="left")
        lower_or_equal = np.searchsorted(self.values, test, side="right")
        denom = self.values.size + 1
        return lower / denom, (lower_or_equal + 1) / denom

    def range(self, test_cbl: float) -> PValueRange:
        p_min, p_max = self.ranges([test_cbl])
        return PValueRange(float(p_min[0]), float(p_max[0]))


def pvalue_range(test_cbl: float, train_cbls) -> PValueRange:
    """Empirical p-value range of ``test_cbl`` within the training corpus.

    Raises:
        EmptyTrainCorpus: ``train_cbls`` is empty.
    """
    return TrainCorpus(train_cbls).range(test_cbl)


def significance(p: PValueRange, alpha: float) -> float:
    if p.p_min > alpha:
        return 0.0
    if p.p_max < alpha:
        return 1.0
    return (alpha - p.p_min) / (p.p_max - p.p_min)


def significance_array(p_min: np.ndarray, p_max: np.ndarray, alpha: float) -> np.ndarray:
    """Vectorised :func:`significance` with identical branch boundaries."""
    p_min = np.asarray(p_min, dtype=np.float64)
    p_max = np.asarray(p_max, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        interp = (alpha - p_min) / (p_max - p_min)
    return np.where(p_min > alpha, 0.0, np.where(p_max < alpha, 1.0, interp))


def is_relevant(n_significant: float, n_total: int, alpha: float) -> bool:
    return n_significant > alpha * n_total


# -- scene scoring -----------------------------------------------------------

def score_scenes(model: BnModel, train: Dataset, test: Dataset,
                 cfg: AnalysisConfig = AnalysisConfig(), seed: int | None = None) -> RunReport:
    """Test every scene of ``test`` against the training CBL corpus.

    The corpus for each target node holds the CBLs of all training
    instances under ``model``. Scene sums use exactly rounded summation, so
    the result does not depend on instance or scene order.
    """
    nodes = _required_nodes(model, cfg.target_nodes)
    enc_train = train.encode(nodes)
    enc_test = test.encode(nodes)

    per_node = {}
    for t in cfg.target_nodes:
        corpus = TrainCorpus(cbl_values(model, t, enc_train))
        cbl = cbl_values(model, t, enc_test)
        p_min, p_max = corpus.ranges(cbl)
        per_node[t] = (cbl, p_min, p_max, significance_array(p_min, p_max, cfg.alpha))

    reports = []
    start = 0
    for scene in test.scenes:
        stop = start + len(scene)
        details = []
        for m in range(start, stop):
            for t in cfg.target_nodes:
                cbl, p_min, p_max, n_alpha = per_node[t]
                details.append(InstanceDetail(
                    m - start, t, float(cbl[m]), float(p_min[m]), float(p_max[m]), float(n_alpha[m])
                ))
        n_total = len(details)
        n_sig = math.fsum(d.n_alpha for d in details)
        reports.append(SceneReport(scene.scene_id, n_total, n_sig,
                                   is_relevant(n_sig, n_total, cfg.alpha), tuple(details)))
        start = stop

    return RunReport(tuple(reports), cfg.alpha, cfg.target_nodes, model.fingerprint(), seed)


# -- serialisation -----------------------------------------------------------

def report_to_dict(report: RunReport, details: bool = True) -> dict:
    scenes = []
    for s in report.scenes:
        rec = {
            "scene_id": s.scene_id,
            "n_total": s.n_total,
            "n_significant": s.n_significant,
            "relevant": s.relevant,
        }
        if details:
            rec["details"] = [
                [d.instance, d.node, d.cbl, d.p_min, d.p_max, d.n_alpha] for d in s.details
            ]
        scenes.append(rec)
    doc = {
        "format": REPORT_FORMAT,
        "alpha": report.alpha,
        "target_nodes": list(report.target_nodes),
        "model_fingerprint": report.model_fingerprint,
        "seed": report.seed,
        "rss": report.rss,
        "n_scenes": len(report.scenes),
        "rss_fraction": report.rss_fraction,
        "scenes": scenes,
    }
    if report.extra:
        doc["extra"] = report.extra
    return doc


def report_from_dict(doc) -> RunReport:
    try:
        if doc.get("format") != REPORT_FORMAT:
            raise MalformedReport(f"expected format {REPORT_FORMAT!r}")
        scenes = []
        for s in doc["scenes"]:
            details = tuple(
                InstanceDetail(int(i), str(n), float(c), float(lo), float(hi), float(a))
                for i, n, c, lo, hi, a in s.get("details", [])
            )
            scenes.append(SceneReport(str(s["scene_id"]), int(s["n_total"]),
                                      float(s["n_significant"]), bool(s["relevant"]), details))
        report = RunReport(tuple(scenes), float(doc["alpha"]), tuple(doc["target_nodes"]),
                           str(doc.get("model_fingerprint", "")), doc.get("seed"),
                           dict(doc.get("extra") or {}))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise MalformedReport(f"malformed run report: {exc}") from None
    if "rss" in doc and doc["rss"] != report.rss:
        raise MalformedReport("stored rss disagrees with the scene flags")
    return report


def dumps_report(report: RunReport, details: bool = True) -> str:
    return json.dumps(report_to_dict(report, details), indent=1) + "\n"


def save_report(report: RunReport, path, details: bool = True) -> None:
    Path(path).write_text(dumps_report(report, details))


def load_report(path) -> RunReport:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedReport(f"{path}: {exc}") from None
    return report_from_dict(doc)


def summary_table(report: RunReport) -> str:
    """Per-scene table, rarest scenes (highest N_alpha / N) first."""
    rows = sorted(report.scenes, key=lambda s: (-s.ratio, s.scene_id))
    width = max([len("scene"), *(len(s.scene_id) for s in rows)])
    lines = [f"{'scene':<{width}}  {'N':>5}  {'N_alpha':>9}  relevant"]
    for s in rows:
        lines.append(f"{s.scene_id:<{width}}  {s.n_total:>5}  {s.n_significant:>9.4f}  "
                     f"{'yes' if s.relevant else 'no'}")
    lines.append(f"RSS = {report.rss} of {len(report.scenes)} scenes "
                 f"({100 * report.rss_fraction:.2f}%) at alpha = {report.alpha}, "
                 f"targets = {', '.join(report.target_nodes)}")
    return "\n".join(lines)
