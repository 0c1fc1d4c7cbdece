"""Object records, scene grouping, FN derivation and train/test splitting.

Raw input is one row per object, either a ground-truth label or a detector
output. Ground-truth objects become analysis instances; each one receives an
``FN`` label according to whether some detection lies close enough to it.
Closeness is the mean squared error over the x and y coordinates,
``((x_g - x_d)**2 + (y_g - y_d)**2) / 2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bn import BnStructure, NodeSpec
from .errors import (
    ConfigError,
    EmptyDataset,
    MalformedRow,
    MissingAttribute,
    UnknownStateLabel,
)

GROUND_TRUTH = "GroundTruth"
DETECTION = "Detection"
_SOURCE_ALIASES = {
    "groundtruth": GROUND_TRUTH,
    "gt": GROUND_TRUTH,
    "detection": DETECTION,
    "det": DETECTION,
}
REQUIRED_COLUMNS = ("scene_id", "source", "x", "y")

FN_NODE = "FN"
FN_STATES = ("No", "Yes")


@dataclass(frozen=True)
class RawObjectRecord:
    scene_id: str
    source: str
    x: float
    y: float
    attributes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in (GROUND_TRUTH, DETECTION):
            raise ValueError(f"unknown source {self.source!r}")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("coordinates must be finite")


@dataclass(frozen=True)
class ObjectInstance:
    scene_id: str
    attributes: Mapping[str, str]


@dataclass(frozen=True)
class SceneRecord:
    scene_id: str
    instances: tuple[ObjectInstance, ...]

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        if not self.instances:
            raise ValueError(f"scene {self.scene_id!r} has no instances")
        if any(inst.scene_id != self.scene_id for inst in self.instances):
            raise ValueError(f"scene {self.scene_id!r} contains foreign instances")

    def __len__(self):
        return len(self.instances)


@dataclass(frozen=True)
class EncodedData:
    """Integer view of a dataset over a fixed node list.

    ``codes[name][m]`` is the state index of node ``name`` in instance ``m``;
    ``scene_index[m]`` is the position of that instance's scene.
    """

    scene_ids: tuple[str, ...]
    scene_index: np.ndarray
    codes: Mapping[str, np.ndarray]

    @property
    def n_instances(self) -> int:
        return len(self.scene_index)


@dataclass(frozen=True)
class Dataset:
    """Scenes of fully labelled instances.

    ``fp_count`` carries the number of unmatched detections seen while
    deriving FN labels; it is informational only.
    """

    scenes: tuple[SceneRecord, ...] = ()
    fp_count: int = 0
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "scenes", tuple(self.scenes))
        ids = [s.scene_id for s in self.scenes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate scene ids in dataset")

    @property
    def M(self) -> int:
        return sum(len(s) for s in self.scenes)

    @property
    def scene_ids(self) -> tuple[str, ...]:
        return tuple(s.scene_id for s in self.scenes)

    def __len__(self):
        return len(self.scenes)

    def scene(self, scene_id: str) -> SceneRecord:
        for s in self.scenes:
            if s.scene_id == scene_id:
                return s
        raise KeyError(scene_id)

    def instances(self) -> Iterable[ObjectInstance]:
        for s in self.scenes:
            yield from s.instances

    def subset(self, scene_ids: Iterable[str]) -> "Dataset":
        by_id = {s.scene_id: s for s in self.scenes}
        return Dataset(tuple(by_id[i] for i in scene_ids))

    def attribute_names(self) -> list[str]:
        names: dict[str, None] = {}
        for inst in self.instances():
            names.update(dict.fromkeys(inst.attributes))
        return list(names)

    def encode(self, nodes: Sequence[NodeSpec]) -> EncodedData:
        """Map every instance onto state indices of ``nodes``.

        Raises:
            MissingAttribute: an instance lacks one of the nodes.
            UnknownStateLabel: a value is not a declared state.
        """
        key = tuple(nodes)
        if key in self._cache:
            return self._cache[key]
        n = self.M
        scene_index = np.empty(n, dtype=np.int64)
        columns = {node.name: np.empty(n, dtype=np.int64) for node in nodes}
        lookup = {node.name: {s: i for i, s in enumerate(node.states)} for node in nodes}
        m = 0
        for si, scene in enumerate(self.scenes):
            for inst in scene.instances:
                scene_index[m] = si
                attrs = inst.attributes
                for name, table in lookup.items():
                    try:
                        value = attrs[name]
                    except KeyError:
                        raise MissingAttribute(
                            f"instance {m} of scene {scene.scene_id!r} has no {name!r}"
                        ) from None
                    try:
                        columns[name][m] = table[value]
                    except KeyError:
                        raise UnknownStateLabel(
                            f"{value!r} is not a state of {name!r} (scene {scene.scene_id!r})"
                        ) from None
                m += 1
        for arr in columns.values():
            arr.setflags(write=False)
        scene_index.setflags(write=False)
        enc = EncodedData(self.scene_ids, scene_index, columns)
        self._cache[key] = enc
        return enc


@dataclass(frozen=True)
class MatchConfig:
    """Correspondence settings for FN derivation.

    ``cost_threshold`` is in square metres and bounds the per-pair MSE; the
    default of 2.0 corresponds to a centre distance of 2 m.
    """

    cost_threshold: float = 2.0
    x_limit: float = 140.0
    y_limit: float = 50.0

    def __post_init__(self):
        for name in ("cost_threshold", "x_limit", "y_limit"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"MatchConfig.{name} must be positive")


# -- ingestion ---------------------------------------------------------------

def _parse_row(index: int, row: Mapping[str, str]) -> RawObjectRecord:
    for col in REQUIRED_COLUMNS:
        if row.get(col) in (None, ""):
            raise MalformedRow(index, f"missing {col!r}")
    source = _SOURCE_ALIASES.get(str(row["source"]).strip().lower())
    if source is None:
        raise MalformedRow(index, f"unknown source {row['source']!r}")
    try:
        x = float(row["x"])
        y = float(row["y"])
    except (TypeError, ValueError):
        raise MalformedRow(index, "x and y must be numeric") from None
    if not (math.isfinite(x) and math.isfinite(y)):
        raise MalformedRow(index, "x and y must be finite")
    attrs = {
        k: str(v) for k, v in row.items()
        if k not in REQUIRED_COLUMNS and k is not None and v not in (None, "")
    }
    return RawObjectRecord(str(row["scene_id"]), source, x, y, attrs)


def ingest(records: Iterable[RawObjectRecord | Mapping[str, str]],
           structure: BnStructure | None = None):
    """Partition records by source and group them by scene.

    ``records`` may hold :class:`RawObjectRecord` values or raw table rows
    (mappings of column name to text). When ``structure`` is given, every
    attribute that names one of its nodes must carry a legal state.

    Returns:
        ``(ground_truth, detections)``: two dicts of scene id to record list,
        in order of first appearance.

    Raises:
        MalformedRow: a row cannot be parsed (carries the row index).
        UnknownStateLabel: an attribute value is not a state of its node.
    """
    gt: dict[str, list[RawObjectRecord]] = {}
    det: dict[str, list[RawObjectRecord]] = {}
    for index, rec in enumerate(records):
        if not isinstance(rec, RawObjectRecord):
            rec = _parse_row(index, rec)
        if structure is not None:
            for name, value in rec.attributes.items():
                if name in structure and value not in structure.node(name).states:
                    raise UnknownStateLabel(
                        f"row {index}: {value!r} is not a state of {name!r}"
                    )
        target = gt if rec.source == GROUND_TRUTH else det
        target.setdefault(rec.scene_id, []).append(rec)
    return gt, det


def read_records(path) -> list[dict[str, str]]:
    """Read the raw object table (CSV with a header row) into row dicts."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise MalformedRow(0, f"header lacks columns {missing}")
        return list(reader)


def write_records(records: Iterable[RawObjectRecord], path, attribute_columns: Sequence[str] | None = None) -> None:
    records = list(records)
    if attribute_columns is None:
        cols: dict[str, None] = {}
        for r in records:
            cols.update(dict.fromkeys(r.attributes))
        attribute_columns = list(cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*REQUIRED_COLUMNS, *attribute_columns])
        for r in records:
            w.writerow([r.scene_id, r.source, repr(r.x), repr(r.y),
                        *(r.attributes.get(c, "") for c in attribute_columns)])


# -- FN derivation -----------------------------------------------------------

def in_range(x: float, y: float, cfg: MatchConfig) -> bool:
    return abs(x) < cfg.x_limit and abs(y) < cfg.y_limit


def mse_cost(gt_xy: np.ndarray, det_xy: np.ndarray) -> np.ndarray:
    """Pairwise MSE over (x, y): shape ``(len(gt_xy), len(det_xy))``."""
    gt_xy = np.asarray(gt_xy, dtype=np.float64).reshape(-1, 2)
    det_xy = np.asarray(det_xy, dtype=np.float64).reshape(-1, 2)
    diff = gt_xy[:, None, :] - det_xy[None, :, :]
    return (diff ** 2).sum(axis=2) / 2.0


def greedy_match(gt_xy, det_xy, cost_threshold: float) -> list[tuple[int, int]]:
    """One-to-one matching by ascending cost among pairs under the threshold.

    Equal costs are broken by (ground-truth index, detection index).
    """
    cost = mse_cost(gt_xy, det_xy)
    gi, di = np.nonzero(cost < cost_threshold)
    order = np.lexsort((di, gi, cost[gi, di]))
    used_g, used_d = set(), set()
    pairs = []
    for k in order:
        g, d = int(gi[k]), int(di[k])
        if g in used_g or d in used_d:
            continue
        used_g.add(g)
        used_d.add(d)
        pairs.append((g, d))
    return pairs


def derive_fn(gt: Sequence[RawObjectRecord], det: Sequence[RawObjectRecord],
              cfg: MatchConfig = MatchConfig(), fn_node: str = FN_NODE) -> list[ObjectInstance]:
    """Label every in-range ground-truth object of one scene with FN.

    Objects outside the ``x_limit``/``y_limit`` box are dropped on both
    sides before matching. A ground-truth object without a matched detection
    gets ``FN=Yes``, otherwise ``FN=No``.
    """
    return _derive_scene(gt, det, cfg, fn_node)[0]


def _derive_scene(gt, det, cfg, fn_node):
    scene_ids = {r.scene_id for r in gt} | {r.scene_id for r in det}
    if len(scene_ids) > 1:
        raise ValueError(f"records from several scenes: {sorted(scene_ids)}")
    gt = [r for r in gt if in_range(r.x, r.y, cfg)]
    det = [r for r in det if in_range(r.x, r.y, cfg)]
    pairs = greedy_match([(r.x, r.y) for r in gt], [(r.x, r.y) for r in det], cfg.cost_threshold)
    matched = {g for g, _ in pairs}
    out = []
    for i, r in enumerate(gt):
        attrs = dict(r.attributes)
        attrs[fn_node] = FN_STATES[0] if i in matched else FN_STATES[1]
        out.append(ObjectInstance(r.scene_id, attrs))
    return out, len(det) - len(pairs)


def build_dataset(gt: Mapping[str, Sequence[RawObjectRecord]],
                  det: Mapping[str, Sequence[RawObjectRecord]],
                  cfg: MatchConfig = MatchConfig(), fn_node: str = FN_NODE) -> Dataset:
    """Run :func:`derive_fn` on every scene; scenes left empty are dropped."""
    scenes = []
    fp = 0
    for scene_id in dict.fromkeys([*gt, *det]):
        instances, n_fp = _derive_scene(gt.get(scene_id, []), det.get(scene_id, []), cfg, fn_node)
        fp += n_fp
        if instances:
            scenes.append(SceneRecord(scene_id, instances))
    return Dataset(tuple(scenes), fp_count=fp)


def from_labeled(gt: Mapping[str, Sequence[RawObjectRecord]]) -> Dataset:
    """Dataset from ground-truth records that already carry every label."""
    return Dataset(tuple(
        SceneRecord(sid, [ObjectInstance(sid, dict(r.attributes)) for r in recs])
        for sid, recs in gt.items() if recs
    ))


# -- splitting ---------------------------------------------------------------

def n_train_scenes(n_scenes: int, train_fraction: float) -> int:
    # rounding goes toward train; the epsilon absorbs products like 0.7 * 10
    return min(n_scenes, math.ceil(train_fraction * n_scenes - 1e-9))


def split(data: Dataset, train_fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Random scene-level train/test split.

    Whole scenes go to one side. The number of train scenes is
    ``ceil(train_fraction * n_scenes)``. Within each side scenes keep their
    original order.
    """
    if not 0 < train_fraction < 1:
        raise ConfigError("train_fraction must lie strictly between 0 and 1")
    if len(data) == 0:
        raise EmptyDataset("cannot split a dataset without scenes")
    perm = np.random.default_rng(seed).permutation(len(data))
    k = n_train_scenes(len(data), train_fraction)
    train_idx = np.sort(perm[:k])
    test_idx = np.sort(perm[k:])
    return (Dataset(tuple(data.scenes[i] for i in train_idx)),
            Dataset(tuple(data.scenes[i] for i in test_idx)))


# -- instance tables ---------------------------------------------------------

def write_instances(data: Dataset, path, columns: Sequence[str] | None = None) -> None:
    """Write a labelled dataset as CSV: ``scene_id`` then one column per attribute."""
    columns = list(columns) if columns is not None else data.attribute_names()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scene_id", *columns])
        for inst in data.instances():
            w.writerow([inst.scene_id, *(inst.attributes.get(c, "") for c in columns)])


def read_instances(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if "scene_id" not in (reader.fieldnames or []):
            raise MalformedRow(0, "header lacks 'scene_id'")
        groups: dict[str, list[ObjectInstance]] = {}
        for index, row in enumerate(reader):
            sid = row.pop("scene_id")
            if not sid:
                raise MalformedRow(index, "missing 'scene_id'")
            attrs = {k: v for k, v in row.items() if k is not None and v != ""}
            groups.setdefault(sid, []).append(ObjectInstance(sid, attrs))
    return Dataset(tuple(SceneRecord(sid, insts) for sid, insts in groups.items()))


def with_attribute(data: Dataset, name: str, values: Mapping[str, Sequence[str]]) -> Dataset:
    """Copy of ``data`` where every instance gains ``name``.

    ``values[scene_id][i]`` is the value for instance ``i`` of that scene.
    """
    scenes = []
    for scene in data.scenes:
        vals = values[scene.scene_id]
        scenes.append(SceneRecord(scene.scene_id, [
            ObjectInstance(inst.scene_id, {**inst.attributes, name: v})
            for inst, v in zip(scene.instances, vals, strict=True)
        ]))
    return Dataset(tuple(scenes), fp_count=data.fp_count)

