"""Seeded synthetic scenes drawn from a ground-truth network.

Scene-level nodes (weather, traffic density, ...) are drawn once per scene
and shared by all its objects; instance-level nodes are drawn per object.
Sampling is ancestral, in topological order. Each object gets a position in
the sensor range box. The FN label is realised physically: an object with
``FN=Yes`` has its detection suppressed, any other object gets a detection
at its position plus Gaussian jitter, so FN derivation has to recover the
label from geometry. Hidden nodes are sampled but left out of the emitted
columns; :func:`truth_sidecar` writes their values as an annotation file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import yaml

from .annotations import sidecar_document
from .bn import BnModel, load_model
from .dataset import (
    DETECTION,
    FN_NODE,
    FN_STATES,
    GROUND_TRUTH,
    Dataset,
    MatchConfig,
    RawObjectRecord,
    build_dataset,
    from_labeled,
    ingest,
)
from .errors import InvalidConfig


@dataclass(frozen=True)
class GeneratorConfig:
    truth_model: BnModel
    scenes: int = 100
    instances_per_scene: tuple[int, int] = (20, 20)
    scene_level_nodes: frozenset[str] = frozenset()
    instance_level_nodes: frozenset[str] | None = None
    hidden_nodes: frozenset[str] = frozenset()
    fn_node: str = FN_NODE
    fn_emission: bool = True
    noise_std: float = 0.3
    x_limit: float = 140.0
    y_limit: float = 50.0
    seed: int = 0
    scene_prefix: str = "scene"

    def __post_init__(self):
        names = set(self.truth_model.structure.names)
        scene = frozenset(self.scene_level_nodes)
        inst = names - scene if self.instance_level_nodes is None else frozenset(self.instance_level_nodes)
        object.__setattr__(self, "scene_level_nodes", scene)
        object.__setattr__(self, "instance_level_nodes", frozenset(inst))
        object.__setattr__(self, "hidden_nodes", frozenset(self.hidden_nodes))
        lo, hi = self.instances_per_scene
        object.__setattr__(self, "instances_per_scene", (int(lo), int(hi)))

        if scene & inst:
            raise InvalidConfig(f"nodes both scene- and instance-level: {sorted(scene & inst)}")
        if scene | inst != names:
            raise InvalidConfig(f"nodes without a level: {sorted(names - scene - inst)}")
        if not self.hidden_nodes <= names:
            raise InvalidConfig(f"hidden nodes not in the model: {sorted(self.hidden_nodes - names)}")
        if self.scenes <= 0 or not 0 < lo <= hi:
            raise InvalidConfig("scene and instance counts must be positive")
        if self.noise_std < 0:
            raise InvalidConfig("noise_std must be non-negative")
        structure = self.truth_model.structure
        for name in scene:
            low = [p for p in structure.parents(name) if p not in scene]
            if low:
                raise InvalidConfig(f"scene-level node {name!r} has instance-level parents {low}")
        if self.fn_emission:
            if self.fn_node not in inst:
                raise InvalidConfig(f"{self.fn_node!r} must be an instance-level node")
            if structure.node(self.fn_node).states != FN_STATES:
                raise InvalidConfig(f"{self.fn_node!r} must have states {FN_STATES}")
            if self.fn_node in self.hidden_nodes:
                raise InvalidConfig(f"{self.fn_node!r} cannot be hidden")
        for name in structure.names:
            if np.isnan(self.truth_model.cbt(name).probs).any():
                raise InvalidConfig(f"truth CBT of {name!r} has undefined rows")

    @property
    def visible_nodes(self) -> list[str]:
        skip = set(self.hidden_nodes)
        if self.fn_emission:
            skip.add(self.fn_node)
        return [n for n in self.truth_model.structure.names if n not in skip]


@dataclass(frozen=True)
class SyntheticSample:
    """Everything drawn for one configuration.

    ``codes[name]`` holds state indices per object (objects ordered by scene);
    ``sizes[i]`` is the number of objects of scene ``scene_ids[i]``.
    """

    scene_ids: tuple[str, ...]
    sizes: np.ndarray
    codes: Mapping[str, np.ndarray]
    xy: np.ndarray
    records: tuple[RawObjectRecord, ...] = field(repr=False)


def _draw(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """One categorical draw per row of ``probs`` by inverse CDF."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(len(probs))
    idx = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def sample(cfg: GeneratorConfig) -> SyntheticSample:
    rng = np.random.default_rng(cfg.seed)
    model = cfg.truth_model
    structure = model.structure
    lo, hi = cfg.instances_per_scene
    sizes = rng.integers(lo, hi + 1, size=cfg.scenes)
    n = int(sizes.sum())
    owner = np.repeat(np.arange(cfg.scenes), sizes)

    codes: dict[str, np.ndarray] = {}
    scene_codes: dict[str, np.ndarray] = {}
    for name in structure.topological_order():
        cbt = model.cbt(name)
        parents = cbt.parent_names
        if name in cfg.scene_level_nodes:
            src = scene_codes
            count = cfg.scenes
        else:
            src = {p: (scene_codes[p][owner] if p in scene_codes else codes[p]) for p in parents}
            count = n
        if parents:
            rows = np.ravel_multi_index(tuple(src[p] for p in parents), cbt.shape)
        else:
            rows = np.zeros(count, dtype=np.int64)
        drawn = _draw(rng, cbt.probs[rows])
        if name in cfg.scene_level_nodes:
            scene_codes[name] = drawn
        else:
            codes[name] = drawn
    for name, vals in scene_codes.items():
        codes[name] = vals[owner]

    xy = np.column_stack([
        rng.uniform(-cfg.x_limit, cfg.x_limit, n),
        rng.uniform(-cfg.y_limit, cfg.y_limit, n),
    ])
    jitter = rng.normal(0.0, cfg.noise_std, size=(n, 2)) if cfg.noise_std > 0 else np.zeros((n, 2))

    scene_ids = tuple(f"{cfg.scene_prefix}{i:05d}" for i in range(cfg.scenes))
    visible = cfg.visible_nodes
    states = {name: structure.node(name).states for name in structure.names}
    fn_yes = FN_STATES.index("Yes")
    records = []
    start = 0
    for sid, size in zip(scene_ids, sizes):
        stop = start + int(size)
        dets = []
        for m in range(start, stop):
            attrs = {name: states[name][codes[name][m]] for name in visible}
            records.append(RawObjectRecord(sid, GROUND_TRUTH, float(xy[m, 0]), float(xy[m, 1]), attrs))
            if cfg.fn_emission and codes[cfg.fn_node][m] != fn_yes:
                dets.append(RawObjectRecord(sid, DETECTION, float(xy[m, 0] + jitter[m, 0]),
                                            float(xy[m, 1] + jitter[m, 1])))
        records.extend(dets)
        start = stop
    return SyntheticSample(scene_ids, sizes, codes, xy, tuple(records))


def generate(cfg: GeneratorConfig) -> list[RawObjectRecord]:
    """Raw object records (ground truth first, then detections, per scene)."""
    return list(sample(cfg).records)


def sidecar(cfg: GeneratorConfig, drawn: SyntheticSample | None = None) -> dict:
    """Annotation document holding the true values of the hidden nodes."""
    drawn = drawn or sample(cfg)
    structure = cfg.truth_model.structure
    hidden = [n for n in structure.names if n in cfg.hidden_nodes]
    scene_states: dict[str, dict[str, str]] = {}
    instance_states: dict[str, dict[str, list[str]]] = {}
    start = 0
    for sid, size in zip(drawn.scene_ids, drawn.sizes):
        stop = start + int(size)
        for name in hidden:
            labels = structure.node(name).states
            if name in cfg.scene_level_nodes:
                scene_states.setdefault(sid, {})[name] = labels[drawn.codes[name][start]]
            else:
                instance_states.setdefault(sid, {})[name] = [
                    labels[c] for c in drawn.codes[name][start:stop]
                ]
        start = stop
    nodes = [(name, structure.node(name).states) for name in hidden]
    return sidecar_document(nodes, scene_states, instance_states)


def truth_sidecar(cfg: GeneratorConfig, path, drawn: SyntheticSample | None = None) -> dict:
    """Write :func:`sidecar` as YAML to ``path`` and return the document."""
    doc = sidecar(cfg, drawn)
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))
    return doc


def to_dataset(cfg: GeneratorConfig, match: MatchConfig | None = None,
               drawn: SyntheticSample | None = None) -> Dataset:
    """Generated records pushed through ingestion and FN derivation."""
    drawn = drawn or sample(cfg)
    gt, det = ingest(drawn.records, cfg.truth_model.structure)
    if not cfg.fn_emission:
        return from_labeled(gt)
    match = match or MatchConfig(x_limit=cfg.x_limit, y_limit=cfg.y_limit)
    return build_dataset(gt, det, match, cfg.fn_node)


def load_generator_config(path, **overrides) -> GeneratorConfig:
    """Read a YAML generator configuration.

    ``truth_model`` is a model file path, resolved against the config's
    directory when relative.
    """
    path = Path(path)
    doc = yaml.safe_load(path.read_text()) or {}
    doc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        model_path = Path(doc.pop("truth_model"))
    except KeyError:
        raise InvalidConfig(f"{path}: 'truth_model' is required") from None
    if not model_path.is_absolute():
        model_path = path.parent / model_path
    for key in ("scene_level_nodes", "instance_level_nodes", "hidden_nodes"):
        if doc.get(key) is not None:
            doc[key] = frozenset(doc[key])
    if "instances_per_scene" in doc:
        ips = doc["instances_per_scene"]
        doc["instances_per_scene"] = (ips, ips) if isinstance(ips, int) else tuple(ips)
    try:
        return GeneratorConfig(truth_model=load_model(model_path), **doc)
    except TypeError as exc:
        raise InvalidConfig(f"{path}: {exc}") from None
