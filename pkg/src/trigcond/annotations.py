"""Expert annotation files.

Flagged scenes are exported as an editable YAML document. An analyst fills in
a verdict per scene and, when a triggering condition is identified, declares
the new node and its state per scene (or per instance). Importing the
document adds the node as a new attribute column.

Layout::

    nodes:                       # declared new nodes
      - name: TrafficDensity
        states: [low, medium, high, very_high]
        default: low             # optional; used for unannotated scenes
    scenes:
      - scene_id: scene00017
        verdict: ''              # random_occurrence | triggering_condition
        proposed_node: ''
        states: {}               # per-scene values, e.g. {TrafficDensity: high}
        instances:
          - index: 0
            summary: {FN: 'Yes', Occlusion: LargelyOccluded, ...}
            states: {}           # per-instance overrides
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml

from .bn import NodeSpec
from .dataset import Dataset, ObjectInstance, SceneRecord
from .errors import ConfigError, IncompleteAnnotation, UnknownScene

VERDICTS = ("random_occurrence", "triggering_condition")


def annotation_template(scene_ids: Iterable[str], data: Dataset | None = None) -> dict:
    """Annotation document with blank expert fields for each scene."""
    known = set(data.scene_ids) if data is not None else None
    records = []
    for sid in scene_ids:
        if known is not None and sid not in known:
            raise UnknownScene(sid)
        rec = {"scene_id": sid, "verdict": "", "proposed_node": "", "states": {}}
        if data is not None:
            rec["instances"] = [
                {"index": i, "summary": dict(inst.attributes), "states": {}}
                for i, inst in enumerate(data.scene(sid).instances)
            ]
        records.append(rec)
    return {"nodes": [], "scenes": records}


def export_annotations(scene_ids: Iterable[str], path, data: Dataset | None = None) -> dict:
    """Write one editable record per scene to ``path`` and return the document."""
    doc = annotation_template(scene_ids, data)
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False, allow_unicode=True))
    return doc


def load_annotations(path) -> dict:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid annotation file ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: annotation file must be a mapping")
    doc.setdefault("nodes", [])
    doc.setdefault("scenes", [])
    return doc


def apply_annotations(doc: Mapping, data: Dataset) -> Dataset:
    """Merge the declared nodes of ``doc`` into every instance of ``data``.

    For each declared node an instance takes, in order of precedence, its
    per-instance value, its scene's value, then the node default.

    Raises:
        UnknownScene: a record names a scene absent from ``data``.
        IncompleteAnnotation: some instance ends up without a value.
        ConfigError: a value is not among the declared states.
    """
    nodes = doc.get("nodes") or []
    records = {}
    known = set(data.scene_ids)
    for rec in doc.get("scenes") or []:
        sid = str(rec["scene_id"])
        if sid not in known:
            raise UnknownScene(sid)
        verdict = rec.get("verdict") or ""
        if verdict and verdict not in VERDICTS:
            raise ConfigError(f"scene {sid!r}: verdict must be one of {VERDICTS}")
        records[sid] = rec
    if not nodes:
        return data

    decls = []
    for node in nodes:
        name = str(node["name"])
        states = NodeSpec(name, node["states"]).states
        default = node.get("default")
        if default is not None and str(default) not in states:
            raise ConfigError(f"default {default!r} is not a state of {name!r}")
        decls.append((name, states, None if default is None else str(default)))

    scenes = []
    for scene in data.scenes:
        rec = records.get(scene.scene_id, {})
        scene_states = rec.get("states") or {}
        per_instance = {int(i["index"]): (i.get("states") or {}) for i in rec.get("instances") or []}
        instances = []
        for idx, inst in enumerate(scene.instances):
            attrs = dict(inst.attributes)
            for name, states, default in decls:
                value = per_instance.get(idx, {}).get(name)
                if value is None:
                    value = scene_states.get(name, default)
                if value is None:
                    raise IncompleteAnnotation(
                        f"scene {scene.scene_id!r} instance {idx} has no value for {name!r}"
                    )
                if isinstance(value, bool):
                    raise ConfigError(f"value for {name!r} must be a string, quote on/off/yes/no")
                value = str(value)
                if value not in states:
                    raise ConfigError(f"{value!r} is not a declared state of {name!r}")
                attrs[name] = value
            instances.append(ObjectInstance(inst.scene_id, attrs))
        scenes.append(SceneRecord(scene.scene_id, instances))
    return Dataset(tuple(scenes), fp_count=data.fp_count)


def import_annotations(path, data: Dataset) -> Dataset:
    """Read an annotation file and merge its nodes into ``data``."""
    return apply_annotations(load_annotations(path), data)


def sidecar_document(nodes: Sequence[tuple[str, Sequence[str]]],
                     scene_states: Mapping[str, Mapping[str, str]],
                     instance_states: Mapping[str, Mapping[str, Sequence[str]]]) -> dict:
    """Fully filled annotation document, as a perfect analyst would write it.

    ``scene_states[scene][node]`` holds scene-level values;
    ``instance_states[scene][node]`` lists per-instance values.
    """
    records = []
    for sid in dict.fromkeys([*scene_states, *instance_states]):
        rec = {"scene_id": sid, "verdict": "triggering_condition", "proposed_node": "",
               "states": dict(scene_states.get(sid, {}))}
        per_inst = instance_states.get(sid, {})
        if per_inst:
            n = len(next(iter(per_inst.values())))
            rec["instances"] = [
                {"index": i, "states": {name: vals[i] for name, vals in per_inst.items()}}
                for i in range(n)
            ]
        records.append(rec)
    return {
        "nodes": [{"name": name, "states": list(states)} for name, states in nodes],
        "scenes": records,
    }
