"""Shipped example networks for LIDAR false negatives.

``initial_network`` is the expert structure: weather drives road condition
and illumination, those drive object reflection, and reflection, truncation
and occlusion drive FN. ``refined_network`` adds traffic density as a cause
of both FN and occlusion. The probabilities are illustrative values used as
generator ground truth; they are not estimates from any recorded dataset.

Both are also available as model files, see :func:`model_path`.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .bn import BnModel, BnStructure, Cbt, NodeSpec, load_model, model_from_probabilities

WEATHER = NodeSpec("Weather", ("clear", "rain", "fog"))
ROAD = NodeSpec("RoadCondition", ("dry", "wet"))
ILLUMINATION = NodeSpec("Illumination", ("day", "night"))
REFLECTION = NodeSpec("Reflection", ("high", "low"))
TRUNCATION = NodeSpec("Truncation", ("No", "Yes"))
OCCLUSION = NodeSpec("Occlusion", ("FullyVisible", "PartlyOccluded", "LargelyOccluded"))
FN = NodeSpec("FN", ("No", "Yes"))
TRAFFIC_DENSITY = NodeSpec("TrafficDensity", ("low", "medium", "high", "very_high"))

INITIAL_EDGES = (
    ("Weather", "RoadCondition"),
    ("Weather", "Illumination"),
    ("RoadCondition", "Reflection"),
    ("Illumination", "Reflection"),
    ("Reflection", "FN"),
    ("Truncation", "FN"),
    ("Occlusion", "FN"),
)

SCENE_LEVEL = frozenset({"Weather", "RoadCondition", "Illumination"})
REFINED_SCENE_LEVEL = SCENE_LEVEL | {"TrafficDensity"}

_OCCLUSION_BASE = {"FullyVisible": 0.03, "PartlyOccluded": 0.08, "LargelyOccluded": 0.25}
_TRAFFIC_FN = {"low": 0.0, "medium": 0.02, "high": 0.06, "very_high": 0.12}


def initial_structure() -> BnStructure:
    return BnStructure([WEATHER, ROAD, ILLUMINATION, REFLECTION, TRUNCATION, OCCLUSION, FN],
                       INITIAL_EDGES)


def refined_structure() -> BnStructure:
    return BnStructure(
        [*initial_structure().nodes, TRAFFIC_DENSITY],
        [*INITIAL_EDGES, ("TrafficDensity", "FN"), ("TrafficDensity", "Occlusion")],
    )


def _fn_yes(occlusion: str, reflection: str, truncation: str, traffic: str = "low") -> float:
    p = _OCCLUSION_BASE[occlusion] + (0.10 if truncation == "Yes" else 0.0)
    if reflection == "low":
        p *= 1.5
    return round(p + _TRAFFIC_FN[traffic], 6)


def _shared_tables() -> dict:
    return {
        "Weather": {(): [0.7, 0.2, 0.1]},
        "RoadCondition": {("clear",): [0.95, 0.05], ("rain",): [0.1, 0.9], ("fog",): [0.6, 0.4]},
        "Illumination": {("clear",): [0.75, 0.25], ("rain",): [0.65, 0.35], ("fog",): [0.6, 0.4]},
        # parents sorted: Illumination, RoadCondition
        "Reflection": {
            ("day", "dry"): [0.8, 0.2], ("night", "dry"): [0.7, 0.3],
            ("day", "wet"): [0.5, 0.5], ("night", "wet"): [0.3, 0.7],
        },
        "Truncation": {(): [0.9, 0.1]},
    }


def initial_network() -> BnModel:
    tables = _shared_tables()
    tables["Occlusion"] = {(): [0.6, 0.3, 0.1]}
    # parents sorted: Occlusion, Reflection, Truncation
    tables["FN"] = {
        (o, r, t): {"Yes": _fn_yes(o, r, t), "No": 1 - _fn_yes(o, r, t)}
        for o in OCCLUSION.states for r in REFLECTION.states for t in TRUNCATION.states
    }
    return model_from_probabilities(initial_structure(), tables)


def refined_network() -> BnModel:
    tables = _shared_tables()
    tables["TrafficDensity"] = {(): [0.4, 0.3, 0.2, 0.1]}
    tables["Occlusion"] = {
        ("low",): [0.75, 0.2, 0.05],
        ("medium",): [0.6, 0.3, 0.1],
        ("high",): [0.45, 0.38, 0.17],
        ("very_high",): [0.3, 0.45, 0.25],
    }
    # parents sorted: Occlusion, Reflection, TrafficDensity, Truncation
    tables["FN"] = {
        (o, r, d, t): {"Yes": _fn_yes(o, r, t, d), "No": 1 - _fn_yes(o, r, t, d)}
        for o in OCCLUSION.states for r in REFLECTION.states
        for d in TRAFFIC_DENSITY.states for t in TRUNCATION.states
    }
    return model_from_probabilities(refined_structure(), tables)


def with_trigger(model: BnModel, trigger: NodeSpec, prior, effects) -> BnModel:
    """``model`` plus a root node ``trigger`` feeding the children in ``effects``.

    ``effects[child][state]`` is the child's distribution when the trigger is
    in ``state``, whatever the child's other parents are; ``None`` keeps the
    child's original row for that state. Nodes outside ``effects`` keep
    their CBTs unchanged.
    """
    structure = model.structure
    nodes = [*structure.nodes, trigger]
    edges = [*structure.edges, *((trigger.name, c) for c in effects)]
    grown = BnStructure(nodes, edges)
    cbts = {name: model.cbt(name) for name in structure.names}
    cbts[trigger.name] = Cbt(trigger, (), np.asarray([prior], dtype=float))
    for child, by_state in effects.items():
        old = model.cbt(child)
        spec = grown.node(child)
        parents = [grown.node(p) for p in grown.sorted_parents(child)]
        shape = tuple(p.cardinality for p in parents)
        probs = np.empty((int(np.prod(shape)), spec.cardinality))
        for row, idx in enumerate(np.ndindex(*shape)):
            config = {p.name: p.states[i] for p, i in zip(parents, idx)}
            dist = by_state.get(config.pop(trigger.name))
            if dist is None:
                probs[row] = old.distribution(config)
            elif isinstance(dist, dict):
                probs[row] = [dist[s] for s in spec.states]
            else:
                probs[row] = dist
        cbts[child] = Cbt(spec, parents, probs)
    return BnModel(grown, cbts)


MODEL_FILES = {"initial": "fig2_initial.model", "refined": "fig7_refined.model"}


def model_path(which: str) -> Path:
    """Path of a shipped model file: ``"initial"`` or ``"refined"``."""
    return Path(str(resources.files("trigcond") / "data" / MODEL_FILES[which]))


def load_shipped(which: str) -> BnModel:
    return load_model(model_path(which))
