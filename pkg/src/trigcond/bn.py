"""Discrete Bayesian network: structure, conditional belief tables, lookup.

A network is a DAG over categorical nodes. Every node carries a conditional
belief table (CBT) giving a distribution over its states for each
configuration of its parents. Parent configurations are keyed by parent
names in lexicographic order, so a lookup never depends on the order in
which edges were declared.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    CyclicGraph,
    DuplicateEdge,
    DuplicateNode,
    IncompleteAssignment,
    ParentConfigMismatch,
    UnknownNode,
    UnknownState,
    UnseenConfig,
)

MODEL_FORMAT = "trigcond-model/1"
NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class NodeSpec:
    """A categorical random variable with an ordered, closed state space."""

    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        if any(isinstance(s, bool) for s in self.states):
            # YAML 1.1 reads bare on/off/yes/no as booleans
            raise ConfigError(f"node {self.name!r}: state labels must be strings, quote on/off/yes/no")
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        if not self.name:
            raise ConfigError("node name must be non-empty")
        if len(self.states) < 2:
            raise ConfigError(f"node {self.name!r} needs at least two states")
        if len(set(self.states)) != len(self.states):
            raise ConfigError(f"node {self.name!r} has duplicate state labels")

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def index(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise UnknownState(f"{state!r} is not a state of {self.name!r}") from None


class BnStructure:
    """Validated DAG over :class:`NodeSpec` nodes.

    Instances are treated as immutable. Structural edits (see
    :mod:`trigcond.refinement`) build a new structure.
    """

    def __init__(self, nodes: Sequence[NodeSpec], edges: Iterable[tuple[str, str]] = ()):
        self._nodes: dict[str, NodeSpec] = {}
        for node in nodes:
            if node.name in self._nodes:
                raise DuplicateNode(node.name)
            self._nodes[node.name] = node

        edges = [tuple(e) for e in edges]
        self._parents: dict[str, list[str]] = {name: [] for name in self._nodes}
        self._children: dict[str, list[str]] = {name: [] for name in self._nodes}
        seen = set()
        for parent, child in edges:
            for end in (parent, child):
                if end not in self._nodes:
                    raise UnknownNode(end)
            if parent == child:
                raise CyclicGraph(f"self-loop on {parent!r}")
            if (parent, child) in seen:
                raise DuplicateEdge(f"{parent} -> {child}")
            seen.add((parent, child))
            self._parents[child].append(parent)
            self._children[parent].append(child)
        self._edges = tuple(edges)

        try:
            self._order = tuple(TopologicalSorter(
                {name: self._parents[name] for name in self._nodes}
            ).static_order())
        except CycleError as exc:
            raise CyclicGraph(f"edge set contains a cycle: {exc.args[1]}") from None

    @property
    def nodes(self) -> tuple[NodeSpec, ...]:
        return tuple(self._nodes.values())

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._nodes)

    @property
    def edges(self) -> tuple[tuple[str, str], ...]:
        return self._edges

    def node(self, name: str) -> NodeSpec:
        try:
            return self._nodes[name]
        except KeyError:
            raise UnknownNode(name) from None

    def __contains__(self, name) -> bool:
        return name in self._nodes

    def parents(self, name: str) -> tuple[str, ...]:
        """Parents in edge insertion order."""
        self.node(name)
        return tuple(self._parents[name])

    def sorted_parents(self, name: str) -> tuple[str, ...]:
        """Parents in canonical (lexicographic) order, as used for CBT keys."""
        return tuple(sorted(self.parents(name)))

    def children(self, name: str) -> tuple[str, ...]:
        self.node(name)
        return tuple(self._children[name])

    def topological_order(self) -> tuple[str, ...]:
        return self._order

    def has_edge(self, parent: str, child: str) -> bool:
        return (parent, child) in set(self._edges)

    def __eq__(self, other):
        if not isinstance(other, BnStructure):
            return NotImplemented
        return self.nodes == other.nodes and self._edges == other._edges

    def __hash__(self):
        return hash((self.nodes, self._edges))

    def __repr__(self):
        return f"BnStructure(nodes={list(self.names)}, edges={list(self._edges)})"

    def to_dict(self) -> dict:
        return {
            "nodes": [{"name": n.name, "states": list(n.states)} for n in self.nodes],
            "edges": [list(e) for e in self._edges],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "BnStructure":
        try:
            nodes = [NodeSpec(n["name"], tuple(n["states"])) for n in data["nodes"]]
            edges = [(str(p), str(c)) for p, c in data.get("edges", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed structure: {exc}") from None
        return cls(nodes, edges)


def build_structure(nodes: Sequence[NodeSpec], edges: Iterable[tuple[str, str]]) -> BnStructure:
    """Validate ``nodes`` and ``edges`` into a DAG.

    Raises:
        DuplicateNode, DuplicateEdge, UnknownNode, CyclicGraph
    """
    return BnStructure(nodes, list(edges))


class Cbt:
    """Conditional belief table of one node.

    Rows are indexed by parent configuration. The row index is the C-order
    ravel of the parents' state indices, with parents sorted by name.
    ``counts`` (when present) are the training tallies and are the source of
    truth; ``probs`` is the cached ratio. A row of NaN in ``probs`` marks a
    configuration that was never observed under the strict policy.
    """

    def __init__(
        self,
        child: NodeSpec,
        parents: Sequence[NodeSpec],
        probs: np.ndarray,
        counts: np.ndarray | None = None,
    ):
        self.child = child
        self.parents = tuple(sorted(parents, key=lambda n: n.name))
        if [p.name for p in self.parents] != [p.name for p in parents]:
            raise ConfigError(f"CBT parents of {child.name!r} must be passed sorted by name")
        self.shape = tuple(p.cardinality for p in self.parents)
        n_rows = math.prod(self.shape)

        probs = np.array(probs, dtype=np.float64)
        if probs.shape != (n_rows, child.cardinality):
            raise ConfigError(
                f"CBT for {child.name!r} has shape {probs.shape}, "
                f"expected {(n_rows, child.cardinality)}"
            )
        nan = np.isnan(probs)
        seen = ~nan.any(axis=1)
        if (nan.any(axis=1) & ~nan.all(axis=1)).any():
            raise ConfigError(f"CBT for {child.name!r} has partially missing rows")
        if ((probs[seen] < 0) | (probs[seen] > 1)).any():
            raise ConfigError(f"CBT for {child.name!r} has probabilities outside [0, 1]")
        sums = probs[seen].sum(axis=1)
        if seen.any() and np.abs(sums - 1.0).max() > NORMALIZATION_TOL:
            raise ConfigError(f"CBT rows for {child.name!r} do not sum to 1")

        if counts is not None:
            counts = np.array(counts, dtype=np.int64)
            if counts.shape != probs.shape:
                raise ConfigError(f"count table for {child.name!r} has wrong shape")
            if (counts < 0).any():
                raise ConfigError(f"negative counts for {child.name!r}")

        probs.setflags(write=False)
        if counts is not None:
            counts.setflags(write=False)
        self.probs = probs
        self.counts = counts

    @property
    def name(self) -> str:
        return self.child.name

    @property
    def parent_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parents)

    @property
    def n_rows(self) -> int:
        return self.probs.shape[0]

    def row_index(self, config: Mapping[str, str]) -> int:
        return _row_index(self.child.name, self.parents, config)

    def row_config(self, row: int) -> dict[str, str]:
        if not self.parents:
            return {}
        idx = np.unravel_index(row, self.shape)
        return {p.name: p.states[int(i)] for p, i in zip(self.parents, idx)}

    def is_seen(self, row: int) -> bool:
        return not math.isnan(self.probs[row, 0])

    def distribution(self, config: Mapping[str, str]) -> np.ndarray:
        row = self.row_index(config)
        if not self.is_seen(row):
            raise UnseenConfig(f"{self.name!r} has no training support for {dict(config)}")
        return self.probs[row]

    def support(self, config: Mapping[str, str]) -> int | None:
        """Training count M[u] for ``config``; None when the table has no counts."""
        if self.counts is None:
            return None
        return int(self.counts[self.row_index(config)].sum())

    def rows(self) -> Iterator[tuple[dict[str, str], np.ndarray | None, np.ndarray]]:
        for row in range(self.n_rows):
            counts = None if self.counts is None else self.counts[row]
            yield self.row_config(row), counts, self.probs[row]

    def same_as(self, other: "Cbt") -> bool:
        """Bit-identical comparison of states, parents, counts and probabilities."""
        if self.child != other.child or self.parents != other.parents:
            return False
        if self.probs.tobytes() != other.probs.tobytes():
            return False
        if (self.counts is None) != (other.counts is None):
            return False
        return self.counts is None or np.array_equal(self.counts, other.counts)

    def to_dict(self) -> dict:
        rows = []
        for config, counts, probs in self.rows():
            rows.append({
                "config": config,
                "counts": None if counts is None else [int(c) for c in counts],
                "probs": None if math.isnan(probs[0]) else [float(p) for p in probs],
            })
        return {"parents": list(self.parent_names), "rows": rows}


class BnModel:
    """A structure together with one CBT per node. Immutable after creation."""

    def __init__(self, structure: BnStructure, cbts: Mapping[str, Cbt]):
        if set(cbts) != set(structure.names):
            missing = set(structure.names) - set(cbts)
            extra = set(cbts) - set(structure.names)
            raise ConfigError(f"CBTs do not cover the structure (missing={sorted(missing)}, extra={sorted(extra)})")
        for name in structure.names:
            cbt = cbts[name]
            if cbt.child != structure.node(name):
                raise ConfigError(f"CBT for {name!r} disagrees with the node's state space")
            expected = tuple(structure.node(p) for p in structure.sorted_parents(name))
            if cbt.parents != expected:
                raise ConfigError(f"CBT parents for {name!r} do not match the structure")
        self.structure = structure
        self.cbts = {name: cbts[name] for name in structure.names}

    def cbt(self, name: str) -> Cbt:
        self.structure.node(name)
        return self.cbts[name]

    def conditional_prob(self, child: str, state: str, parents: Mapping[str, str]) -> float:
        cbt = self.cbt(child)
        col = cbt.child.index(state)
        return float(cbt.distribution(parents)[col])

    def joint_prob(self, assignment: Mapping[str, str]) -> float:
        missing = [n for n in self.structure.names if n not in assignment]
        if missing:
            raise IncompleteAssignment(f"assignment lacks {missing}")
        p = 1.0
        for name in self.structure.topological_order():
            config = {u: assignment[u] for u in self.structure.parents(name)}
            p *= self.conditional_prob(name, assignment[name], config)
        return p

    def to_dict(self) -> dict:
        data = {"format": MODEL_FORMAT}
        data.update(self.structure.to_dict())
        data["cbts"] = {name: self.cbts[name].to_dict() for name in self.structure.names}
        return data

    def fingerprint(self) -> str:
        return hashlib.sha256(dumps_model(self).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: Mapping) -> "BnModel":
        structure = BnStructure.from_dict(data)
        raw = data.get("cbts")
        if raw is None:
            raise ConfigError("model document has no 'cbts' section")
        cbts = {}
        for name in structure.names:
            if name not in raw:
                raise ConfigError(f"model document has no CBT for {name!r}")
            cbts[name] = _cbt_from_dict(structure, name, raw[name])
        return cls(structure, cbts)


def _row_index(name: str, parents: Sequence[NodeSpec], config: Mapping[str, str]) -> int:
    if set(config) != {p.name for p in parents}:
        raise ParentConfigMismatch(
            f"{name!r} has parents {sorted(p.name for p in parents)}, got {sorted(config)}"
        )
    if not parents:
        return 0
    idx = tuple(p.index(config[p.name]) for p in parents)
    return int(np.ravel_multi_index(idx, tuple(p.cardinality for p in parents)))


def _cbt_from_dict(structure: BnStructure, name: str, doc: Mapping) -> Cbt:
    child = structure.node(name)
    parents = [structure.node(p) for p in structure.sorted_parents(name)]
    if list(doc.get("parents", [])) != [p.name for p in parents]:
        raise ConfigError(f"CBT for {name!r} lists parents {doc.get('parents')}")
    shape = tuple(p.cardinality for p in parents)
    n_rows = math.prod(shape)
    probs = np.full((n_rows, child.cardinality), np.nan)
    counts = None
    rows = doc.get("rows", [])
    has_counts = any(r.get("counts") is not None for r in rows)
    if has_counts:
        counts = np.zeros((n_rows, child.cardinality), dtype=np.int64)
    filled = set()
    for r in rows:
        config = {str(k): str(v) for k, v in (r.get("config") or {}).items()}
        row = _row_index(name, parents, config)
        if row in filled:
            raise ConfigError(f"CBT for {name!r} repeats configuration {config}")
        filled.add(row)
        if r.get("probs") is not None:
            probs[row] = r["probs"]
        if has_counts:
            if r.get("counts") is None:
                raise ConfigError(f"CBT for {name!r} mixes rows with and without counts")
            counts[row] = r["counts"]
    return Cbt(child, parents, probs, counts)


def conditional_prob(model: BnModel, child: str, state: str, parents: Mapping[str, str]) -> float:
    """Return theta for ``child=state`` given the parent configuration."""
    return model.conditional_prob(child, state, parents)


def joint_prob(model: BnModel, assignment: Mapping[str, str]) -> float:
    """Product of per-node conditional probabilities for a full assignment."""
    return model.joint_prob(assignment)


def iter_assignments(structure: BnStructure) -> Iterator[dict[str, str]]:
    """Every full assignment of the network (exponential; small networks only)."""
    nodes = structure.nodes
    for states in itertools.product(*(n.states for n in nodes)):
        yield {n.name: s for n, s in zip(nodes, states)}


def model_from_probabilities(structure: BnStructure, tables: Mapping[str, Mapping]) -> BnModel:
    """Build a model from hand-written probability tables.

    ``tables[node]`` maps a tuple of parent states (in sorted-parent order;
    the empty tuple for roots) to a probability list or a ``{state: p}`` dict.
    """
    cbts = {}
    for name in structure.names:
        child = structure.node(name)
        parents = [structure.node(p) for p in structure.sorted_parents(name)]
        shape = tuple(p.cardinality for p in parents)
        probs = np.full((math.prod(shape), child.cardinality), np.nan)
        table = tables[name]
        for key, dist in table.items():
            key = tuple(key) if isinstance(key, (tuple, list)) else (key,)
            idx = tuple(p.index(s) for p, s in zip(parents, key))
            if len(idx) != len(parents):
                raise ParentConfigMismatch(f"{name!r}: configuration {key} has wrong arity")
            row = int(np.ravel_multi_index(idx, shape)) if parents else 0
            if isinstance(dist, Mapping):
                dist = [dist[s] for s in child.states]
            probs[row] = dist
        cbts[name] = Cbt(child, parents, probs)
    return BnModel(structure, cbts)


def dumps_model(model: BnModel) -> str:
    return json.dumps(model.to_dict(), indent=2) + "\n"


def save_model(model: BnModel | BnStructure, path) -> None:
    """Write a model (or a bare structure, with no CBT section) as JSON."""
    if isinstance(model, BnStructure):
        text = json.dumps({"format": MODEL_FORMAT, **model.to_dict()}, indent=2) + "\n"
    else:
        text = dumps_model(model)
    Path(path).write_text(text)


def _read_doc(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not a model document ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ConfigError(f"{path}: expected format {MODEL_FORMAT!r}")
    return doc


def load_model(path) -> BnModel:
    return BnModel.from_dict(_read_doc(path))


def load_structure(path) -> BnStructure:
    """Read only the structure part of a model file; CBTs, if present, are ignored."""
    return BnStructure.from_dict(_read_doc(path))
