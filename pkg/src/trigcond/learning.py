"""Maximum-likelihood learning of conditional belief tables.

Each parameter is the ratio of integer counts ``M[u, x] / M[u]`` taken over
the training instances. Configurations with ``M[u] = 0`` are handled by the
zero-count policy: ``strict`` leaves them undefined (queries raise
``UnseenConfig``), ``uniform`` assigns the uniform distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bn import BnModel, BnStructure, Cbt
from .dataset import Dataset, EncodedData
from .errors import ConfigError, UnseenConfig

POLICIES = ("strict", "uniform")


@dataclass(frozen=True)
class LearnConfig:
    zero_count_policy: str = "uniform"

    def __post_init__(self):
        if self.zero_count_policy not in POLICIES:
            raise ConfigError(f"zero_count_policy must be one of {POLICIES}")


def parent_row_index(structure: BnStructure, name: str, enc: EncodedData) -> np.ndarray:
    """CBT row index of every encoded instance for node ``name``."""
    parents = structure.sorted_parents(name)
    if not parents:
        return np.zeros(enc.n_instances, dtype=np.int64)
    shape = tuple(structure.node(p).cardinality for p in parents)
    return np.ravel_multi_index(tuple(enc.codes[p] for p in parents), shape)


def family_counts(structure: BnStructure, name: str, enc: EncodedData) -> np.ndarray:
    """``M[u, x]`` for node ``name`` as an integer array (rows u, columns x)."""
    child = structure.node(name)
    shape = tuple(structure.node(p).cardinality for p in structure.sorted_parents(name))
    n_rows = math.prod(shape)
    rows = parent_row_index(structure, name, enc)
    flat = rows * child.cardinality + enc.codes[name]
    counts = np.bincount(flat, minlength=n_rows * child.cardinality)
    return counts.reshape(n_rows, child.cardinality).astype(np.int64)


def cbt_from_counts(structure: BnStructure, name: str, counts: np.ndarray,
                    cfg: LearnConfig = LearnConfig()) -> Cbt:
    child = structure.node(name)
    parents = [structure.node(p) for p in structure.sorted_parents(name)]
    support = counts.sum(axis=1)
    probs = np.full(counts.shape, np.nan)
    seen = support > 0
    probs[seen] = counts[seen] / support[seen, None]
    if cfg.zero_count_policy == "uniform":
        probs[~seen] = 1.0 / child.cardinality
    return Cbt(child, parents, probs, counts)


def learn_cbts(structure: BnStructure, train: Dataset, cfg: LearnConfig = LearnConfig()) -> BnModel:
    """Learn every CBT of ``structure`` from fully observed training data.

    Raises:
        MissingAttribute: an instance lacks one of the structure's nodes.
        UnknownStateLabel: an attribute value is not a declared state.
    """
    enc = train.encode(structure.nodes)
    cbts = {
        name: cbt_from_counts(structure, name, family_counts(structure, name, enc), cfg)
        for name in structure.names
    }
    return BnModel(structure, cbts)


def cbl_values(model: BnModel, name: str, enc: EncodedData) -> np.ndarray:
    """Realised theta of node ``name`` for every encoded instance.

    Raises:
        UnseenConfig: an instance falls in a configuration left undefined by
            the strict policy.
    """
    cbt = model.cbt(name)
    rows = parent_row_index(model.structure, name, enc)
    values = cbt.probs[rows, enc.codes[name]]
    if np.isnan(values).any():
        bad = int(rows[np.isnan(values)][0])
        raise UnseenConfig(f"{name!r} has no training support for {cbt.row_config(bad)}")
    return values


def log_likelihood(model: BnModel, data: Dataset) -> float:
    """Sum over instances and nodes of ``log theta``; ``-inf`` on any zero factor."""
    if data.M == 0:
        return 0.0
    enc = data.encode(model.structure.nodes)
    total = 0.0
    for name in model.structure.names:
        values = cbl_values(model, name, enc)
        if (values == 0).any():
            return -math.inf
        total += math.fsum(np.log(values))
    return total
