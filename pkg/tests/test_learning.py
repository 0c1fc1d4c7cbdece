import itertools
import math
from collections import Counter

import numpy as np
import pytest
from conftest import make_dataset
from hypothesis import given, settings
from hypothesis import strategies as st

from trigcond.bn import BnModel, Cbt, NodeSpec, build_structure
from trigcond.errors import ConfigError, MissingAttribute, UnseenConfig
from trigcond.learning import LearnConfig, learn_cbts, log_likelihood

YN = ("No", "Yes")
FN = NodeSpec("FN", YN)
TRUNC = NodeSpec("Truncation", YN)
REFL = NodeSpec("Reflection", YN)
OCC = NodeSpec("Occlusion", ("FullyVisible", "PartlyOccluded", "LargelyOccluded"))
FN_FAMILY = build_structure([TRUNC, REFL, OCC, FN],
                            [("Truncation", "FN"), ("Reflection", "FN"), ("Occlusion", "FN")])


def fn_rows(n_yes, n_total, **cfg):
    return [{**cfg, "FN": "Yes" if i < n_yes else "No"} for i in range(n_total)]


def test_counted_theta():
    cfg = {"Truncation": "Yes", "Reflection": "Yes", "Occlusion": "LargelyOccluded"}
    rows = fn_rows(3, 10, **cfg) + fn_rows(1, 4, Truncation="No", Reflection="Yes", Occlusion="FullyVisible")
    model = learn_cbts(FN_FAMILY, make_dataset({"s": rows}))
    assert model.conditional_prob("FN", "Yes", cfg) == pytest.approx(0.3, rel=1e-12)
    assert model.cbt("FN").support(cfg) == 10


def test_root_frequency():
    weather = NodeSpec("Weather", ("clear", "rain"))
    rows = [{"Weather": "rain" if i < 5 else "clear"} for i in range(20)]
    model = learn_cbts(build_structure([weather], []), make_dataset({"s": rows}))
    assert model.conditional_prob("Weather", "rain", {}) == 0.25


def test_zero_count_policies():
    a = NodeSpec("A", ("a0", "a1"))
    s = build_structure([a, FN], [("A", "FN")])
    data = make_dataset({"s": [{"A": "a0", "FN": "No"}, {"A": "a0", "FN": "Yes"}]})
    uniform = learn_cbts(s, data)
    assert list(uniform.cbt("FN").distribution({"A": "a1"})) == [0.5, 0.5]
    assert uniform.cbt("FN").support({"A": "a1"}) == 0
    strict = learn_cbts(s, data, LearnConfig("strict"))
    with pytest.raises(UnseenConfig):
        strict.conditional_prob("FN", "Yes", {"A": "a1"})
    with pytest.raises(ConfigError):
        LearnConfig("laplace")


def test_missing_attribute():
    with pytest.raises(MissingAttribute):
        learn_cbts(FN_FAMILY, make_dataset({"s": [{"FN": "No"}]}))


def random_problem(seed, n=200):
    """Five random nodes on a random DAG and ``n`` uniformly random instances."""
    rng = np.random.default_rng(seed)
    nodes = [NodeSpec(f"V{i}", tuple(f"v{i}{k}" for k in range(rng.integers(2, 4)))) for i in range(5)]
    edges = [(f"V{i}", f"V{j}") for i, j in itertools.combinations(range(5), 2) if rng.random() < 0.4]
    structure = build_structure(nodes, edges)
    rows = [{v.name: v.states[rng.integers(v.cardinality)] for v in nodes} for _ in range(n)]
    scenes = {f"s{k}": rows[k::7] for k in range(7)}
    return structure, make_dataset(scenes), rows


def naive_tally(structure, rows, name):
    """theta[u][x] by nested loops over the raw rows (None for unseen u)."""
    parents = structure.sorted_parents(name)
    states = structure.node(name).states
    out = {}
    for u in itertools.product(*(structure.node(p).states for p in parents)):
        matching = [r for r in rows if all(r[p] == s for p, s in zip(parents, u))]
        counts = [sum(1 for r in matching if r[name] == x) for x in states]
        out[u] = (counts, [c / len(matching) for c in counts] if matching else None)
    return out


@pytest.mark.parametrize("seed", range(8))
def test_matches_naive_tally(seed):
    structure, data, rows = random_problem(seed)
    model = learn_cbts(structure, data, LearnConfig("strict"))
    for name in structure.names:
        cbt = model.cbt(name)
        for u, (counts, theta) in naive_tally(structure, rows, name).items():
            config = dict(zip(structure.sorted_parents(name), u))
            row = cbt.row_index(config)
            assert list(cbt.counts[row]) == counts
            if theta is None:
                assert not cbt.is_seen(row)
            else:
                np.testing.assert_allclose(cbt.probs[row], theta, rtol=1e-12, atol=0)


def perturbed(model, rng, scale):
    cbts = {}
    for name in model.structure.names:
        cbt = model.cbt(name)
        logits = np.log(np.clip(cbt.probs, 1e-300, None)) + rng.normal(0, scale, cbt.probs.shape)
        p = np.exp(logits - logits.max(axis=1, keepdims=True))
        cbts[name] = Cbt(cbt.child, cbt.parents, p / p.sum(axis=1, keepdims=True))
    return BnModel(model.structure, cbts)


@pytest.mark.parametrize("seed", range(3))
def test_mle_beats_perturbations(seed):
    structure, data, _ = random_problem(seed)
    model = learn_cbts(structure, data)
    best = log_likelihood(model, data)
    rng = np.random.default_rng(100 + seed)
    for k in range(100):
        other = perturbed(model, rng, scale=0.02 + 0.5 * k / 100)
        assert log_likelihood(other, data) <= best + 1e-9


def test_log_likelihood_edges():
    root = NodeSpec("R", YN)
    s = build_structure([root], [])
    m = BnModel(s, {"R": Cbt(root, [], np.array([[1.0, 0.0]]))})
    assert log_likelihood(m, make_dataset({"s": [{"R": "Yes"}]})) == -math.inf
    assert log_likelihood(m, make_dataset({})) == 0.0
    assert log_likelihood(m, make_dataset({"s": [{"R": "No"}] * 3})) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_order_independent(seed, shuffler):
    structure, data, rows = random_problem(seed % 50, n=60)
    shuffled = rows[:]
    shuffler.shuffle(shuffled)
    a = learn_cbts(structure, data)
    b = learn_cbts(structure, make_dataset({"one": shuffled}))
    for name in structure.names:
        assert a.cbt(name).same_as(b.cbt(name))


@pytest.mark.parametrize("seed", range(4))
def test_count_consistency(seed):
    structure, data, rows = random_problem(seed)
    model = learn_cbts(structure, data)
    for name in structure.names:
        counts = model.cbt(name).counts
        assert counts.sum() == data.M
        parents = structure.sorted_parents(name)
        tally = Counter(tuple(r[p] for p in parents) for r in rows)
        for row in range(counts.shape[0]):
            u = tuple(model.cbt(name).row_config(row)[p] for p in parents)
            assert counts[row].sum() == tally.get(u, 0)
