import numpy as np
import pytest
from conftest import make_dataset
from hypothesis import given, settings
from hypothesis import strategies as st
from matching_oracles import lexicographic, min_total_cost, spread_scene

from trigcond.bn import NodeSpec
from trigcond.dataset import (
    DETECTION,
    GROUND_TRUTH,
    MatchConfig,
    RawObjectRecord,
    build_dataset,
    derive_fn,
    greedy_match,
    ingest,
    mse_cost,
    read_instances,
    read_records,
    split,
    write_instances,
    write_records,
)
from trigcond.errors import (
    ConfigError,
    EmptyDataset,
    MalformedRow,
    MissingAttribute,
    UnknownStateLabel,
)
from trigcond.networks import initial_structure


def gt(scene, x, y, **attrs):
    return RawObjectRecord(scene, GROUND_TRUTH, x, y, attrs)


def det(scene, x, y):
    return RawObjectRecord(scene, DETECTION, x, y)


def fn_labels(instances):
    return [i.attributes["FN"] for i in instances]


def test_ingest_partitions_by_scene():
    rows = [gt("a", 1, 1), gt("a", 2, 2), gt("b", 3, 3), det("a", 1, 1), det("b", 3, 3)]
    g, d = ingest(rows)
    assert {k: len(v) for k, v in g.items()} == {"a": 2, "b": 1}
    assert {k: len(v) for k, v in d.items()} == {"a": 1, "b": 1}


def test_ingest_empty():
    assert ingest([]) == ({}, {})
    assert len(build_dataset({}, {})) == 0


def test_ingest_table_rows():
    rows = [
        {"scene_id": "s", "source": "gt", "x": "1.5", "y": "0", "Occlusion": "FullyVisible"},
        {"scene_id": "s", "source": "det", "x": "1.5", "y": "0.1", "Occlusion": ""},
    ]
    g, d = ingest(rows, initial_structure())
    assert g["s"][0].attributes == {"Occlusion": "FullyVisible"}
    assert d["s"][0].source == DETECTION


@pytest.mark.parametrize("row, index", [
    ({"scene_id": "s", "source": "gt", "x": "ten", "y": "0"}, 1),
    ({"scene_id": "s", "source": "gt", "x": "1", "y": ""}, 1),
    ({"scene_id": "s", "source": "lidar", "x": "1", "y": "1"}, 1),
    ({"scene_id": "s", "source": "gt", "x": "nan", "y": "1"}, 1),
])
def test_malformed_row_index(row, index):
    ok = {"scene_id": "s", "source": "gt", "x": "0", "y": "0"}
    with pytest.raises(MalformedRow) as exc:
        ingest([ok, row])
    assert exc.value.index == index


def test_unknown_state_label():
    with pytest.raises(UnknownStateLabel):
        ingest([gt("s", 0, 0, Occlusion="Hidden")], initial_structure())


def test_exact_coincidence_matches():
    assert fn_labels(derive_fn([gt("s", 10, 5)], [det("s", 10, 5)])) == ["No"]


def test_far_detection_is_fn():
    assert mse_cost([(10, 5)], [(30, 5)])[0, 0] == 200.0
    assert fn_labels(derive_fn([gt("s", 10, 5)], [det("s", 30, 5)])) == ["Yes"]


def test_closest_gt_wins():
    g = [(0.0, 0.0), (1.0, 0.0)]
    d = [(0.1, 0.0)]
    cost = mse_cost(g, d)
    assert cost[0, 0] == pytest.approx(0.005)
    assert cost[1, 0] == pytest.approx(0.405)
    assert greedy_match(g, d, 2.0) == [(0, 0)] == sorted(min_total_cost(g, d, 2.0))
    labels = fn_labels(derive_fn([gt("s", *g[0]), gt("s", *g[1])], [det("s", *d[0])]))
    assert labels == ["No", "Yes"]


def test_range_filter_drops_both_sides():
    out = derive_fn([gt("s", 150, 0), gt("s", 5, 60), gt("s", 0, 0)],
                    [det("s", 150, 0), det("s", 0, 0)])
    assert len(out) == 1 and fn_labels(out) == ["No"]
    assert build_dataset({"s": [gt("s", 0, 0)]}, {"s": [det("s", 0, 0), det("s", 139, 0)]}).fp_count == 1


def test_threshold_is_strict():
    # cost exactly 2.0 (2 m apart along x) is not a match
    assert fn_labels(derive_fn([gt("s", 0, 0)], [det("s", 2, 0)])) == ["Yes"]
    assert fn_labels(derive_fn([gt("s", 0, 0)], [det("s", 1.99, 0)])) == ["No"]


def test_greedy_prefers_cheapest_pair_over_total_cost():
    # pair costs: a-c 1.0, a-d 1.1, b-c 1.05, b-d over threshold.
    # greedy takes a-c and strands b; least total cost would keep a-d and b-c
    r2 = np.sqrt(2.0)
    g = [(0.0, 0.0), (r2, np.sqrt(2.1))]
    d = [(r2, 0.0), (-np.sqrt(2.2), 0.0)]
    cost = mse_cost(g, d)
    np.testing.assert_allclose([cost[0, 0], cost[0, 1], cost[1, 0]], [1.0, 1.1, 1.05])
    assert cost[1, 1] > 2.0
    assert greedy_match(g, d, 2.0) == [(0, 0)]
    assert min_total_cost(g, d, 2.0) == {(0, 1), (1, 0)}
    assert lexicographic(g, d, 2.0) == {(0, 0)}


@pytest.mark.parametrize("seed", range(40))
def test_greedy_equals_min_total_on_spread_scenes(seed):
    rng = np.random.default_rng(seed)
    n_g, n_d = rng.integers(1, 7, size=2)
    g, d = spread_scene(rng, int(n_g), int(n_d))
    assert set(greedy_match(g, d, 2.0)) == min_total_cost(g, d, 2.0)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 2**32 - 1))
def test_greedy_equals_lexicographic_oracle(n_g, n_d, seed):
    rng = np.random.default_rng(seed)
    g = [tuple(p) for p in rng.uniform(-2, 2, (n_g, 2))]
    d = [tuple(p) for p in rng.uniform(-2, 2, (n_d, 2))]
    pairs = greedy_match(g, d, 2.0)
    assert set(pairs) == lexicographic(g, d, 2.0)
    assert len({a for a, _ in pairs}) == len({b for _, b in pairs}) == len(pairs)
    cost = mse_cost(g, d)
    assert all(cost[a, b] < 2.0 for a, b in pairs)


@pytest.mark.parametrize("n, train, test", [(10, 8, 2), (7, 6, 1), (5, 4, 1), (2, 2, 0)])
def test_split_counts(n, train, test):
    data = make_dataset({f"s{i}": [{"A": "a0"}] for i in range(n)})
    tr, te = split(data, 0.8, seed=3)
    assert (len(tr), len(te)) == (train, test)
    assert set(tr.scene_ids) | set(te.scene_ids) == set(data.scene_ids)
    assert not set(tr.scene_ids) & set(te.scene_ids)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.floats(0.05, 0.95), st.integers(0, 1000))
def test_split_partition_property(n, frac, seed):
    data = make_dataset({f"s{i:02d}": [{"A": "a0"}] * (1 + i % 3) for i in range(n)})
    tr, te = split(data, frac, seed)
    assert sorted(tr.scene_ids + te.scene_ids) == sorted(data.scene_ids)
    assert tr.M + te.M == data.M
    assert list(tr.scene_ids) == sorted(tr.scene_ids)
    assert split(data, frac, seed) == (tr, te)


def test_split_contract():
    with pytest.raises(EmptyDataset):
        split(make_dataset({}), 0.8, 0)
    with pytest.raises(ConfigError):
        split(make_dataset({"s": [{"A": "a0"}]}), 1.0, 0)


def test_encode_errors(tiny):
    with pytest.raises(MissingAttribute):
        tiny.encode([NodeSpec("Z", ("z0", "z1"))])
    with pytest.raises(UnknownStateLabel):
        tiny.encode([NodeSpec("A", ("x", "y"))])


def test_table_round_trips(tmp_path, tiny):
    write_instances(tiny, tmp_path / "i.csv")
    assert read_instances(tmp_path / "i.csv") == tiny
    recs = [gt("a", 1.25, -3.5, Weather="fog"), det("a", 1.3, -3.4)]
    write_records(recs, tmp_path / "r.csv", ["Weather"])
    g, d = ingest(read_records(tmp_path / "r.csv"))
    assert g["a"] == [recs[0]] and d["a"] == [recs[1]]


@pytest.mark.parametrize("kw", [{"cost_threshold": 0}, {"x_limit": -1}, {"y_limit": 0}])
def test_match_config_contract(kw):
    with pytest.raises(ConfigError):
        MatchConfig(**kw)
