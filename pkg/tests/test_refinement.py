import math

import pytest

from trigcond.bn import NodeSpec
from trigcond.dataset import split
from trigcond.errors import ConfigError, MissingAttribute, NoSuchEdge, UnknownNode
from trigcond.hypothesis import AnalysisConfig
from trigcond.learning import learn_cbts
from trigcond.networks import SCENE_LEVEL, TRAFFIC_DENSITY, initial_network, initial_structure
from trigcond.refinement import (
    ConfounderReport,
    RefinementKind,
    RefinementOp,
    ValidationReport,
    apply_refinement,
    combine,
    confounder_workflow,
    load_refinements,
    load_validation,
    proposition,
    relative_change,
    save_validation,
    validate,
    validate_splits,
)
from trigcond.synthgen import GeneratorConfig, to_dataset


def test_direct_cause():
    before = initial_structure()
    after = apply_refinement(before, RefinementOp.direct_cause(TRAFFIC_DENSITY, "FN"))
    assert set(after.parents("FN")) == {"Reflection", "Truncation", "Occlusion", "TrafficDensity"}
    assert after.parents("TrafficDensity") == ()
    assert "TrafficDensity" not in before
    assert before == initial_structure()


def test_confounder():
    after = apply_refinement(initial_structure(),
                             RefinementOp.confounder(TRAFFIC_DENSITY, "FN", "Occlusion"))
    new = set(after.edges) - set(initial_structure().edges)
    assert new == {("TrafficDensity", "FN"), ("TrafficDensity", "Occlusion")}
    assert after.parents("TrafficDensity") == ()


def test_remove_cause():
    after = apply_refinement(initial_structure(), RefinementOp.remove_cause("Truncation", "FN"))
    assert set(after.parents("FN")) == {"Reflection", "Occlusion"}
    assert "Truncation" in after and after.children("Truncation") == ()
    pruned = apply_refinement(initial_structure(), RefinementOp.remove_cause("Truncation", "FN", prune=True))
    assert "Truncation" not in pruned


@pytest.mark.parametrize("op, err", [
    (RefinementOp.remove_cause("Weather", "FN"), NoSuchEdge),
    (RefinementOp.direct_cause(NodeSpec("Weather", ("a", "b")), "FN"), ConfigError),
    (RefinementOp.direct_cause(TRAFFIC_DENSITY, "Nowhere"), UnknownNode),
])
def test_apply_contract(op, err):
    with pytest.raises(err):
        apply_refinement(initial_structure(), op)


def test_op_contract():
    with pytest.raises(ConfigError):
        RefinementOp(RefinementKind.ADD_CONFOUNDER, ("FN", "FN"), TRAFFIC_DENSITY)
    with pytest.raises(ConfigError):
        RefinementOp(RefinementKind.ADD_DIRECT_CAUSE, ("FN",))


def test_ops_from_yaml(tmp_path):
    (tmp_path / "ops.yaml").write_text(
        "- kind: AddConfounder\n  node: TrafficDensity\n  states: [low, medium, high, very_high]\n"
        "  targets: [FN, Occlusion]\n"
        "- kind: RemoveCause\n  removed_parent: Truncation\n  targets: [FN]\n"
    )
    ops = load_refinements(tmp_path / "ops.yaml")
    assert ops == [RefinementOp.confounder(TRAFFIC_DENSITY, "FN", "Occlusion"),
                   RefinementOp.remove_cause("Truncation", "FN")]
    assert [RefinementOp.from_dict(o.to_dict()) for o in ops] == ops


@pytest.mark.parametrize("r0, r1, verdict, tie", [
    (10, 7, "valid", False),
    (7, 10, "invalid", False),
    (8, 8, "invalid", True),
    (0, 0, "invalid", True),
])
def test_proposition(r0, r1, verdict, tie):
    assert proposition(r0, r1) == (verdict, tie)


def test_relative_change_signs():
    assert relative_change(200, 151) == pytest.approx(-24.5)
    assert relative_change(100, 107.82) == pytest.approx(7.82)
    assert relative_change(0, 3) == math.inf
    assert relative_change(0, 0) == 0.0


# -- validation on synthetic data ---------------------------------------------

@pytest.fixture(scope="module")
def refined_data():
    """Data drawn from the traffic-density network, TrafficDensity observed."""
    from trigcond.networks import REFINED_SCENE_LEVEL, refined_network
    cfg = GeneratorConfig(refined_network(), scenes=150, instances_per_scene=(8, 16),
                          scene_level_nodes=REFINED_SCENE_LEVEL, seed=21)
    return to_dataset(cfg)


def test_family_locality(refined_data):
    train, _ = split(refined_data, 0.8, 0)
    before = initial_structure()
    after = apply_refinement(before, RefinementOp.direct_cause(TRAFFIC_DENSITY, "FN"))
    m0, m1 = learn_cbts(before, train), learn_cbts(after, train)
    for name in before.names:
        if name == "FN":
            assert m1.cbt(name).probs.shape[0] == 4 * m0.cbt(name).probs.shape[0]
        else:
            assert m0.cbt(name).same_as(m1.cbt(name))


def test_validate_reproducible(refined_data, tmp_path):
    train, test = split(refined_data, 0.8, 3)
    after = apply_refinement(initial_structure(), RefinementOp.direct_cause(TRAFFIC_DENSITY, "FN"))
    a = validate(initial_structure(), after, train, test, seed=3)
    b = validate(initial_structure(), after, train, test, seed=3)
    assert a == b
    assert a.proposition == proposition(a.rss_initial, a.rss_after)[0]
    save_validation(a, tmp_path / "v.json")
    assert load_validation(tmp_path / "v.json") == a


def test_validate_needs_labels():
    data = to_dataset(GeneratorConfig(initial_network(), scenes=10, scene_level_nodes=SCENE_LEVEL))
    train, test = split(data, 0.8, 0)
    after = apply_refinement(initial_structure(), RefinementOp.direct_cause(TRAFFIC_DENSITY, "FN"))
    with pytest.raises(MissingAttribute):
        validate(initial_structure(), after, train, test)


def test_validate_splits_median(refined_data):
    after = apply_refinement(initial_structure(), RefinementOp.direct_cause(TRAFFIC_DENSITY, "FN"))
    report = validate_splits(initial_structure(), after, refined_data, "FN", seeds=range(5))
    assert report.seeds == (0, 1, 2, 3, 4) and len(report.iterations) == 5
    assert report.rss_initial == sorted(a for a, _ in report.iterations)[2]
    assert report.rss_after == sorted(b for _, b in report.iterations)[2]


def test_combine_rejects_mixed_nodes():
    a = ValidationReport("FN", 3, 2, -33.3, "valid", False, ((3, 2),), (0,), (10,))
    b = ValidationReport("Occlusion", 3, 2, -33.3, "valid", False, ((3, 2),), (1,), (10,))
    with pytest.raises(ConfigError):
        combine([a, b])


@pytest.mark.parametrize("child_valid, parent_valid, indicated", [
    (True, True, True), (True, False, False), (False, True, False), (False, False, False),
])
def test_confounder_flag(child_valid, parent_valid, indicated):
    def rep(node, ok):
        r1 = 1 if ok else 3
        return ValidationReport(node, 2, r1, relative_change(2, r1), *proposition(2, r1))
    report = ConfounderReport("T", rep("FN", child_valid), rep("Occlusion", parent_valid))
    assert report.indicated is indicated
    assert report.to_dict()["confounder_indicated"] is indicated


def test_confounder_workflow_runs(refined_data):
    train, test = split(refined_data, 0.8, 1)
    report = confounder_workflow(initial_structure(), TRAFFIC_DENSITY, "FN", "Occlusion", train, test,
                                 AnalysisConfig(0.05))
    assert report.child.node == "FN" and report.parent.node == "Occlusion"
    assert report.indicated == (report.child.valid and report.parent.valid)
    with pytest.raises(ConfigError):
        confounder_workflow(initial_structure(), TRAFFIC_DENSITY, "FN", "Weather", train, test)
