"""
The refinement loop with a hidden traffic density
=================================================

Scenes are drawn from the refined network, in which traffic density raises
both occlusion and the FN rate, but the density column is withheld. The
initial network is tested, flagged scenes are exported for annotation, the
generator's truth file plays the analyst, and candidate refinements are
validated by their relevant scene score.
"""

# %%
import tempfile
from pathlib import Path

from trigcond.annotations import export_annotations, import_annotations
from trigcond.dataset import split
from trigcond.hypothesis import AnalysisConfig, score_scenes
from trigcond.learning import learn_cbts
from trigcond.networks import REFINED_SCENE_LEVEL, TRAFFIC_DENSITY, initial_structure, refined_network
from trigcond.refinement import RefinementOp, apply_refinement, confounder_workflow, validate_splits
from trigcond.synthgen import GeneratorConfig, sample, to_dataset, truth_sidecar

work = Path(tempfile.mkdtemp())
gen = GeneratorConfig(refined_network(), scenes=600, instances_per_scene=(10, 20),
                      scene_level_nodes=REFINED_SCENE_LEVEL, hidden_nodes=frozenset({"TrafficDensity"}), seed=1)
drawn = sample(gen)
data = to_dataset(gen, drawn=drawn)
print("columns seen by the pipeline:", data.attribute_names())

# %%
train, test = split(data, 0.8, seed=0)
report = score_scenes(learn_cbts(initial_structure(), train), train, test, AnalysisConfig())
print(f"RSS at FN: {report.rss} of {len(test)} test scenes")
export_annotations(report.relevant_scene_ids(), work / "flagged.yaml", test)
print((work / "flagged.yaml").read_text()[:400])

# %% [markdown]
# A perfect analyst labels every scene with its true density.

# %%
truth_sidecar(gen, work / "truth.yaml", drawn)
labelled = import_annotations(work / "truth.yaml", data)
print("columns after import:", labelled.attribute_names())

# %%
initial = initial_structure()
for target in ("FN", "Occlusion"):
    after = apply_refinement(initial, RefinementOp.direct_cause(TRAFFIC_DENSITY, target))
    v = validate_splits(initial, after, labelled, eval_node=target, seeds=range(5))
    print(f"TrafficDensity -> {target}: RSS {v.rss_initial} -> {v.rss_after}, "
          f"{v.relative_rss_change:+.1f}%, {v.proposition}{' (tie)' if v.tie else ''}")

# %%
tr, te = split(labelled, 0.8, seed=0)
c = confounder_workflow(initial, TRAFFIC_DENSITY, "FN", "Occlusion", tr, te)
print("confounder indicated:", c.indicated)
