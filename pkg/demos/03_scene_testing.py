"""
Scoring test scenes with empirical p-value ranges
=================================================

Every test instance realises a CBL at the target node. Its rank among the
training CBLs gives a p-value interval; the interval's mass below alpha is
its significance, and a scene is relevant when the summed significance
exceeds alpha times its instance count.
"""

# %%
from trigcond.dataset import split
from trigcond.hypothesis import AnalysisConfig, pvalue_range, score_scenes, significance, summary_table
from trigcond.learning import learn_cbts
from trigcond.networks import SCENE_LEVEL, initial_network
from trigcond.synthgen import GeneratorConfig, to_dataset

corpus = [0.1, 0.2, 0.2, 0.5]
for cbl in (0.05, 0.2, 0.9):
    p = pvalue_range(cbl, corpus)
    print(f"cbl {cbl}: [{p.p_min:.2f}, {p.p_max:.2f}]  n_alpha(0.25) = {significance(p, 0.25):.3f}")

# %%
gen = GeneratorConfig(initial_network(), scenes=300, instances_per_scene=(8, 20),
                      scene_level_nodes=SCENE_LEVEL, seed=3)
train, test = split(to_dataset(gen), 0.8, seed=0)
model = learn_cbts(initial_network().structure, train)
report = score_scenes(model, train, test, AnalysisConfig(alpha=0.05, target_nodes=("FN",)), seed=0)
print("\n".join(summary_table(report).splitlines()[:8]))
print("...")
print(summary_table(report).splitlines()[-1])

# %% [markdown]
# The most relevant scene, instance by instance.

# %%
top = max(report.scenes, key=lambda sc: sc.ratio)
for d in top.details:
    print(f"{d.instance:>3} cbl={d.cbl:.4f}  p=[{d.p_min:.4f}, {d.p_max:.4f}]  n_alpha={d.n_alpha:.3f}")
