"""
Networks, sampling and parameter learning
=========================================

A small tour of the discrete network layer: the shipped LIDAR network,
exact queries, synthetic scenes drawn from it, and maximum-likelihood
tables learned back from those scenes.
"""

# %%
import math

import numpy as np

from trigcond.bn import iter_assignments
from trigcond.learning import learn_cbts, log_likelihood
from trigcond.networks import SCENE_LEVEL, initial_network
from trigcond.synthgen import GeneratorConfig, to_dataset

truth = initial_network()
s = truth.structure
print("nodes:", s.names)
print("FN parents (sorted):", s.sorted_parents("FN"))
print("topological order:", s.topological_order())

# %% [markdown]
# Conditional lookups index a table row by the parents' states. The joint
# of a full assignment is the product of one entry per node.

# %%
cfg = {"Occlusion": "LargelyOccluded", "Reflection": "low", "Truncation": "Yes"}
print("P(FN=Yes | worst case) =", truth.conditional_prob("FN", "Yes", cfg))

everything = list(iter_assignments(s))
p_fn = math.fsum(truth.joint_prob(a) for a in everything if a["FN"] == "Yes")
print(f"{len(everything)} assignments, exact P(FN=Yes) = {p_fn:.4f}")

# %% [markdown]
# Weather, road condition and illumination are drawn once per scene; the
# rest per object. FN is not written out as a column, it is recovered by
# matching ground truth against jittered detections.

# %%
gen = GeneratorConfig(truth, scenes=2000, instances_per_scene=(5, 25), scene_level_nodes=SCENE_LEVEL, seed=0)
data = to_dataset(gen)
rate = np.mean([i.attributes["FN"] == "Yes" for i in data.instances()])
print(f"{len(data)} scenes, {data.M} objects, empirical FN rate {rate:.4f}")

# %%
learned = learn_cbts(s, data)
fn_true, fn_hat = truth.cbt("FN"), learned.cbt("FN")
print("row  support  true P(Yes)  learned P(Yes)")
for row in range(fn_hat.n_rows):
    print(f"{row:>3}  {fn_hat.counts[row].sum():>7}  {fn_true.probs[row, 1]:>11.3f}  {fn_hat.probs[row, 1]:>14.3f}")

# %% [markdown]
# The learned tables maximise the likelihood of their own training data, so
# the generating model scores a little lower on it.

# %%
print("log-likelihood, learned :", round(log_likelihood(learned, data), 1))
print("log-likelihood, truth   :", round(log_likelihood(truth, data), 1))
