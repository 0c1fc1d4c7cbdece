"""
Flag rate under the null and scene size
=======================================

Train and test come from the same network, so nothing should be novel.
The relevance rule compares a scene's summed significance with alpha times
its size, and under the null each instance contributes alpha on average,
so the rule sits right at the scene mean. How often a scene crosses it
depends mostly on how many instances the scene holds.
"""

# %%
import numpy as np

from trigcond.dataset import split
from trigcond.hypothesis import AnalysisConfig, score_scenes
from trigcond.learning import learn_cbts
from trigcond.networks import SCENE_LEVEL, initial_network, initial_structure
from trigcond.synthgen import GeneratorConfig, to_dataset

sizes = [1, 2, 5, 10, 20, 50]
seeds = range(5)
print(" N   mean flagged fraction   per seed")
for n in sizes:
    fracs = []
    for seed in seeds:
        gen = GeneratorConfig(initial_network(), scenes=max(400, 20000 // n), instances_per_scene=(n, n),
                              scene_level_nodes=SCENE_LEVEL, seed=seed)
        train, test = split(to_dataset(gen), 0.8, seed)
        model = learn_cbts(initial_structure(), train)
        fracs.append(score_scenes(model, train, test, AnalysisConfig(0.05)).rss_fraction)
    print(f"{n:>2}   {np.mean(fracs):>21.3f}   {np.round(fracs, 3)}")

# %% [markdown]
# For comparison, the chance that a binomial count of "fully significant"
# instances exceeds alpha * N when each instance is significant with
# probability alpha. Fractional significances move the numbers but not the
# shape.

# %%
from math import comb

for n in sizes:
    k_min = int(np.floor(0.05 * n)) + 1
    tail = sum(comb(n, k) * 0.05 ** k * 0.95 ** (n - k) for k in range(k_min, n + 1))
    print(f"N={n:>2}: P(Bin(N, 0.05) > 0.05 N) = {tail:.3f}")
