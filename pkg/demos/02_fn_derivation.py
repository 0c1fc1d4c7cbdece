"""
Deriving false negatives from raw object lists
==============================================

Ground-truth objects are paired with detections by mean squared position
error. Pairs are taken cheapest first, each object at most once, and a pair
only counts below the cost threshold (2.0 m^2 by default). Unpaired ground
truth becomes FN=Yes.
"""

# %%
import numpy as np

from trigcond.dataset import DETECTION, GROUND_TRUTH, MatchConfig, RawObjectRecord, derive_fn, greedy_match, mse_cost

gt = [RawObjectRecord("s1", GROUND_TRUTH, x, y, {"Occlusion": occ}) for x, y, occ in [
    (10.0, 5.0, "FullyVisible"),
    (0.0, 0.0, "PartlyOccluded"),
    (1.0, 0.0, "LargelyOccluded"),
    (150.0, 0.0, "FullyVisible"),     # beyond |x| < 140, filtered before matching
]]
det = [RawObjectRecord("s1", DETECTION, x, y) for x, y in [(10.0, 5.0), (0.1, 0.0), (30.0, 5.0)]]

for inst in derive_fn(gt, det):
    print(inst.attributes)

# %%
xy_g = [(r.x, r.y) for r in gt[:3]]
xy_d = [(r.x, r.y) for r in det]
print(np.round(mse_cost(xy_g, xy_d), 3))
print("pairs:", greedy_match(xy_g, xy_d, MatchConfig().cost_threshold))

# %% [markdown]
# Cheapest-first is not the same as least total cost. Here a-c is the single
# best pair; taking it leaves b without a partner even though a-d plus b-c
# would have matched both objects.

# %%
r2 = np.sqrt(2.0)
g = [(0.0, 0.0), (r2, np.sqrt(2.1))]
d = [(r2, 0.0), (-np.sqrt(2.2), 0.0)]
print(np.round(mse_cost(g, d), 3))
print("greedy pairs:", greedy_match(g, d, 2.0))
