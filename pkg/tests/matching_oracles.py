"""Exhaustive matching oracles for small scenes (brute force over all partial injections)."""

import itertools
import math

import numpy as np


def _pair_cost(g, d):
    return ((g[0] - d[0]) ** 2 + (g[1] - d[1]) ** 2) / 2.0


def all_matchings(gt, det, threshold):
    """Every one-to-one set of (gt, det) pairs whose costs are under ``threshold``."""
    allowed = {(i, j): _pair_cost(g, d) for i, g in enumerate(gt) for j, d in enumerate(det)
               if _pair_cost(g, d) < threshold}
    out = []
    n_g, n_d = len(gt), len(det)
    for k in range(min(n_g, n_d) + 1):
        for gs in itertools.combinations(range(n_g), k):
            for ds in itertools.permutations(range(n_d), k):
                pairs = tuple(zip(gs, ds))
                if all(p in allowed for p in pairs):
                    out.append((pairs, [allowed[p] for p in pairs]))
    return out


def min_total_cost(gt, det, threshold):
    """Maximum-cardinality matching of least total cost."""
    best = min(all_matchings(gt, det, threshold),
               key=lambda m: (-len(m[0]), math.fsum(m[1])))
    return set(best[0])


def lexicographic(gt, det, threshold):
    """Matching whose ascending cost vector (padded with inf) is lexicographically least."""
    width = min(len(gt), len(det))

    def key(m):
        costs = sorted(m[1])
        return costs + [math.inf] * (width - len(costs))

    return set(min(all_matchings(gt, det, threshold), key=key)[0])


def spread_scene(rng, n_gt, n_det, min_gap=8.0, jitter=0.5, box=(40.0, 20.0)):
    """Objects at least ``min_gap`` apart, detections near a subset of them."""
    gt = []
    while len(gt) < n_gt:
        p = rng.uniform((-box[0], -box[1]), box)
        if all(np.hypot(*(p - q)) >= min_gap for q in gt):
            gt.append(p)
    hit = rng.permutation(n_gt)[:min(n_gt, n_det)]
    det = [gt[i] + rng.uniform(-jitter, jitter, 2) for i in hit]
    while len(det) < n_det:
        p = rng.uniform((-box[0], -box[1]), box)
        if all(np.hypot(*(p - q)) >= min_gap / 2 for q in gt):
            det.append(p)
    det = [det[i] for i in rng.permutation(len(det))]
    return [tuple(p) for p in gt], [tuple(p) for p in det]
