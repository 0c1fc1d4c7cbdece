"""Loop-based reference implementations, written independently of the package."""

from collections import defaultdict


def mle(rows, child, parents, child_states, parent_states):
    """theta[u][x] by explicit counting; ``None`` rows for unseen configurations."""
    joint = defaultdict(int)
    marg = defaultdict(int)
    for r in rows:
        u = tuple(r[p] for p in parents)
        joint[u, r[child]] += 1
        marg[u] += 1
    table = {}
    for u in _product(parent_states):
        if marg[u] == 0:
            table[u] = None
        else:
            table[u] = [joint[u, x] / marg[u] for x in child_states]
    return table


def _product(lists):
    out = [()]
    for states in lists:
        out = [t + (s,) for t in out for s in states]
    return out


def ranks(test, corpus):
    lower = equal = 0
    for v in corpus:
        if v < test:
            lower += 1
        elif v == test:
            equal += 1
    return lower, equal


def pvalue_range(test, corpus):
    lower, equal = ranks(test, corpus)
    n = len(corpus) + 1
    return lower / n, (lower + equal + 1) / n


def significance(p_min, p_max, alpha):
    if p_min > alpha:
        return 0.0
    if p_max < alpha:
        return 1.0
    return (alpha - p_min) / (p_max - p_min)
