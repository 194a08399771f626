"""Random and Del-Add baseline attacks."""
from __future__ import annotations

import numpy as np

from .attack import FlipSet
from .graph import NEGATIVE, POSITIVE, Graph, GraphError


def _target_rngs(targets: np.ndarray, seed: int):
    ss = np.random.SeedSequence(seed)
    for u, child in zip(targets.tolist(), ss.spawn(len(targets))):
        yield u, np.random.default_rng(child)


def random_attack(g: Graph, targets, k: int, seed: int) -> FlipSet:
    """Toggle the state of k uniformly chosen pairs per target."""
    targets = np.unique(np.asarray(targets, dtype=np.int64))
    n = g.node_count
    if k > n - 1:
        raise GraphError(f"K={k} exceeds the {n - 1} available partners")
    a, b = [], []
    for u, rng in _target_rngs(targets, seed):
        pick = rng.choice(n - 1, size=k, replace=False)
        pick[pick >= u] += 1  # skip u itself
        a.append(np.full(k, u))
        b.append(pick)
    if not a or k == 0:
        return FlipSet.empty()
    return FlipSet.from_pairs(g, np.concatenate(a), np.concatenate(b))


def del_add_attack(g: Graph, targets, k: int, seed: int) -> FlipSet:
    """Cut positive neighbors first, then fill the rest of the budget with new
    edges to random negative nodes."""
    targets = np.unique(np.asarray(targets, dtype=np.int64))
    neg = g.nodes_with_label(NEGATIVE)
    a, b = [], []
    for u, rng in _target_rngs(targets, seed):
        nb = g.neighbors(u)
        pos_nb = nb[g.labels[nb] == POSITIVE]
        d = len(pos_nb)
        if d > k:
            dels = rng.choice(pos_nb, size=k, replace=False)
            adds = np.zeros(0, np.int64)
        else:
            dels = pos_nb
            free = np.setdiff1d(neg, nb, assume_unique=True)
            free = free[free != u]
            if len(free) < k - d:
                raise GraphError(f"target {u}: only {len(free)} non-adjacent negatives for "
                                 f"{k - d} insertions")
            adds = rng.choice(free, size=k - d, replace=False)
        picks = np.concatenate([dels, adds]).astype(np.int64)
        a.append(np.full(len(picks), u))
        b.append(picks)
    if not a:
        return FlipSet.empty()
    return FlipSet.from_pairs(g, np.concatenate(a), np.concatenate(b))
