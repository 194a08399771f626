"""Attacker target selection: RAND, CC and CLOSE."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .graph import NEGATIVE, POSITIVE, Graph, GraphError, bfs_collect

METHODS = ("rand", "cc", "close")


@dataclass(frozen=True)
class TargetSpec:
    method: str = "cc"
    count: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.method.lower() not in METHODS:
            raise ValueError(f"unknown target method {self.method!r}")
        if self.count < 1:
            raise ValueError("target count must be >= 1")


def _positives(g: Graph, count: int) -> np.ndarray:
    pos = g.nodes_with_label(POSITIVE)
    if count > len(pos):
        raise GraphError(f"asked for {count} targets but graph has {len(pos)} positive nodes")
    return pos


def select_rand(g: Graph, spec: TargetSpec) -> np.ndarray:
    pos = _positives(g, spec.count)
    rng = np.random.default_rng(spec.seed)
    return np.sort(rng.choice(pos, size=spec.count, replace=False))


def select_cc(g: Graph, spec: TargetSpec) -> np.ndarray:
    _positives(g, spec.count)
    rng = np.random.default_rng(spec.seed)
    return np.sort(bfs_collect(g, g.labels == POSITIVE, spec.count, rng))


def closeness_to_negatives(g: Graph, chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Return (positive ids, 1 / sum of hop distances to every negative node).

    Unreachable negatives count as distance ``n + 1``.
    """
    pos = g.nodes_with_label(POSITIVE)
    neg = g.nodes_with_label(NEGATIVE)
    n = g.node_count
    adj = g.adjacency()
    sums = np.zeros(len(pos))
    reachable_any = False
    for start in range(0, len(pos), chunk):
        src = pos[start:start + chunk]
        dist = shortest_path(adj, method="D", unweighted=True, directed=False, indices=src)
        d = dist[:, neg]
        finite = np.isfinite(d)
        reachable_any |= bool(finite.any())
        sums[start:start + chunk] = np.where(finite, d, n + 1).sum(axis=1)
    if len(neg) and not reachable_any:
        raise GraphError("no negative node is reachable from any positive node")
    with np.errstate(divide="ignore"):
        close = np.where(sums > 0, 1.0 / sums, np.inf)
    return pos, close


def select_close(g: Graph, spec: TargetSpec) -> np.ndarray:
    _positives(g, spec.count)
    pos, close = closeness_to_negatives(g)
    order = np.lexsort((pos, -close))
    return np.sort(pos[order[:spec.count]])


def select_targets(g: Graph, spec: TargetSpec) -> np.ndarray:
    method = spec.method.lower()
    if method == "rand":
        return select_rand(g, spec)
    if method == "cc":
        return select_cc(g, spec)
    return select_close(g, spec)
