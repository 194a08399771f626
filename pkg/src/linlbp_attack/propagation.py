"""LinLBP posterior propagation, classification metrics, and the RW classifier."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import NEGATIVE, POSITIVE, Graph, TrainingSet


class DivergenceError(ArithmeticError):
    """Propagation produced non-finite scores; the edge weight is too large."""


@dataclass(frozen=True)
class LinLBPParams:
    theta: float = 0.5
    weight: float = 0.01
    max_iters: int = 100
    tol: float = 1e-4

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if not 0 < self.weight <= 0.5:
            raise ValueError(f"weight must lie in (0, 0.5], got {self.weight}")
        if self.max_iters < 1 or self.tol <= 0:
            raise ValueError("max_iters must be >= 1 and tol > 0")


@dataclass
class PosteriorState:
    prior: np.ndarray
    posterior: np.ndarray
    iterations_run: int
    converged: bool


def assign_priors(g: Graph, train: TrainingSet, params: LinLBPParams) -> np.ndarray:
    q = np.zeros(g.node_count)
    q[train.labeled_positive] = params.theta
    q[train.labeled_negative] = -params.theta
    return q


def flip_matrix(n: int, u: np.ndarray, v: np.ndarray, insert: np.ndarray) -> sp.csr_matrix:
    """Symmetric +1/-1 change matrix for insert/delete flips on pairs (u, v)."""
    sign = np.where(insert, 1.0, -1.0)
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    return sp.csr_matrix((np.concatenate([sign, sign]), (rows, cols)), shape=(n, n))


def effective_adjacency(g: Graph, overlay=None) -> sp.csr_matrix:
    """Adjacency |A - B| of the graph with ``overlay`` flips applied.

    ``overlay`` is anything with ``u``, ``v``, ``insert`` arrays (a FlipSet).
    """
    adj = g.adjacency()
    if overlay is not None and len(overlay.u):
        adj = adj + flip_matrix(g.node_count, overlay.u, overlay.v, overlay.insert)
        adj.eliminate_zeros()
    adj.sort_indices()
    return adj


def sweep(adj: sp.csr_matrix, q: np.ndarray, p: np.ndarray, weight: float) -> np.ndarray:
    """One update p <- q + w * adj @ p."""
    return q + weight * (adj @ p)


def propagate(g: Graph, q: np.ndarray, params: LinLBPParams, overlay=None,
              adj: sp.csr_matrix | None = None) -> PosteriorState:
    """Iterate LinLBP from p = q until the L-inf change drops below ``params.tol``."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (g.node_count,):
        raise ValueError("prior vector length does not match node count")
    if adj is None:
        adj = effective_adjacency(g, overlay)
    p = q.copy()
    converged = False
    it = 0
    for it in range(1, params.max_iters + 1):
        nxt = sweep(adj, q, p, params.weight)
        if not np.all(np.isfinite(nxt)):
            raise DivergenceError(f"non-finite posterior at iteration {it}; reduce the edge weight")
        delta = np.max(np.abs(nxt - p)) if len(p) else 0.0
        p = nxt
        if delta < params.tol:
            converged = True
            break
    return PosteriorState(q, p, it, converged)


def classify(p: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(p) < 0, NEGATIVE, POSITIVE).astype(np.int8)


def fnr(p: np.ndarray, targets) -> float:
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size == 0:
        raise ValueError("FNR of an empty target set")
    return float(np.count_nonzero(np.asarray(p)[targets] < 0)) / targets.size


def fpr(p: np.ndarray, g: Graph, train: TrainingSet) -> float:
    test = g.labels == NEGATIVE
    test[train.labeled_negative] = False
    n_test = int(test.sum())
    if n_test == 0:
        raise ValueError("no negative test nodes")
    return float(np.count_nonzero(np.asarray(p)[test] >= 0)) / n_test


def rw_classify(g: Graph, train: TrainingSet, iters: int = 10, overlay=None) -> np.ndarray:
    """Random-walk reputation: each node spreads its score evenly over its edges.

    Labeled nodes are clamped to 1 (positive) / 0 (negative); unlabeled start
    at 0.5. Isolated nodes keep their prior. Positive iff score >= 0.5.
    """
    adj = effective_adjacency(g, overlay)
    deg = np.asarray(adj.sum(axis=1)).ravel()
    prior = np.full(g.node_count, 0.5)
    prior[train.labeled_positive] = 1.0
    prior[train.labeled_negative] = 0.0
    clamped = np.zeros(g.node_count, dtype=bool)
    clamped[train.labeled_positive] = True
    clamped[train.labeled_negative] = True
    fixed = clamped | (deg == 0)
    inv_deg = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    p = prior.copy()
    for _ in range(iters):
        p = adj @ (p * inv_deg)
        p[fixed] = prior[fixed]
    return np.where(p >= 0.5, POSITIVE, NEGATIVE).astype(np.int8)


def label_fnr(labels: np.ndarray, targets) -> float:
    """FNR from a predicted label vector rather than scores."""
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size == 0:
        raise ValueError("FNR of an empty target set")
    return float(np.count_nonzero(labels[targets] == NEGATIVE)) / targets.size


def write_posteriors(path: str | Path, p: np.ndarray) -> None:
    labels = classify(p)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "posterior", "label"])
        for u, (val, lab) in enumerate(zip(p.tolist(), labels.tolist())):
            w.writerow([u, repr(val), "P" if lab == POSITIVE else "N"])

