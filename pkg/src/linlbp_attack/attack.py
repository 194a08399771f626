"""Structural evasion attack on LinLBP.

Alternates a propagation sweep on the currently perturbed graph with a few
projected-gradient steps on each target's row of the (relaxed) adversarial
matrix, followed by binarization and symmetrization of target-target entries.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costs import CostModel, adjusted_cost_row, total_cost
from .graph import Graph, TrainingSet
from .propagation import (DivergenceError, LinLBPParams, assign_priors,
                          effective_adjacency, fnr, propagate, sweep)

log = logging.getLogger(__name__)

ONE_SIDED = "one-sided"
SIGN = "sign"
THRESHOLD = "threshold"
FILL = "fill"


@dataclass(frozen=True)
class AttackConfig:
    lam: float = 1000.0
    eta: float = 0.1
    budget_k: int = 20
    inner_iters: int = 4
    outer_iters: int = 10
    fnr_stall_window: int = 2
    # "one-sided": d|a - b|/db = 1 - 2a on [0, 1]; "sign": sign(b - a) with sign(0) = 0
    gradient_mode: str = ONE_SIDED
    # "threshold": only entries above 0.5; "fill": then top up to K with the
    # largest remaining positive entries
    binarize_mode: str = FILL
    threads: int = 1

    def __post_init__(self):
        if self.lam <= 0 or self.eta < 0:
            raise ValueError("lambda must be > 0 and eta >= 0")
        if self.budget_k < 0:
            raise ValueError("budget K must be >= 0")
        if self.inner_iters < 1 or self.outer_iters < 1 or self.fnr_stall_window < 1:
            raise ValueError("iteration counts must be >= 1")
        if self.gradient_mode not in (ONE_SIDED, SIGN):
            raise ValueError(f"unknown gradient mode {self.gradient_mode!r}")
        if self.binarize_mode not in (THRESHOLD, FILL):
            raise ValueError(f"unknown binarize mode {self.binarize_mode!r}")


@dataclass
class FlipSet:
    """Unordered node pairs (u < v) whose connection state is toggled."""

    u: np.ndarray
    v: np.ndarray
    insert: np.ndarray

    @classmethod
    def empty(cls) -> "FlipSet":
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, bool))

    @classmethod
    def from_pairs(cls, g: Graph, a, b) -> "FlipSet":
        """Deduplicate pairs and tag each as insert (absent in ``g``) or delete."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if a.size == 0:
            return cls.empty()
        if np.any(a == b):
            raise ValueError("self-pairs cannot be flipped")
        key = np.unique(np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1), axis=0)
        u, v = key[:, 0], key[:, 1]
        exists = np.asarray(g.adjacency()[u, v]).ravel() > 0
        return cls(u, v, ~exists)

    def __len__(self) -> int:
        return len(self.u)

    @property
    def added(self) -> int:
        return int(self.insert.sum())

    @property
    def deleted(self) -> int:
        return int(len(self) - self.insert.sum())

    def pairs(self) -> set[tuple[int, int]]:
        return set(zip(self.u.tolist(), self.v.tolist()))

    def incident_counts(self, n: int) -> np.ndarray:
        return np.bincount(self.u, minlength=n) + np.bincount(self.v, minlength=n)

    def remap(self, ids: np.ndarray, g: Graph) -> "FlipSet":
        """Translate node ids through ``ids`` and re-tag against graph ``g``."""
        return FlipSet.from_pairs(g, ids[self.u], ids[self.v])


@dataclass
class PerturbationState:
    """Binarized target rows of the adversarial matrix (column indices set to 1)."""

    targets: np.ndarray
    binary_rows: dict[int, np.ndarray]

    @classmethod
    def initial(cls, targets) -> "PerturbationState":
        targets = np.asarray(targets, dtype=np.int64)
        return cls(targets, {int(u): np.zeros(0, np.int64) for u in targets})

    def dense_row(self, u: int, n: int) -> np.ndarray:
        row = np.zeros(n)
        row[self.binary_rows[u]] = 1.0
        return row

    def flip_count_per_node(self, n: int) -> np.ndarray:
        counts = np.zeros(n, dtype=np.int64)
        for u, cols in self.binary_rows.items():
            counts[u] += len(cols)
        return counts

    def to_flips(self, g: Graph) -> FlipSet:
        a = [np.full(len(c), u, dtype=np.int64) for u, c in self.binary_rows.items()]
        b = [c for c in self.binary_rows.values()]
        if not a:
            return FlipSet.empty()
        return FlipSet.from_pairs(g, np.concatenate(a), np.concatenate(b))


@dataclass
class AttackResult:
    flips: FlipSet
    fnr_history: list[float]
    total_cost: float
    iterations: int
    state: PerturbationState | None = field(default=None, repr=False)

    @property
    def edges_added(self) -> int:
        return self.flips.added

    @property
    def edges_deleted(self) -> int:
        return self.flips.deleted

    @property
    def final_fnr(self) -> float:
        return self.fnr_history[-1]


def gradient_row(p: np.ndarray, b_row: np.ndarray, a_row: np.ndarray, c_row: np.ndarray,
                 u: int, weight: float, lam: float, mode: str = ONE_SIDED) -> np.ndarray:
    """Gradient of c_u.b_u + lam * p_u(next) with respect to target u's row.

    ``p`` is the posterior of the current outer iteration; the self entry is 0.
    """
    if not np.all(np.isfinite(p)):
        raise ValueError("non-finite posterior passed to gradient_row")
    if mode == ONE_SIDED:
        direction = 1.0 - 2.0 * a_row
    else:
        direction = np.sign(b_row - a_row)
    c = c_row.copy()
    c[u] = 0.0
    grad = c + lam * weight * direction * p
    grad[u] = 0.0
    return grad


def project_row(s: np.ndarray, k: float) -> np.ndarray:
    """Euclidean projection onto {0 <= b <= 1, sum(b) <= k} by break point search."""
    if k < 0:
        raise ValueError("budget must be >= 0")
    s = np.asarray(s, dtype=np.float64)
    b = np.clip(s, 0.0, 1.0)
    if b.sum() <= k:
        return b
    if k == 0:
        return np.zeros_like(b)
    # f(mu) = sum clip(s - mu, 0, 1) is piecewise linear and non-increasing in mu;
    # its kinks are at s_v - 1 (slope gains -1) and s_v (slope returns +1).
    # Only entries with s_v > 0 can be nonzero for mu >= 0.
    sp_ = s[s > 0]
    kinks = np.concatenate([sp_ - 1.0, sp_])
    slope_change = np.concatenate([-np.ones(len(sp_)), np.ones(len(sp_))])
    order = np.argsort(kinks, kind="stable")
    kinks = kinks[order]
    slope_change = slope_change[order]
    slopes = np.cumsum(slope_change)  # slope on (kinks[i], kinks[i+1])
    # f at the first kink equals the count of positive entries (all at the upper bound)
    f = len(sp_) + np.concatenate([[0.0], np.cumsum(slopes[:-1] * np.diff(kinks))])
    i = int(np.searchsorted(-f, -k, side="left"))  # first kink with f <= k
    if i == 0:
        mu = kinks[0]
    elif i == len(kinks):
        mu = kinks[-1]  # f is zero there up to rounding
    else:
        lo, f_lo, slope = kinks[i - 1], f[i - 1], slopes[i - 1]
        mu = lo + (k - f_lo) / slope if slope != 0 else kinks[i]
    mu = max(mu, 0.0)
    return np.clip(s - mu, 0.0, 1.0)


def _top(cand: np.ndarray, vals: np.ndarray, k: int) -> np.ndarray:
    order = np.lexsort((cand, -vals[cand]))
    return cand[order[:k]]


def binarize_row(b_row: np.ndarray, k: int, mode: str = THRESHOLD) -> np.ndarray:
    """Indices set to 1: entries above 0.5, keeping the k largest (lower id on ties).

    In ``fill`` mode a row with fewer than k such entries is topped up with the
    largest remaining entries that are still strictly positive.
    """
    cand = np.flatnonzero(b_row > 0.5)
    if len(cand) > k:
        cand = _top(cand, b_row, k)
    elif mode == FILL and len(cand) < k:
        rest = np.flatnonzero((b_row > 0) & (b_row <= 0.5))
        cand = np.concatenate([cand, _top(rest, b_row, k - len(cand))])
    return np.sort(cand).astype(np.int64)


def symmetrize_targets(state: PerturbationState) -> PerturbationState:
    """A target-target entry survives only if both rows selected it."""
    target_set = set(state.targets.tolist())
    chosen = {u: set(c.tolist()) for u, c in state.binary_rows.items()}
    rows = {}
    for u, cols in chosen.items():
        keep = [v for v in sorted(cols) if v not in target_set or u in chosen[v]]
        rows[u] = np.array(keep, dtype=np.int64)
    return PerturbationState(state.targets, rows)


def pgd_inner(p: np.ndarray, u: int, start_row: np.ndarray, a_row: np.ndarray,
              c_row: np.ndarray, weight: float, cfg: AttackConfig) -> np.ndarray:
    """Run ``cfg.inner_iters`` projected gradient steps on row u."""
    b = start_row.astype(np.float64, copy=True)
    for _ in range(cfg.inner_iters):
        grad = gradient_row(p, b, a_row, c_row, u, weight, cfg.lam, cfg.gradient_mode)
        s = b - cfg.eta * grad
        s[u] = 0.0
        b = project_row(s, cfg.budget_k)
    b[u] = 0.0
    return b


class _RowWorker:
    def __init__(self, g: Graph, target_mask: np.ndarray, cost_model: CostModel,
                 weight: float, cfg: AttackConfig):
        self.g = g
        self.target_mask = target_mask
        self.cost_model = cost_model
        self.weight = weight
        self.cfg = cfg

    def __call__(self, u: int, p: np.ndarray, state: PerturbationState) -> np.ndarray:
        n = self.g.node_count
        a_row = np.zeros(n)
        a_row[self.g.neighbors(u)] = 1.0
        c_row = adjusted_cost_row(self.cost_model, u, self.target_mask, self.g.labels)
        b = pgd_inner(p, u, state.dense_row(u, n), a_row, c_row, self.weight, self.cfg)
        return binarize_row(b, self.cfg.budget_k, self.cfg.binarize_mode)


def run_attack(g: Graph, train: TrainingSet, targets, cost_model: CostModel,
               params: LinLBPParams, cfg: AttackConfig) -> AttackResult:
    """Compute flips that push the targets' LinLBP scores negative.

    Step I advances the posterior by one sweep on the graph perturbed by the
    previous binary rows; Step II updates every target row against that fixed
    posterior. FNR on the fully converged posterior (or on the next sweep when
    the attacker's own model diverges) is tracked per outer iteration, and the
    loop stops once it has not changed for ``cfg.fnr_stall_window``
    consecutive iterations.
    """
    targets = np.unique(np.asarray(targets, dtype=np.int64))
    n = g.node_count
    q = assign_priors(g, train, params)
    target_mask = np.zeros(n, dtype=bool)
    target_mask[targets] = True
    state = PerturbationState.initial(targets)
    worker = _RowWorker(g, target_mask, cost_model, params.weight, cfg)
    p = q.copy()
    flips = FlipSet.empty()
    history: list[float] = []
    counts: list[int] = []
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for t in range(1, cfg.outer_iters + 1):
            adj = effective_adjacency(g, flips)
            p = sweep(adj, q, p, params.weight)
            if not np.all(np.isfinite(p)):
                raise ArithmeticError("posterior diverged during the attack; reduce the edge weight")
            tl = targets.tolist()
            if pool is not None:
                rows = list(pool.map(lambda u: worker(u, p, state), tl))
            else:
                rows = [worker(u, p, state) for u in tl]
            state = symmetrize_targets(PerturbationState(targets, dict(zip(tl, rows))))
            flips = state.to_flips(g)
            adj = effective_adjacency(g, flips)
            try:
                post = propagate(g, q, params, adj=adj).posterior
            except DivergenceError:
                # a substitute weight can make the attacker's own model diverge
                post = sweep(adj, q, p, params.weight)
            history.append(fnr(post, targets))
            counts.append(int(np.count_nonzero(post[targets] < 0)))
            log.debug("outer %d: fnr=%.4f flips=%d", t, history[-1], len(flips))
            w = cfg.fnr_stall_window
            if len(counts) > w and len(set(counts[-(w + 1):])) == 1:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    cost = total_cost(cost_model, flips.u, flips.v, g.labels)
    return AttackResult(flips, history, cost, len(history), state)


def write_flips(path: str | Path, flips: FlipSet, costs: np.ndarray | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "action", "cost"])
        for i, (a, b, ins) in enumerate(zip(flips.u.tolist(), flips.v.tolist(), flips.insert.tolist())):
            c = "" if costs is None else repr(float(costs[i]))
            w.writerow([a, b, "insert" if ins else "delete", c])


def read_flips(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    u, v, ins = [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            u.append(int(row["u"]))
            v.append(int(row["v"]))
            ins.append(row["action"] == "insert")
    return np.array(u, np.int64), np.array(v, np.int64), np.array(ins, bool)


def write_fnr_history(path: str | Path, history: list[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "fnr"])
        for i, val in enumerate(history, 1):
            w.writerow([i, repr(float(val))])
