"""Per-pair edge modification costs (Equal, Uniform, Categorical)."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .graph import NEGATIVE, POSITIVE

EQUAL = "equal"
UNIFORM = "uniform"
CATEGORICAL = "categorical"

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    x = x ^ (x >> np.uint64(30))
    x = x * _M1
    x = x ^ (x >> np.uint64(27))
    x = x * _M2
    return x ^ (x >> np.uint64(31))


def _pair_uniform01(lo: np.ndarray, hi: np.ndarray, seed: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        h = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) * _GOLDEN + np.uint64(1))
        h = _mix64(h ^ lo.astype(np.uint64) * _GOLDEN)
        h = _mix64(h ^ hi.astype(np.uint64))
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


@dataclass(frozen=True)
class CostModel:
    """Symmetric modification cost C(u, v).

    ``node_ids`` optionally maps the caller's node ids to canonical ids, so a
    model used on an induced subgraph prices pairs exactly as on the full graph.
    """

    kind: str = EQUAL
    low: float = 1.0
    high: float = 10.0
    seed: int = 0
    pos_pos: float = 1.0
    pos_compromised: float = 1.0e1
    pos_uncompromised: float = 1.0e2
    compromised: frozenset = field(default_factory=frozenset)
    node_ids: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (EQUAL, UNIFORM, CATEGORICAL):
            raise ValueError(f"unknown cost kind {self.kind!r}")

    def restrict(self, node_ids: np.ndarray) -> "CostModel":
        """Model for a subgraph whose node ``i`` is canonical node ``node_ids[i]``."""
        base = self.node_ids
        ids = np.asarray(node_ids, dtype=np.int64)
        return replace(self, node_ids=ids if base is None else base[ids])

    def _canon(self, x):
        return x if self.node_ids is None else self.node_ids[x]

    def row(self, u: int, labels: np.ndarray) -> np.ndarray:
        """C(u, v) for every v; the self entry is +inf."""
        n = len(labels)
        if self.kind == EQUAL:
            out = np.ones(n)
        elif self.kind == UNIFORM:
            cu = np.uint64(self._canon(u))
            cv = self._canon(np.arange(n)).astype(np.uint64)
            lo = np.minimum(cv, cu)
            hi = np.maximum(cv, cu)
            out = self.low + (self.high - self.low) * _pair_uniform01(lo, hi, self.seed)
        else:
            out = self._categorical(np.full(n, u), np.arange(n), labels)
        out[u] = np.inf
        return out

    def _categorical(self, u: np.ndarray, v: np.ndarray, labels: np.ndarray) -> np.ndarray:
        lu, lv = labels[u], labels[v]
        comp = np.zeros(len(labels), dtype=bool)
        if self.compromised:
            canon = self._canon(np.arange(len(labels)))
            comp = np.isin(canon, np.fromiter(self.compromised, dtype=np.int64))
        pu, pv = lu == POSITIVE, lv == POSITIVE
        out = np.full(len(u), self.pos_uncompromised)
        one_pos = pu ^ pv
        other = np.where(pu, v, u)
        out[one_pos & comp[other]] = self.pos_compromised
        out[pu & pv] = self.pos_pos
        return out

    def pair(self, u: int, v: int, labels: np.ndarray) -> float:
        if u == v:
            raise ValueError("cost of a self-pair is undefined")
        if self.kind == EQUAL:
            return 1.0
        if self.kind == UNIFORM:
            a, b = self._canon(u), self._canon(v)
            lo, hi = np.array([min(a, b)]), np.array([max(a, b)])
            return float(self.low + (self.high - self.low) * _pair_uniform01(lo, hi, self.seed)[0])
        return float(self._categorical(np.array([u]), np.array([v]), labels)[0])

    def pairs(self, u: np.ndarray, v: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """Vectorized C(u_i, v_i)."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        if np.any(u == v):
            raise ValueError("cost of a self-pair is undefined")
        if self.kind == EQUAL:
            return np.ones(len(u))
        if self.kind == UNIFORM:
            a, b = self._canon(u).astype(np.uint64), self._canon(v).astype(np.uint64)
            return self.low + (self.high - self.low) * _pair_uniform01(
                np.minimum(a, b), np.maximum(a, b), self.seed)
        return self._categorical(u, v, labels)


def pair_cost(model: CostModel, u: int, v: int, labels: np.ndarray) -> float:
    return model.pair(u, v, labels)


def adjusted_cost_row(model: CostModel, u: int, target_mask: np.ndarray,
                      labels: np.ndarray) -> np.ndarray:
    """Cost row used by the attack objective: target-target pairs are halved
    because both endpoints' rows carry them."""
    c = model.row(u, labels)
    c[target_mask] *= 0.5
    c[u] = np.inf
    return c


def total_cost(model: CostModel, u, v, labels: np.ndarray) -> float:
    """Sum of C over distinct unordered pairs (u_i, v_i)."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    if u.size == 0:
        return 0.0
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    key = np.unique(np.stack([lo, hi], axis=1), axis=0)
    return float(np.sum(model.pairs(key[:, 0], key[:, 1], labels)))


def sample_compromised(labels: np.ndarray, count: int, seed) -> frozenset:
    negs = np.flatnonzero(labels == NEGATIVE)
    count = min(count, len(negs))
    rng = np.random.default_rng(seed)
    return frozenset(rng.choice(negs, size=count, replace=False).tolist())


def make_cost_model(kind: str, labels: np.ndarray, seed: int, compromised_count: int = 100) -> CostModel:
    kind = kind.lower()
    if kind == CATEGORICAL:
        return CostModel(kind, seed=seed, compromised=sample_compromised(labels, compromised_count, seed))
    return CostModel(kind, seed=seed)
