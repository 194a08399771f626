"""Undirected graph storage, edge-list I/O, positive-node synthesis and sampling."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

POSITIVE = 1
NEGATIVE = -1
UNLABELED = 0

_LABEL_CHARS = {"P": POSITIVE, "N": NEGATIVE, "U": UNLABELED}


class GraphError(ValueError):
    """Raised for malformed graph input or impossible graph operations."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph in compressed (CSR) adjacency form.

    ``indptr``/``indices`` hold per-node neighbor lists sorted ascending;
    ``labels`` holds one of POSITIVE, NEGATIVE, UNLABELED per node.
    ``original_ids`` maps compact ids back to the ids found in the input file.
    """

    indptr: np.ndarray
    indices: np.ndarray
    labels: np.ndarray
    original_ids: np.ndarray | None = field(default=None)

    @property
    def node_count(self) -> int:
        return len(self.indptr) - 1

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < len(nb) and nb[i] == v)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (u, v) arrays of every edge once, with u < v."""
        rows = np.repeat(np.arange(self.node_count), self.degrees())
        mask = rows < self.indices
        return rows[mask], self.indices[mask]

    def adjacency(self, dtype=np.float64) -> sp.csr_matrix:
        data = np.ones(len(self.indices), dtype=dtype)
        return sp.csr_matrix((data, self.indices, self.indptr),
                             shape=(self.node_count, self.node_count))

    def nodes_with_label(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    def with_labels(self, labels: np.ndarray) -> "Graph":
        labels = np.asarray(labels, dtype=np.int8)
        if labels.shape != (self.node_count,):
            raise GraphError("label vector length does not match node count")
        return Graph(self.indptr, self.indices, labels, self.original_ids)

    def check(self) -> None:
        """Validate symmetry, sortedness and absence of self-loops."""
        n = self.node_count
        for u in range(n):
            nb = self.neighbors(u)
            if len(nb) and (np.any(np.diff(nb) <= 0)):
                raise GraphError(f"neighbor list of {u} not strictly ascending")
            if np.any(nb == u):
                raise GraphError(f"self-loop at {u}")
        adj = self.adjacency()
        if (adj != adj.T).nnz:
            raise GraphError("adjacency is not symmetric")


@dataclass(frozen=True)
class TrainingSet:
    labeled_positive: np.ndarray
    labeled_negative: np.ndarray

    def validate(self, g: Graph) -> None:
        pos, neg = self.labeled_positive, self.labeled_negative
        if np.intersect1d(pos, neg).size:
            raise GraphError("training classes overlap")
        n = g.node_count
        for arr in (pos, neg):
            if arr.size and (arr.min() < 0 or arr.max() >= n):
                raise GraphError("training node outside graph")
        if np.any(g.labels[pos] != POSITIVE) or np.any(g.labels[neg] != NEGATIVE):
            raise GraphError("training node label disagrees with graph label")

    @property
    def all_nodes(self) -> np.ndarray:
        return np.union1d(self.labeled_positive, self.labeled_negative)


@dataclass(frozen=True)
class SynthesisSpec:
    attack_edge_count: int
    seed: int = 0

    def __post_init__(self):
        if self.attack_edge_count < 0:
            raise GraphError("attack_edge_count must be >= 0")


def from_edges(n: int, u: Sequence[int], v: Sequence[int], labels=None,
               original_ids=None) -> Graph:
    """Build a Graph on ``n`` nodes from (possibly duplicated, one-directional) edge arrays."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    keep = u != v
    u, v = u[keep], v[keep]
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    adj = sp.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    adj.sum_duplicates()
    adj.sort_indices()
    if labels is None:
        labels = np.full(n, UNLABELED, dtype=np.int8)
    return Graph(adj.indptr.astype(np.int64), adj.indices.astype(np.int64),
                 np.asarray(labels, dtype=np.int8), original_ids)


def toggle_edges(g: Graph, u, v) -> Graph:
    """Materialize the graph with the connection state of each (u, v) pair flipped."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    n = g.node_count
    flip = sp.csr_matrix((np.ones(2 * len(u), dtype=np.int8),
                          (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n))
    flip.sum_duplicates()
    flip.data %= 2
    adj = g.adjacency(np.int8)
    new = (adj + flip).tocsr()
    new.data %= 2
    new.eliminate_zeros()
    new.sort_indices()
    return Graph(new.indptr.astype(np.int64), new.indices.astype(np.int64), g.labels, g.original_ids)


def load_edge_list(path: str | Path) -> Graph:
    """Read a whitespace-separated edge list; '#' starts a comment line.

    Node ids are compacted to ``0..n-1`` in ascending order of the original ids.
    """
    src, dst = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise GraphError(f"{path}:{lineno}: expected two node ids, got {line!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
            src.append(a)
            dst.append(b)
    if not src:
        raise GraphError(f"{path}: graph is empty")
    raw = np.array([src, dst], dtype=np.int64)
    ids, compact = np.unique(raw, return_inverse=True)
    compact = compact.reshape(2, -1)
    return from_edges(len(ids), compact[0], compact[1], original_ids=ids)


def save_edge_list(g: Graph, path: str | Path) -> None:
    u, v = g.edges()
    with open(path, "w") as fh:
        fh.write(f"# nodes {g.node_count} edges {g.edge_count}\n")
        for a, b in zip(u.tolist(), v.tolist()):
            fh.write(f"{a} {b}\n")


def save_id_map(g: Graph, path: str | Path) -> None:
    ids = g.original_ids if g.original_ids is not None else np.arange(g.node_count)
    with open(path, "w") as fh:
        for i, orig in enumerate(ids.tolist()):
            fh.write(f"{i} {orig}\n")


def save_labels(g: Graph, path: str | Path) -> None:
    inv = {v: k for k, v in _LABEL_CHARS.items()}
    with open(path, "w") as fh:
        for u in np.flatnonzero(g.labels != UNLABELED).tolist():
            fh.write(f"{u} {inv[int(g.labels[u])]}\n")


def load_labels(g: Graph, path: str | Path) -> Graph:
    """Attach labels from a "node_id P|N" file (compact ids); unlisted nodes stay unlabeled."""
    labels = np.full(g.node_count, UNLABELED, dtype=np.int8)
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                u, lab = int(parts[0]), _LABEL_CHARS[parts[1].upper()]
            except (ValueError, IndexError, KeyError):
                raise GraphError(f"{path}:{lineno}: bad label line {line!r}") from None
            if not 0 <= u < g.node_count:
                raise GraphError(f"{path}:{lineno}: node {u} outside graph")
            labels[u] = lab
    return g.with_labels(labels)


def synthesize_positives(g: Graph, spec: SynthesisSpec) -> Graph:
    """Replicate an all-negative graph as a positive copy and plant attack edges.

    Nodes ``0..n-1`` keep the original edges and are labeled negative; node
    ``u + n`` copies ``u`` and is labeled positive. ``spec.attack_edge_count``
    distinct positive-negative edges are drawn uniformly (rejection on repeats).
    """
    n = g.node_count
    if np.any(g.labels == POSITIVE):
        raise GraphError("synthesize_positives expects an all-negative graph")
    if spec.attack_edge_count > n * n:
        raise GraphError(f"cannot place {spec.attack_edge_count} distinct attack edges "
                         f"between {n} positive and {n} negative nodes")
    rng = np.random.default_rng(spec.seed)
    chosen: set[int] = set()
    pos_list, neg_list = [], []
    while len(chosen) < spec.attack_edge_count:
        need = spec.attack_edge_count - len(chosen)
        p = rng.integers(0, n, size=need)
        q = rng.integers(0, n, size=need)
        for a, b in zip(p.tolist(), q.tolist()):
            key = a * n + b
            if key in chosen:
                continue
            chosen.add(key)
            pos_list.append(a + n)
            neg_list.append(b)
            if len(chosen) == spec.attack_edge_count:
                break
    u, v = g.edges()
    src = np.concatenate([u, u + n, np.array(pos_list, dtype=np.int64)])
    dst = np.concatenate([v, v + n, np.array(neg_list, dtype=np.int64)])
    labels = np.concatenate([np.full(n, NEGATIVE), np.full(n, POSITIVE)]).astype(np.int8)
    return from_edges(2 * n, src, dst, labels=labels)


def sample_training(g: Graph, per_class: int, seed) -> TrainingSet:
    pos = g.nodes_with_label(POSITIVE)
    neg = g.nodes_with_label(NEGATIVE)
    if len(pos) < per_class or len(neg) < per_class:
        raise GraphError(f"need {per_class} nodes per class, have {len(pos)} positive "
                         f"and {len(neg)} negative")
    rng = np.random.default_rng(seed)
    lp = np.sort(rng.choice(pos, size=per_class, replace=False))
    ln = np.sort(rng.choice(neg, size=per_class, replace=False))
    return TrainingSet(lp, ln)


def bfs_collect(g: Graph, allowed: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Collect ``count`` nodes of the boolean mask ``allowed`` by BFS from random seeds.

    Neighbors are expanded in ascending id order. When a component runs out,
    BFS restarts from a uniformly random unvisited allowed node. Returns the
    nodes in visit order.
    """
    pool = np.flatnonzero(allowed)
    if count > len(pool):
        raise GraphError(f"requested {count} nodes but only {len(pool)} are eligible")
    visited = np.zeros(g.node_count, dtype=bool)
    order: list[int] = []
    while len(order) < count:
        remaining = pool[~visited[pool]]
        root = int(remaining[rng.integers(len(remaining))])
        visited[root] = True
        order.append(root)
        queue = deque([root])
        while queue and len(order) < count:
            x = queue.popleft()
            for y in g.neighbors(x).tolist():
                if allowed[y] and not visited[y]:
                    visited[y] = True
                    order.append(y)
                    queue.append(y)
                    if len(order) == count:
                        break
    return np.array(order, dtype=np.int64)


def induced_subgraph(g: Graph, nodes: Iterable[int]) -> tuple[Graph, np.ndarray]:
    """Subgraph induced by ``nodes``; returns it with the new->old id map."""
    keep = np.unique(np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes,
                                dtype=np.int64))
    remap = np.full(g.node_count, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    u, v = g.edges()
    mask = (remap[u] >= 0) & (remap[v] >= 0)
    sub = from_edges(len(keep), remap[u[mask]], remap[v[mask]], labels=g.labels[keep],
                     original_ids=keep)
    return sub, keep


def extract_partial_graph(g: Graph, tau_percent: float, seed) -> tuple[Graph, np.ndarray]:
    """Attacker's partial view: a BFS-grown tau% of negatives plus every positive node."""
    if not 0 < tau_percent <= 100:
        raise GraphError(f"tau_percent must lie in (0, 100], got {tau_percent}")
    neg_mask = g.labels == NEGATIVE
    n_neg = int(neg_mask.sum())
    if n_neg == 0:
        raise GraphError("graph has no negative nodes")
    want = min(n_neg, math.ceil(tau_percent / 100.0 * n_neg - 1e-9))
    rng = np.random.default_rng(seed)
    negs = bfs_collect(g, neg_mask, want, rng)
    keep = np.union1d(negs, g.nodes_with_label(POSITIVE))
    return induced_subgraph(g, keep)


def avg_clustering_coefficient(g: Graph, nodes) -> float:
    nodes = np.asarray(nodes, dtype=np.int64)
    if nodes.size == 0:
        raise GraphError("clustering coefficient of an empty node set")
    total = 0.0
    for u in nodes.tolist():
        nb = g.neighbors(u)
        d = len(nb)
        if d < 2:
            continue
        links = 0
        for v in nb.tolist():
            links += np.intersect1d(g.neighbors(v), nb, assume_unique=True).size
        total += links / (d * (d - 1))  # each triangle seen twice
    return total / len(nodes)


def surrogate_social_graph(n: int = 4039, m: int = 88234, seed: int = 0,
                           degree_std: float = 50.0, mixing: float = 0.05,
                           max_degree: float = 130.0,
                           community_sizes: tuple[int, int] = (40, 150)) -> Graph:
    """Connected community graph with heterogeneous degrees, sized like the SNAP
    Facebook graph; every node is labeled negative.

    Expected degrees are gamma distributed (mean ``2m/n``, std ``degree_std``,
    capped at ``max_degree``);
    edges are drawn degree-proportionally, a fraction ``mixing`` of them across
    communities. Exactly ``m`` distinct edges are produced and the result is
    connected.
    """
    import networkx as nx

    rng = np.random.default_rng(seed)
    mean = 2.0 * m / n
    shape = (mean / degree_std) ** 2
    weight = np.clip(rng.gamma(shape, mean / shape, size=n), 1.0, max_degree)
    sizes = []
    while sum(sizes) < n:
        sizes.append(int(rng.integers(*community_sizes)))
    sizes[-1] -= sum(sizes) - n
    comm = np.repeat(np.arange(len(sizes)), sizes)
    members = [np.flatnonzero(comm == c) for c in range(len(sizes))]
    cdfs = [np.cumsum(weight[mem]) / weight[mem].sum() for mem in members]
    comm_w = np.array([weight[mem].sum() for mem in members])
    comm_p = comm_w ** 2 / np.sum(comm_w ** 2)
    glob_cdf = np.cumsum(weight) / weight.sum()

    def draw(k):
        intra = rng.random(k) >= mixing
        a = np.searchsorted(glob_cdf, rng.random(k))
        b = np.searchsorted(glob_cdf, rng.random(k))
        cs = rng.choice(len(sizes), size=k, p=comm_p)
        for c in np.unique(cs[intra]):
            sel = intra & (cs == c)
            cnt = int(sel.sum())
            a[sel] = members[c][np.searchsorted(cdfs[c], rng.random(cnt))]
            b[sel] = members[c][np.searchsorted(cdfs[c], rng.random(cnt))]
        return np.minimum(a, b), np.maximum(a, b)

    keys = np.zeros(0, dtype=np.int64)
    while len(keys) < m:
        a, b = draw(m - len(keys) + 1000)
        ok = a != b
        new = np.unique(a[ok] * n + b[ok])
        keys = np.union1d(keys, new)
    keys = rng.permutation(keys)[:m]
    nxg = nx.Graph()
    nxg.add_nodes_from(range(n))
    nxg.add_edges_from(zip((keys // n).tolist(), (keys % n).tolist()))
    comps = sorted(nx.connected_components(nxg), key=len, reverse=True)
    giant = np.array(sorted(comps[0]))
    for comp in comps[1:]:
        x = min(comp)
        nxg.add_edge(x, int(rng.choice(giant)))
        # keep the edge count fixed: drop an edge whose endpoints stay well connected
        while True:
            edges = list(nxg.edges())
            a, b = edges[int(rng.integers(len(edges)))]
            if nxg.degree(a) > 3 and nxg.degree(b) > 3:
                nxg.remove_edge(a, b)
                if nx.has_path(nxg, a, b):
                    break
                nxg.add_edge(a, b)
    edges = np.array(list(nxg.edges()), dtype=np.int64)
    g = from_edges(n, edges[:, 0], edges[:, 1])
    return g.with_labels(np.full(n, NEGATIVE, dtype=np.int8))
