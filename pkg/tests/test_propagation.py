import csv
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linlbp_attack import graph as G
from linlbp_attack.attack import FlipSet
from linlbp_attack.propagation import (DivergenceError, LinLBPParams, assign_priors, classify,
                                       effective_adjacency, fnr, fpr, propagate, rw_classify,
                                       write_posteriors)
from oracles import dense_adjacency, dense_linlbp, random_graph


def train(pos=(), neg=()):
    return G.TrainingSet(np.array(pos, np.int64), np.array(neg, np.int64))


def test_params_validation():
    for bad in [dict(theta=0), dict(theta=1.5), dict(weight=0), dict(weight=0.6),
                dict(max_iters=0), dict(tol=0)]:
        with pytest.raises(ValueError):
            LinLBPParams(**bad)


def test_assign_priors():
    g = G.from_edges(3, [], [], labels=[1, -1, 0])
    q = assign_priors(g, train([0], [1]), LinLBPParams(theta=0.5))
    assert q.tolist() == [0.5, -0.5, 0.0]
    q = assign_priors(g, train([0], [1]), LinLBPParams(theta=1.0))
    assert q[1] == -1.0


def test_edgeless_graph():
    g = G.from_edges(4, [], [])
    q = np.array([0.5, -0.5, 0.0, 0.5])
    st_ = propagate(g, q, LinLBPParams())
    assert st_.iterations_run == 1 and st_.converged
    assert np.array_equal(st_.posterior, q)


def test_two_node_fixed_point():
    g = G.from_edges(2, [0], [1])
    q = np.array([0.5, 0.0])
    w = 0.01
    exact = np.array([0.5 / (1 - w * w), w * 0.5 / (1 - w * w)])
    assert exact == pytest.approx([0.50005, 0.0050005], abs=1e-8)
    p = propagate(g, q, LinLBPParams(weight=w, tol=1e-14)).posterior
    assert p == pytest.approx(exact, abs=1e-15)
    # default tolerance stops within tol of the fixed point
    p = propagate(g, q, LinLBPParams(weight=w)).posterior
    assert np.max(np.abs(p - exact)) < 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_ten_node_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(10, 0.4, rng)
    q = rng.choice([-0.5, 0.0, 0.5], size=10)
    w = 0.05
    p = propagate(g, q, LinLBPParams(weight=w, tol=1e-14, max_iters=1000)).posterior
    assert np.max(np.abs(p - dense_linlbp(dense_adjacency(g), q, w))) < 1e-9


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 40), p=st.floats(0, 0.5), w=st.floats(0.001, 0.05), seed=st.integers(0, 10**6))
def test_fixed_point_consistency(n, p, w, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(n, p, rng)
    q = rng.choice([-0.5, 0.0, 0.5], size=n)
    params = LinLBPParams(weight=w)
    res = propagate(g, q, params)
    assert res.converged
    post = res.posterior
    resid = np.max(np.abs(post - (q + w * (g.adjacency() @ post))))
    assert resid < params.tol * (1 + np.max(np.abs(post)))


@pytest.mark.parametrize("seed", range(5))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    n = 30
    g = random_graph(n, 0.2, rng)
    q = rng.choice([-0.5, 0.0, 0.5], size=n)
    perm = rng.permutation(n)  # new id of old node i is perm[i]
    u, v = g.edges()
    h = G.from_edges(n, perm[u], perm[v])
    qh = np.empty(n)
    qh[perm] = q
    params = LinLBPParams(weight=0.02)
    pg = propagate(g, q, params).posterior
    ph = propagate(h, qh, params).posterior
    assert np.max(np.abs(ph[perm] - pg)) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_overlay_equals_materialized(seed):
    rng = np.random.default_rng(seed)
    n = 40
    g = random_graph(n, 0.15, rng)
    a = rng.integers(0, n, 25)
    b = rng.integers(0, n, 25)
    keep = a != b
    flips = FlipSet.from_pairs(g, a[keep], b[keep])
    q = rng.choice([-0.5, 0.0, 0.5], size=n)
    params = LinLBPParams(weight=0.03)
    via_overlay = propagate(g, q, params, overlay=flips).posterior
    materialized = G.toggle_edges(g, flips.u, flips.v)
    direct = propagate(materialized, q, params).posterior
    assert np.array_equal(via_overlay, direct)
    assert (effective_adjacency(g, flips) != materialized.adjacency()).nnz == 0


def test_divergence_raises():
    n = 10
    iu, iv = np.triu_indices(n, 1)
    g = G.from_edges(n, iu, iv)
    q = np.full(n, 0.5)
    with pytest.raises(DivergenceError):
        propagate(g, q, LinLBPParams(weight=0.5, max_iters=10000, tol=1e-300))


def test_prior_length_checked():
    with pytest.raises(ValueError):
        propagate(G.from_edges(3, [], []), np.zeros(2), LinLBPParams())


def test_classify_and_fnr():
    assert classify(np.array([-0.2, 0.0, 0.7])).tolist() == [G.NEGATIVE, G.POSITIVE, G.POSITIVE]
    assert fnr(np.array([0.1, 0.2]), [0, 1]) == 0.0
    assert fnr(np.array([-0.1, -0.2]), [0, 1]) == 1.0
    p = np.concatenate([-np.ones(85), np.ones(15)])
    assert fnr(p, np.arange(100)) == 0.85
    with pytest.raises(ValueError):
        fnr(p, [])


def test_fpr_hand_graph():
    # nodes: 0 pos, 1..4 neg; node 1 is a training negative
    g = G.from_edges(5, [], [], labels=[1, -1, -1, -1, -1])
    t = train([0], [1])
    p = np.array([0.3, 0.2, -0.1, 0.0, -0.4])
    # test negatives are 2, 3, 4; node 3 has p = 0 -> positive
    assert fpr(p, g, t) == pytest.approx(1 / 3)
    assert fpr(np.array([0.3, 0.2, -0.1, -0.2, -0.4]), g, t) == 0.0
    with pytest.raises(ValueError):
        fpr(p, G.from_edges(2, [], [], labels=[1, -1]), train([0], [1]))


def test_rw_classify_examples():
    # 0,1 labeled positive; 2 adjacent only to them; 3 labeled negative; 4 isolated
    g = G.from_edges(5, [0, 1, 3], [2, 2, 0], labels=[1, 1, 0, -1, 0])
    t = train([0, 1], [3])
    labels = rw_classify(g, t, iters=1)
    assert labels[2] == G.POSITIVE  # one step: 1/2 + 1/1 >= 0.5
    labels = rw_classify(g, t, iters=10)
    assert labels[0] == labels[1] == G.POSITIVE and labels[3] == G.NEGATIVE
    assert labels[4] == G.POSITIVE  # isolated node keeps its 0.5 prior


def test_write_posteriors(tmp_path):
    write_posteriors(tmp_path / "p.csv", np.array([0.25, -0.5, 0.0]))
    rows = list(csv.DictReader(open(tmp_path / "p.csv")))
    assert [r["label"] for r in rows] == ["P", "N", "P"]
    assert float(rows[1]["posterior"]) == -0.5


def test_million_edge_smoke(tmp_path):
    rng = np.random.default_rng(0)
    n, m = 200_000, 1_000_000
    u = rng.integers(0, n, m)
    v = rng.integers(0, n, m)
    path = tmp_path / "big.txt"
    t0 = time.perf_counter()
    np.savetxt(path, np.stack([u, v], axis=1), fmt="%d")
    g = G.load_edge_list(path)
    assert g.edge_count >= 990_000
    q = np.zeros(g.node_count)
    q[:100], q[100:200] = 0.5, -0.5
    res = propagate(g, q, LinLBPParams())
    assert res.converged and np.all(np.isfinite(res.posterior))
    assert time.perf_counter() - t0 < 120
