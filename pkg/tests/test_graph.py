import math
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linlbp_attack import graph as G
from oracles import brute_clustering, random_graph


def write(tmp_path, text, name="g.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


def edge_set(g):
    u, v = g.edges()
    return set(zip(u.tolist(), v.tolist()))


def test_load_simple_path(tmp_path):
    g = G.load_edge_list(write(tmp_path, "0 1\n1 2"))
    assert g.node_count == 3
    assert edge_set(g) == {(0, 1), (1, 2)}
    assert np.all(g.labels == G.UNLABELED)


def test_load_dedups_and_symmetrizes(tmp_path):
    g = G.load_edge_list(write(tmp_path, "0 1\n1 0\n0 1"))
    assert g.node_count == 2
    assert g.edge_count == 1
    g.check()


def test_load_comments_whitespace_and_id_compaction(tmp_path):
    g = G.load_edge_list(write(tmp_path, "# header\n10\t30\n\n30   20\n"))
    assert g.node_count == 3
    assert g.original_ids.tolist() == [10, 20, 30]
    assert edge_set(g) == {(0, 2), (1, 2)}
    G.save_id_map(g, tmp_path / "ids.txt")
    assert (tmp_path / "ids.txt").read_text().split("\n")[:3] == ["0 10", "1 20", "2 30"]


def test_load_self_loop_dropped(tmp_path):
    g = G.load_edge_list(write(tmp_path, "0 0\n0 1\n"))
    assert g.edge_count == 1
    g.check()


def test_load_parse_error_reports_line(tmp_path):
    with pytest.raises(G.GraphError, match=":3:"):
        G.load_edge_list(write(tmp_path, "0 1\n1 2\n1 x\n"))
    with pytest.raises(G.GraphError, match=":2:"):
        G.load_edge_list(write(tmp_path, "0 1\n7\n"))


def test_load_empty_graph(tmp_path):
    with pytest.raises(G.GraphError, match="empty"):
        G.load_edge_list(write(tmp_path, "# nothing here\n\n"))


def test_roundtrip(tmp_path, rng):
    g = random_graph(30, 0.2, rng)
    G.save_edge_list(g, tmp_path / "a.txt")
    h = G.load_edge_list(tmp_path / "a.txt")
    G.save_edge_list(h, tmp_path / "b.txt")
    assert (tmp_path / "a.txt").read_text() == (tmp_path / "b.txt").read_text()
    if h.node_count == g.node_count:
        assert np.array_equal(g.indptr, h.indptr) and np.array_equal(g.indices, h.indices)


def test_labels_file_roundtrip(tmp_path):
    g = G.from_edges(4, [0, 1, 2], [1, 2, 3], labels=[1, -1, 0, 1])
    G.save_labels(g, tmp_path / "l.txt")
    h = G.load_labels(g.with_labels(np.zeros(4)), tmp_path / "l.txt")
    assert h.labels.tolist() == [1, -1, 0, 1]
    (tmp_path / "bad.txt").write_text("0 P\n9 N\n")
    with pytest.raises(G.GraphError, match=":2:"):
        G.load_labels(g, tmp_path / "bad.txt")


@pytest.mark.skipif(not os.environ.get("LINLBP_FACEBOOK"), reason="LINLBP_FACEBOOK not set")
def test_facebook_file_shape():
    g = G.load_edge_list(os.environ["LINLBP_FACEBOOK"])
    assert (g.node_count, g.edge_count) == (4039, 88234)


def test_surrogate_shape():
    g = G.surrogate_social_graph(seed=0)
    assert (g.node_count, g.edge_count) == (4039, 88234)
    g.check()
    from scipy.sparse.csgraph import connected_components
    assert connected_components(g.adjacency(), directed=False)[0] == 1


def test_toggle_edges():
    g = G.from_edges(4, [0, 1], [1, 2])
    h = G.toggle_edges(g, [0, 3], [1, 0])
    assert edge_set(h) == {(1, 2), (0, 3)}
    h.check()


def triangle():
    return G.from_edges(3, [0, 1, 2], [1, 2, 0], labels=np.full(3, G.NEGATIVE))


def test_synthesize_triangle_no_attack_edges():
    g = G.synthesize_positives(triangle(), G.SynthesisSpec(0, seed=1))
    assert g.node_count == 6
    assert edge_set(g) == {(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)}
    assert (g.labels == G.POSITIVE).sum() == 3
    assert g.labels[:3].tolist() == [G.NEGATIVE] * 3


@pytest.mark.parametrize("seed", range(8))
def test_synthesize_path_one_attack_edge(seed):
    path = G.from_edges(2, [0], [1], labels=np.full(2, G.NEGATIVE))
    g = G.synthesize_positives(path, G.SynthesisSpec(1, seed=seed))
    assert g.node_count == 4 and g.edge_count == 3
    crossing = {(0, 2), (0, 3), (1, 2), (1, 3)}  # all negative-positive pairs
    found = edge_set(g) - {(0, 1), (2, 3)}
    assert len(found) == 1 and found <= crossing


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 25), p=st.floats(0.0, 0.6), ae=st.integers(0, 40), seed=st.integers(0, 2**31))
def test_synthesize_invariants(n, p, ae, seed):
    rng = np.random.default_rng(seed)
    base = random_graph(n, p, rng, labels=np.full(n, G.NEGATIVE))
    ae = min(ae, n * n)
    g = G.synthesize_positives(base, G.SynthesisSpec(ae, seed=seed))
    g.check()
    edges = edge_set(g)
    neg = {(a, b) for a, b in edges if a < n and b < n}
    pos = {(a - n, b - n) for a, b in edges if a >= n and b >= n}
    assert neg == pos == edge_set(base)
    assert len(edges) == 2 * base.edge_count + ae


def test_synthesize_rejects_impossible_and_positive_input():
    path = G.from_edges(2, [0], [1], labels=np.full(2, G.NEGATIVE))
    with pytest.raises(G.GraphError):
        G.synthesize_positives(path, G.SynthesisSpec(5))
    G.synthesize_positives(path, G.SynthesisSpec(4))  # exactly n^2 fits
    with pytest.raises(G.GraphError):
        G.synthesize_positives(path.with_labels([1, -1]), G.SynthesisSpec(1))
    with pytest.raises(G.GraphError):
        G.SynthesisSpec(-1)


def labelled(npos, nneg):
    n = npos + nneg
    return G.from_edges(n, [], [], labels=[G.POSITIVE] * npos + [G.NEGATIVE] * nneg)


def test_sample_training_exhaustive_and_deterministic():
    g = labelled(100, 100)
    t = G.sample_training(g, 100, seed=3)
    assert t.labeled_positive.tolist() == list(range(100))
    assert t.labeled_negative.tolist() == list(range(100, 200))
    g2 = labelled(300, 400)
    a, b = G.sample_training(g2, 100, 9), G.sample_training(g2, 100, 9)
    assert np.array_equal(a.labeled_positive, b.labeled_positive)
    assert np.array_equal(a.labeled_negative, b.labeled_negative)
    assert len(a.labeled_positive) == len(a.labeled_negative) == 100
    a.validate(g2)
    with pytest.raises(G.GraphError):
        G.sample_training(labelled(5, 100), 6, 0)


def test_training_validate_errors():
    g = labelled(2, 2)
    with pytest.raises(G.GraphError):
        G.TrainingSet(np.array([0]), np.array([0])).validate(g)
    with pytest.raises(G.GraphError):
        G.TrainingSet(np.array([2]), np.array([3])).validate(g)
    with pytest.raises(G.GraphError):
        G.TrainingSet(np.array([9]), np.array([3])).validate(g)


def star_graph():
    # negatives: hub 0 with leaves 1..4; positives 5, 6
    return G.from_edges(7, [0, 0, 0, 0, 5, 6], [1, 2, 3, 4, 6, 0],
                        labels=[-1, -1, -1, -1, -1, 1, 1])


def test_partial_graph_identity_at_100():
    g = star_graph()
    sub, ids = G.extract_partial_graph(g, 100, seed=0)
    assert ids.tolist() == list(range(7))
    assert edge_set(sub) == edge_set(g)


@pytest.mark.parametrize("seed", range(10))
def test_partial_graph_star_bfs(seed):
    g = star_graph()
    # every BFS order of 3 negatives from each possible start
    allowed = [{0, 1, 2}] + [{leaf, 0, min(x for x in range(1, 5) if x != leaf)} for leaf in range(1, 5)]
    sub, ids = G.extract_partial_graph(g, 60, seed)
    negs = {int(x) for x in ids if g.labels[x] == G.NEGATIVE}
    assert negs in allowed
    assert {5, 6} <= set(ids.tolist())
    sub.check()


@settings(max_examples=20, deadline=None)
@given(tau=st.floats(0.5, 100), seed=st.integers(0, 1000))
def test_partial_graph_negative_count(tau, seed):
    rng = np.random.default_rng(seed)
    n = 40
    labels = np.where(rng.random(n) < 0.6, G.NEGATIVE, G.POSITIVE)
    g = random_graph(n, 0.08, rng, labels=labels)
    n_neg = int((labels == G.NEGATIVE).sum())
    sub, ids = G.extract_partial_graph(g, tau, seed)
    sub.check()
    assert int((sub.labels == G.NEGATIVE).sum()) == math.ceil(tau / 100 * n_neg - 1e-9)
    assert np.array_equal(sub.labels, g.labels[ids])
    # induced: every kept edge exists in g
    for a, b in edge_set(sub):
        assert g.has_edge(int(ids[a]), int(ids[b]))


def test_partial_graph_errors():
    with pytest.raises(G.GraphError):
        G.extract_partial_graph(star_graph(), 0, 0)
    with pytest.raises(G.GraphError):
        G.extract_partial_graph(star_graph(), 101, 0)
    with pytest.raises(G.GraphError):
        G.extract_partial_graph(labelled(3, 0), 50, 0)


def test_clustering_examples():
    assert G.avg_clustering_coefficient(triangle(), [0, 1, 2]) == 1.0
    path = G.from_edges(3, [0, 1], [1, 2])
    assert G.avg_clustering_coefficient(path, [1]) == 0.0
    with pytest.raises(G.GraphError):
        G.avg_clustering_coefficient(path, [])


@pytest.mark.parametrize("seed", range(10))
def test_clustering_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(8, 0.5, rng)
    nodes = np.arange(8)
    expected = np.mean([brute_clustering(g, u) for u in nodes])
    assert G.avg_clustering_coefficient(g, nodes) == pytest.approx(expected, abs=1e-12)
