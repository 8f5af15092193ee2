import numpy as np
import pytest

from modules.errors import SchemaError
from modules.infrastructure.graph.hin import (
    EdgeType,
    LabelSplit,
    build_meta_path,
    make_label_splits,
    meta_path_adjacency,
)

from .conftest import make_tiny_graph


def brute_force_adjacency(graph, mp):
    """Enumerate every typed walk along the meta-path."""
    n = graph.num_targets
    adj = np.eye(n, dtype=bool)
    for start in range(n):
        frontier = {start}
        for k, et_name in enumerate(mp.edge_sequence):
            et = graph.edge_types[et_name]
            forward = et.src_type == mp.node_sequence[k]
            nxt = set()
            for src, dst in graph.edges[et_name].tolist():
                a, b = (src, dst) if forward else (dst, src)
                if a in frontier:
                    nxt.add(b)
            frontier = nxt
        for j in frontier:
            adj[start, j] = True
    return adj


def test_meta_path_adjacency_tiny_graph(tiny_graph):
    pap = meta_path_adjacency(tiny_graph, tiny_graph.meta_paths[0]).adjacency
    expected = np.eye(6, dtype=bool)
    for a, b in [(0, 3), (1, 4), (2, 5)]:
        expected[a, b] = expected[b, a] = True
    np.testing.assert_array_equal(pap, expected)

    psp = meta_path_adjacency(tiny_graph, tiny_graph.meta_paths[1])
    np.testing.assert_array_equal(psp.neighbors(0), [0, 2, 4])


def test_meta_path_adjacency_matches_enumeration():
    rng = np.random.default_rng(3)
    for seed in range(5):
        g = make_tiny_graph(n_target=int(rng.integers(5, 30)), seed=seed)
        n = g.num_targets
        g.edges["pa"] = np.argwhere(rng.random((n, 3)) < 0.3).astype(np.int64)
        g.edges["ps"] = np.argwhere(rng.random((n, 2)) < 0.4).astype(np.int64)
        for mp in g.meta_paths:
            adj = meta_path_adjacency(g, mp).adjacency
            np.testing.assert_array_equal(adj, brute_force_adjacency(g, mp))
            np.testing.assert_array_equal(adj, adj.T)
            assert adj.diagonal().all()


def test_isolated_node_has_only_itself():
    g = make_tiny_graph()
    g.edges["pa"] = g.edges["pa"][g.edges["pa"][:, 0] != 0]
    adj = meta_path_adjacency(g, g.meta_paths[0])
    np.testing.assert_array_equal(adj.neighbors(0), [0])


def test_build_meta_path_walks_edges_backwards():
    ets = {"ap": EdgeType("ap", "author", "paper")}
    mp = build_meta_path("PAP", ["ap", "ap"], ets, "paper")
    assert mp.node_sequence == ("paper", "author", "paper")


def test_build_meta_path_errors():
    ets = {"pa": EdgeType("pa", "paper", "author"), "as": EdgeType("as", "author", "subject")}
    with pytest.raises(SchemaError):
        build_meta_path("bad", ["pa", "missing"], ets, "paper")
    with pytest.raises(SchemaError):
        build_meta_path("open", ["pa", "as"], ets, "paper")
    with pytest.raises(SchemaError):
        build_meta_path("short", ["pa"], ets, "paper")


def test_validate_rejects_out_of_range_edges(tiny_graph):
    tiny_graph.edges["pa"] = np.array([[0, 7]], dtype=np.int64)
    with pytest.raises(SchemaError):
        tiny_graph.validate()


def test_homogeneous_graph_warns(caplog):
    g = make_tiny_graph()
    g.node_types = ["paper"]
    g.edge_types = {}
    g.edges = {}
    g.node_counts = {"paper": 6}
    g.features = {"paper": g.features["paper"]}
    g.validate()
    assert "homogeneous" in caplog.text


def test_label_splits_are_disjoint_and_sized():
    labels = np.repeat(np.arange(4), 100)
    splits = make_label_splits(labels, [20, 40, 60], np.random.default_rng(0))
    assert sorted(splits) == [20, 40, 60]
    for size, s in splits.items():
        assert len(s.train_ids) == 4 * size
        assert np.bincount(labels[s.train_ids]).tolist() == [size] * 4
        rest = 400 - 4 * size
        assert len(s.val_ids) == len(s.test_ids) == rest // 2
        assert not set(s.train_ids) & set(s.val_ids)
        assert not set(s.val_ids) & set(s.test_ids)
        assert not set(s.train_ids) & set(s.test_ids)


def test_label_splits_cap_eval_sets_at_1000():
    labels = np.repeat(np.arange(2), 1500)
    s = make_label_splits(labels, [20], np.random.default_rng(1))[20]
    assert len(s.val_ids) == len(s.test_ids) == 1000


def test_label_split_overlap_rejected():
    with pytest.raises(ValueError):
        LabelSplit(1, [0, 1], [1, 2], [3])
