import logging
import pickle
import tempfile
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from dgnn.datasets import (
    PROFILES,
    DatasetError,
    SbmSpec,
    compare_to_profile,
    convert_geom_gcn,
    convert_linqs,
    convert_planetoid,
    dataset_stats,
    embedding_header,
    expected_sbm_homophily,
    export_embeddings,
    find_dataset,
    generate_sbm,
    load_dataset,
    read_embeddings,
    write_dataset,
)
from dgnn.graph import build_graph, homophily_rate
from dgnn.model import EmbeddingState


def write_files(d, edges, feats, labels):
    d.mkdir(parents=True, exist_ok=True)
    (d / "graph.edges").write_text(edges)
    (d / "features.csv").write_text(feats)
    (d / "labels.csv").write_text(labels)
    return d


def test_load_fixture(tiny_dir):
    g = load_dataset(tiny_dir)
    assert (g.n, g.num_features, g.num_classes) == (6, 3, 2)
    s = dataset_stats(g)
    assert s["edges"] == 9 and s["unique_edges"] == 7
    assert s["homophily"] == pytest.approx(6 / 7)


def test_malformed_edge_line_named(tmp_path):
    d = write_files(tmp_path / "bad", "0 1\n1 2 3\n", "1\n2\n3\n", "0\n0\n1\n")
    with pytest.raises(DatasetError, match=r"graph.edges:2"):
        load_dataset(d)
    d = write_files(tmp_path / "bad2", "# c\n0 x\n", "1\n2\n", "0\n1\n")
    with pytest.raises(DatasetError, match=r"graph.edges:2"):
        load_dataset(d)


def test_row_count_and_label_checks(tmp_path):
    with pytest.raises(DatasetError, match="labels"):
        load_dataset(write_files(tmp_path / "a", "", "1\n2\n3\n", "0\n1\n"))
    with pytest.raises(DatasetError, match="gaps"):
        load_dataset(write_files(tmp_path / "b", "", "1\n2\n", "0\n2\n"))
    with pytest.raises(DatasetError, match="widths"):
        load_dataset(write_files(tmp_path / "c", "", "1,2\n3\n", "0\n1\n"))
    with pytest.raises(DatasetError, match="out of range"):
        load_dataset(write_files(tmp_path / "d", "0 5\n", "1\n2\n", "0\n1\n"))
    with pytest.raises(DatasetError, match="labels.csv:2"):
        load_dataset(write_files(tmp_path / "e", "", "1\n2\n", "0\nz\n"))
    with pytest.raises(DatasetError, match="missing"):
        load_dataset(tmp_path / "nothing")


def test_profile_divergence_warns(tmp_path, caplog, tiny_dir):
    d = tmp_path / "cora"
    write_dataset(load_dataset(tiny_dir), d)
    with caplog.at_level(logging.WARNING, logger="dgnn.datasets"):
        load_dataset(d)
    assert "published copy has 2708" in caplog.text


def test_compare_to_profile():
    cora = PROFILES["cora"]
    stats = {"nodes": 2708, "features": 1433, "classes": 7, "edges": 5429, "homophily": 0.81}
    assert compare_to_profile(stats, cora) == []
    assert compare_to_profile({**stats, "edges": 5278}, cora) == [("edges", 5429, 5278)]
    assert compare_to_profile({**stats, "homophily": 0.7}, cora)[0][0] == "homophily"


def test_profiles_table_values():
    c = PROFILES["cora"]
    assert (c.nodes, c.features, c.classes, c.edges, c.homophily) == (2708, 1433, 7, 5429, 0.809)
    assert (c.lam, c.alpha, c.beta, c.layers, c.dropout, c.lr) == (1.0, 2.0, 0.02, 2, 0.25, 0.002)
    ch = PROFILES["chameleon"]
    assert (ch.nodes, ch.features, ch.classes, ch.edges, ch.homophily) == (2277, 2325, 5, 36101, 0.233)


def test_convert_linqs(tmp_path):
    (tmp_path / "x.content").write_text("p1 1 0 A\np2 0 1 B\np3 1 1 A\n")
    (tmp_path / "x.cites").write_text("p1 p2\np2 p3\np3 p1\np1 p2\np9 p1\n")
    convert_linqs(tmp_path / "x.content", tmp_path / "x.cites", tmp_path / "out")
    g = load_dataset(tmp_path / "out")
    assert g.n == 3 and g.n_input_pairs == 4 and g.num_edges == 3
    np.testing.assert_array_equal(g.labels, [0, 1, 0])
    np.testing.assert_array_equal(g.features, [[1, 0], [0, 1], [1, 1]])


def test_convert_geom_gcn(tmp_path):
    (tmp_path / "nodes.tsv").write_text("node_id\tfeature\tlabel\n1\t0,1\t1\n0\t1,0\t0\n2\t1,1\t1\n")
    (tmp_path / "edges.tsv").write_text("node_id\tnode_id\n0\t1\n1\t2\n2\t1\n")
    convert_geom_gcn(tmp_path / "nodes.tsv", tmp_path / "edges.tsv", tmp_path / "out")
    g = load_dataset(tmp_path / "out")
    np.testing.assert_array_equal(g.features, [[1, 0], [0, 1], [1, 1]])
    np.testing.assert_array_equal(g.labels, [0, 1, 1])
    assert g.n_input_pairs == 3 and g.num_edges == 2


def test_convert_planetoid(tmp_path):
    # 5 nodes: 0-2 in allx, test indices {4, 3} listed out of order
    allx = sp.csr_matrix(np.array([[1.0, 0], [0, 1], [1, 1]]))
    ally = np.eye(3)[[0, 1, 2]]
    tx = sp.csr_matrix(np.array([[5.0, 5], [3.0, 3]]))
    ty = np.eye(3)[[2, 1]]
    graph = {0: [1], 1: [0, 2], 2: [1], 3: [4], 4: [3, 4]}
    objs = {"x": allx[:2], "y": ally[:2], "tx": tx, "ty": ty, "allx": allx, "ally": ally,
            "graph": graph}
    for ext, obj in objs.items():
        with open(tmp_path / f"ind.toy.{ext}", "wb") as fh:
            pickle.dump(obj, fh)
    (tmp_path / "ind.toy.test.index").write_text("4\n3\n")
    convert_planetoid(tmp_path, "toy", tmp_path / "out")
    g = load_dataset(tmp_path / "out")
    np.testing.assert_array_equal(g.features[3:], [[3, 3], [5, 5]])
    np.testing.assert_array_equal(g.labels, [0, 1, 2, 1, 2])
    assert g.num_edges == 3


def test_sbm_homophily_extremes():
    assert homophily_rate(generate_sbm(SbmSpec(p_in=0.2, p_out=0.0))) == 1.0
    assert homophily_rate(generate_sbm(SbmSpec(p_in=0.0, p_out=0.05))) == 0.0


def test_sbm_homophily_expected_value():
    spec = SbmSpec(nodes_per_class=100, classes=2, p_in=0.1, p_out=0.01)
    expect = 0.1 * 99 / (0.1 * 99 + 0.01 * 100)
    assert expected_sbm_homophily(spec) == pytest.approx(expect)
    assert expect == pytest.approx(0.91, abs=0.01)
    h = homophily_rate(generate_sbm(spec))
    assert abs(h - 0.91) <= 0.03
    mc = np.mean([homophily_rate(generate_sbm(SbmSpec(100, 2, 0.1, 0.01, seed=s))) for s in range(20)])
    assert mc == pytest.approx(expect, abs=0.01)


def test_sbm_deterministic():
    a, b = generate_sbm(SbmSpec(seed=9)), generate_sbm(SbmSpec(seed=9))
    assert a.features.tobytes() == b.features.tobytes()
    np.testing.assert_array_equal(a.edges, b.edges)
    with pytest.raises(ValueError):
        SbmSpec(p_in=1.5)


def test_export_small(tmp_path):
    s = EmbeddingState(np.array([[1.0], [2.0]]), np.array([[3.0], [4.0]]), np.array([[5.0], [6.0]]))
    path = export_embeddings(s, [0, 1], tmp_path / "e.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "node_id,label,f_0,h_0,hf_0"
    assert len(lines) == 3 and all(len(l.split(",")) == 5 for l in lines)
    assert embedding_header(2) == ["node_id", "label", "f_0", "f_1", "h_0", "h_1", "hf_0", "hf_1"]


def test_export_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    mats = [rng.standard_normal((7, 3)) * 10 ** rng.uniform(-3, 3) for _ in range(3)]
    labels = rng.integers(0, 4, 7)
    export_embeddings(EmbeddingState(*mats), labels, tmp_path / "e.csv")
    y, *back = read_embeddings(tmp_path / "e.csv")
    np.testing.assert_array_equal(y, labels)
    for m, b in zip(mats, back):
        np.testing.assert_allclose(b, m, rtol=1e-8, atol=0)
    with pytest.raises(OSError, match="cannot write"):
        export_embeddings(EmbeddingState(*mats), labels, tmp_path / "no" / "dir" / "e.csv")


def test_find_dataset(monkeypatch, tmp_path):
    monkeypatch.setenv("DGNN_DATA", str(tmp_path))
    assert find_dataset("cora") == tmp_path / "cora"
    assert find_dataset("cora", "elsewhere").as_posix() == "elsewhere/cora"


@given(st.integers(2, 12), st.integers(0, 10_000))
def test_write_load_roundtrip(n, seed):
    rng = np.random.default_rng(seed)
    pairs = rng.integers(0, n, (3 * n, 2))
    c = int(rng.integers(1, 4))
    labels = rng.permutation(np.arange(n) % c)
    g = build_graph(pairs, rng.standard_normal((n, 3)), labels)
    with tempfile.TemporaryDirectory() as tmp:
        write_dataset(g, Path(tmp) / "g")
        back = load_dataset(Path(tmp) / "g")
    np.testing.assert_array_equal(back.edges, g.edges)
    np.testing.assert_array_equal(back.labels, g.labels)
    np.testing.assert_allclose(back.features, g.features, rtol=1e-8)
