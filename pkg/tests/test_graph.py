import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netmfplus import graph
from netmfplus.errors import GraphFormatError, InputError
from netmfplus.graph import (from_edges, load_csr, load_edge_list, save_csr, split_edges,
                             spmm_modified_laplacian, spmm_norm_laplacian, volume)
from netmfplus.synthetic import erdos_renyi


def _write(tmp_path, text, name="g.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def dense_modlap(g, alpha):
    A = g.dense_adjacency()
    s = g.degrees.astype(float) ** -alpha
    return s[:, None] * A * s[None, :]


def dense_normlap(g):
    A = g.dense_adjacency()
    return np.eye(g.n) - A / g.degrees[:, None]


# ---------------------------------------------------------------- loading

def test_load_triangle(tmp_path):
    g = load_edge_list(_write(tmp_path, "0 1\n1 2\n2 0"))
    assert (g.n, g.m) == (3, 3)
    assert list(g.degrees) == [2, 2, 2]
    g.validate()


def test_load_dedup_and_self_loop(tmp_path):
    g = load_edge_list(_write(tmp_path, "0 1\n1 0\n0 0"))
    assert (g.n, g.m) == (2, 1)
    assert list(g.degrees) == [1, 1]


def test_comments_and_one_indexed(tmp_path):
    g = load_edge_list(_write(tmp_path, "# header\n% other\n1 2\n\n2 3\n"), one_indexed=True)
    assert (g.n, g.m) == (3, 2)
    assert list(g.vmap) == [1, 2, 3]


def test_zero_degree_vertices_remapped(tmp_path):
    g = load_edge_list(_write(tmp_path, "0 5\n5 9\n"))
    assert g.n == 3
    assert list(g.vmap) == [0, 5, 9]
    path = graph.write_vmap(g, tmp_path / "g.bin")
    lines = path.read_text().split("\n")
    assert lines[:3] == ["0 0", "1 5", "2 9"]
    assert list(graph.read_vmap(path)) == [0, 5, 9]


def test_unparseable_line_reports_number(tmp_path):
    with pytest.raises(GraphFormatError, match=":2:"):
        load_edge_list(_write(tmp_path, "0 1\nfoo bar\n"))


def test_weighted_rejected(tmp_path):
    with pytest.raises(GraphFormatError, match="weighted"):
        load_edge_list(_write(tmp_path, "0 1 0.5\n"))


def test_empty_rejected(tmp_path):
    with pytest.raises(GraphFormatError):
        load_edge_list(_write(tmp_path, "# nothing\n"))
    with pytest.raises(GraphFormatError):
        load_edge_list(_write(tmp_path, "3 3\n"))


def test_largest_component(tmp_path):
    g = load_edge_list(_write(tmp_path, "0 1\n1 2\n5 6\n"), keep_largest_component=True)
    assert (g.n, g.m) == (3, 2)
    assert list(g.vmap) == [0, 1, 2]


@pytest.mark.parametrize("id64", [False, True])
def test_csr_round_trip(tmp_path, id64):
    g = erdos_renyi(120, 0.05, seed=2)
    if id64:
        g = graph.CsrGraph(g.n, g.m, g.offsets, g.neighbors.astype(np.int64), g.degrees, g.vmap)
    p = tmp_path / "g.csr"
    save_csr(g, p)
    graph.write_vmap(g, p)
    h = load_csr(p)
    assert h == g
    assert h.neighbors.dtype == (np.int64 if id64 else np.int32)
    np.testing.assert_array_equal(h.vmap, g.vmap)
    raw = p.read_bytes()
    assert raw[:4] == b"NMFP"


@pytest.mark.invariant
def test_csr_loader_validates(tmp_path):
    g = from_edges([(0, 1), (1, 2)])
    p = tmp_path / "g.csr"
    save_csr(g, p)
    raw = bytearray(p.read_bytes())
    raw[-4:] = (2).to_bytes(4, "little")  # vertex 2 now lists itself
    p.write_bytes(bytes(raw))
    with pytest.raises(GraphFormatError):
        load_csr(p)
    p.write_bytes(b"XXXX" + bytes(raw[4:]))
    with pytest.raises(GraphFormatError, match="magic"):
        load_csr(p)


def test_volume(triangle, single_edge):
    assert volume(triangle) == 6.0
    assert volume(single_edge) == 2.0


# ---------------------------------------------------------------- operators

def test_modlap_regular_preserves_constants(triangle):
    out = spmm_modified_laplacian(triangle, 0.5, np.ones((3, 1)))
    np.testing.assert_allclose(out, np.ones((3, 1)), atol=1e-15)


def test_modlap_single_edge_permutes(single_edge):
    out = spmm_modified_laplacian(single_edge, 0.5, np.array([[1.0], [0.0]]))
    np.testing.assert_array_equal(out, [[0.0], [1.0]])


def test_normlap_constants_and_hand_value(triangle, er50):
    np.testing.assert_allclose(spmm_norm_laplacian(er50, np.ones((er50.n, 2))), 0.0, atol=1e-14)
    out = spmm_norm_laplacian(triangle, np.array([[1.0], [0.0], [0.0]]))
    np.testing.assert_allclose(out, [[1.0], [-0.5], [-0.5]], atol=1e-15)


def test_operators_match_dense(er50):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((er50.n, 5))
    np.testing.assert_allclose(spmm_modified_laplacian(er50, 0.4, X), dense_modlap(er50, 0.4) @ X,
                               rtol=0, atol=1e-10)
    np.testing.assert_allclose(spmm_norm_laplacian(er50, X), dense_normlap(er50) @ X,
                               rtol=0, atol=1e-10)


def test_operator_dimension_mismatch(er50):
    with pytest.raises(InputError):
        spmm_modified_laplacian(er50, 0.4, np.ones((er50.n + 1, 2)))
    with pytest.raises(InputError):
        spmm_modified_laplacian(er50, 0.7, np.ones((er50.n, 2)))


@pytest.mark.invariant
@pytest.mark.parametrize("seed", range(20))
def test_operators_match_dense_random_graphs(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 201))
    g = erdos_renyi(n, float(rng.uniform(0.03, 0.3)), seed=seed, giant=False)
    g.validate()
    alpha = float(rng.uniform(0.05, 0.5))
    X = rng.standard_normal((g.n, 3))
    np.testing.assert_allclose(spmm_modified_laplacian(g, alpha, X), dense_modlap(g, alpha) @ X,
                               rtol=0, atol=1e-10)
    np.testing.assert_allclose(spmm_norm_laplacian(g, X), dense_normlap(g) @ X, rtol=0, atol=1e-10)


@pytest.mark.invariant
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_modlap_linear(seed):
    rng = np.random.default_rng(seed)
    g = erdos_renyi(60, 0.1, seed=seed % 1000)
    X, Y = rng.standard_normal((2, g.n, 4))
    lhs = spmm_modified_laplacian(g, 0.3, X + Y)
    rhs = spmm_modified_laplacian(g, 0.3, X) + spmm_modified_laplacian(g, 0.3, Y)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_parallel_and_sequential_kernels_agree(er300):
    X = np.random.default_rng(1).standard_normal((er300.n, 7))
    graph.set_parallel(False)
    try:
        seq = spmm_modified_laplacian(er300, 0.45, X)
    finally:
        graph.set_parallel(True)
    par = spmm_modified_laplacian(er300, 0.45, X)
    np.testing.assert_array_equal(seq, par)


@pytest.mark.invariant
@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=1, max_size=120))
def test_from_edges_invariants(pairs):
    if all(u == v for u, v in pairs):
        with pytest.raises(GraphFormatError):
            from_edges(pairs)
        return
    g = from_edges(pairs)
    g.validate()
    want = {(min(u, v), max(u, v)) for u, v in pairs if u != v}
    got = {(int(g.vmap[a]), int(g.vmap[b])) for a, b in g.edges()}
    assert got == want


# ---------------------------------------------------------------- split

def test_split_triangle(triangle):
    train, test = split_edges(triangle, 1 / 3, seed=0)
    assert train.m == 2 and len(test) == 1
    train.validate()


def test_split_deterministic(er300):
    a = split_edges(er300, 0.1, seed=5)
    b = split_edges(er300, 0.1, seed=5)
    assert a[0] == b[0]
    np.testing.assert_array_equal(a[1].pairs, b[1].pairs)


def test_split_requires_one_test_edge(triangle):
    with pytest.raises(InputError, match="at least one test edge required"):
        split_edges(triangle, 0.1, seed=0)


def test_split_size_and_invariants():
    g = erdos_renyi(1000, 0.01, seed=0)
    train, test = split_edges(g, 0.01, seed=1)
    assert len(test) == round(0.01 * g.m)
    train.validate()
    assert train.n == g.n


@pytest.mark.invariant
@pytest.mark.parametrize("seed", range(20))
def test_split_partitions_edges(seed):
    g = erdos_renyi(150, 0.04, seed=seed)
    train, test = split_edges(g, 0.2, seed=seed)
    train.validate()
    full = {tuple(e) for e in g.edges()}
    tr = {tuple(e) for e in train.edges()}
    te = {tuple(e) for e in test.pairs}
    assert tr | te == full
    assert not tr & te
    assert np.all(test.pairs[:, 0] < test.pairs[:, 1])
