import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ecggraph.features import fit_standardization, standardize
from ecggraph.graph import (
    GraphSpec, build_graph_samples, build_graph_spec, pearson_matrix, threshold_adjacency, to_edge_index,
)


def brute_pearson(X):
    n, d = X.shape
    out = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            mi, mj = sum(X[:, i]) / n, sum(X[:, j]) / n
            cov = sum((X[k, i] - mi) * (X[k, j] - mj) for k in range(n))
            vi = sum((X[k, i] - mi) ** 2 for k in range(n))
            vj = sum((X[k, j] - mj) ** 2 for k in range(n))
            out[i, j] = cov / np.sqrt(vi * vj)
    return out


def test_self_and_negation():
    x = np.array([1.0, 4.0, 2.0, 8.0, -3.0])
    c = pearson_matrix(np.column_stack([x, x, -x]))
    assert c[0, 0] == 1.0
    assert c[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert c[0, 2] == pytest.approx(-1.0, abs=1e-12)


def test_three_row_toy_matches_direct_formula():
    X = np.array([[1.0, 2.0, 0.5], [2.0, 1.0, 0.1], [4.0, 3.5, -0.7]])
    np.testing.assert_allclose(pearson_matrix(X), brute_pearson(X), atol=1e-12)


def test_matches_numpy_corrcoef(rng):
    X = rng.standard_normal((300, 20)) @ rng.standard_normal((20, 20))
    np.testing.assert_allclose(pearson_matrix(X), np.corrcoef(X, rowvar=False), atol=1e-12)


def test_needs_two_rows():
    with pytest.raises(ValueError):
        pearson_matrix(np.ones((1, 20)))


def test_zero_variance_column():
    X = np.random.default_rng(0).standard_normal((20, 4))
    X[:, 2] = 3.0
    c = pearson_matrix(X)
    assert c[2, 2] == 1.0
    assert np.all(c[2, [0, 1, 3]] == 0) and np.all(c[[0, 1, 3], 2] == 0)
    assert build_graph_spec(X).flagged == (2,)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 60))
def test_matrix_properties(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 20)) * rng.uniform(0.01, 100, 20) + rng.uniform(-50, 50, 20)
    c = pearson_matrix(X)
    assert np.max(np.abs(c - c.T)) <= 1e-12
    assert np.all(np.diag(c) == 1.0)
    assert np.all((c >= -1) & (c <= 1))
    np.testing.assert_allclose(pearson_matrix(standardize(X, fit_standardization(X))), c, rtol=0, atol=1e-10)


def test_threshold_boundary_and_sign():
    c = np.array([[1.0, 0.9, -0.95], [0.9, 1.0, 0.89], [-0.95, 0.89, 1.0]])
    a = threshold_adjacency(c, 0.9)
    assert a.tolist() == [[1, 1, 0], [1, 1, 0], [0, 0, 1]]
    assert threshold_adjacency(c, 0.9, absolute=True)[0, 2] == 1


def test_identity_graph():
    a = threshold_adjacency(np.eye(20))
    assert np.array_equal(a, np.eye(20, dtype=int))
    assert to_edge_index(a) == [(i, i) for i in range(20)]


def test_full_graph_has_400_sorted_edges():
    e = to_edge_index(np.ones((20, 20), dtype=int))
    assert len(e) == 400 and e == sorted(e)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(-1, 1)), st.floats(0, 1))
def test_adjacency_properties(m, thr):
    c = 0.5 * (m + m.T)
    np.fill_diagonal(c, 1.0)
    a = threshold_adjacency(c, thr)
    assert set(np.unique(a)) <= {0, 1}
    assert np.array_equal(a, a.T) and np.all(np.diag(a) == 1)
    assert set(to_edge_index(a)) == {(i, j) for i in range(6) for j in range(6) if a[i, j] == 1}


def test_mean_aggregator_excludes_self_loops():
    adj = np.eye(4, dtype=int)
    adj[0, 1] = adj[1, 0] = adj[0, 2] = adj[2, 0] = 1
    spec = GraphSpec(np.eye(4), adj, tuple(to_edge_index(adj)))
    M = spec.mean_aggregator()
    np.testing.assert_array_equal(M[0], [0, 0.5, 0.5, 0])
    np.testing.assert_array_equal(M[1], [1, 0, 0, 0])
    np.testing.assert_array_equal(M[3], [0, 0, 0, 0])


def test_json_roundtrip_and_determinism(rng):
    X = rng.standard_normal((200, 20))
    X[:, 5] = X[:, 3] * 2 + 0.01 * X[:, 5]
    a, b = build_graph_spec(X), build_graph_spec(X.copy())
    assert a.edge_index == b.edge_index and a.to_json() == b.to_json()
    back = GraphSpec.from_json(a.to_json())
    np.testing.assert_array_equal(back.corr, a.corr)
    assert back.edge_index == a.edge_index and back.digest() == a.digest()
    assert (3, 5) in a.edge_index and (5, 3) in a.edge_index


def test_graph_samples(rng):
    X = rng.standard_normal((15, 20))
    spec = build_graph_spec(X)
    ds = build_graph_samples(X, ["N"] * 15, spec)
    assert len(ds) == 15
    assert ds.node_features.shape == (15, 20, 1)
    assert ds.node_features[4, 3, 0] == X[4, 3]
    assert ds.edge_index is spec.edge_index
