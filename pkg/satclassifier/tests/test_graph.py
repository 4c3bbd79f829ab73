"""Tests for the ``graph`` module.

Dense matrices built with explicit loops serve as oracles for the sparse
Laplacian blocks and the gradient operator.
"""

import math

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
import pytest

from ..exceptions import DataFormatError, InvalidInputError
from ..graph import (RBF, Cosine, DataSplit, Graph, GradientOp, PointCloud, ZelnikManorPerona,
                     assemble_laplacian_split, build_graph, compute_weight, gradient_apply, knn_search,
                     load_graph, operator_norm_estimate, save_graph, theorem_norm_bound)


def random_instance(seed, n=20, k=4, dim=3, n_train=5, num_classes=2):
    generator = np.random.default_rng(seed)
    cloud = PointCloud(generator.normal(size=(n, dim)))
    graph = build_graph(cloud, k, RBF(1.0), mode='exact', threads=1)
    train_ids = generator.choice(n, n_train, replace=False)
    train_labels = np.arange(n_train) % num_classes
    return graph, DataSplit(n, train_ids, train_labels, num_classes)


def dense_affinity(graph):
    W = np.zeros((graph.n, graph.n))
    for x in range(graph.n):
        for y, w in zip(graph.neighbors[x], graph.weights[x]):
            W[x, y] = max(W[x, y], w)
            W[y, x] = max(W[y, x], w)
    return W


def test_point_cloud_validation():
    cloud = PointCloud([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
    assert (cloud.n, cloud.dim) == (3, 2)
    assert_array_equal(cloud.ids, [0, 1, 2])
    with pytest.raises(InvalidInputError):
        PointCloud([[0.0, 1.0]])
    with pytest.raises(InvalidInputError):
        PointCloud([[0.0, np.nan], [1.0, 2.0]])
    with pytest.raises(InvalidInputError):
        PointCloud([0.0, 1.0, 2.0])


def test_compute_weight():
    assert compute_weight(RBF(3.0), [1.0, 2.0], [1.0, 2.0]) == 1.0
    # d^2 = 25, 2 xi = 18
    assert_allclose(compute_weight(RBF(9.0), [0.0, 0.0], [3.0, 4.0]), math.exp(-25.0 / 18.0), rtol=1e-15)
    assert_allclose(compute_weight(RBF.from_denominator(6.0), [0.0], [2.0]), math.exp(-4.0 / 6.0), rtol=1e-15)
    assert_allclose(compute_weight(ZelnikManorPerona(7), [0.0, 0.0], [1.0, 1.0], aux=(2.0, 0.5)),
                    math.exp(-2.0), rtol=1e-15)
    assert_allclose(compute_weight(Cosine(), [1.0, 0.0], [1.0, 1.0]), 1.0 / math.sqrt(2.0), rtol=1e-15)
    assert compute_weight(Cosine(), [1.0, 0.0], [-1.0, 0.0]) == -1.0


def test_compute_weight_errors():
    with pytest.raises(InvalidInputError):
        compute_weight(RBF(1.0), [0.0, 0.0], [0.0])
    with pytest.raises(InvalidInputError):
        compute_weight(Cosine(), [0.0, 0.0], [1.0, 0.0])
    with pytest.raises(InvalidInputError):
        compute_weight(ZelnikManorPerona(7), [0.0], [1.0], aux=(0.0, 1.0))
    with pytest.raises(InvalidInputError):
        RBF(0.0)
    with pytest.raises(InvalidInputError):
        ZelnikManorPerona(0)


def test_knn_search_exact_matches_brute_force(rng):
    cloud = PointCloud(rng.normal(size=(300, 5)))
    indices, sq_dist = knn_search(cloud, 6, mode='exact', threads=2, chunk_size=64)
    d2 = ((cloud.points[:, None, :] - cloud.points[None, :, :]) ** 2).sum(axis=-1)
    np.fill_diagonal(d2, np.inf)
    expected = np.argsort(d2, axis=1, kind='stable')[:, :6]
    assert_array_equal(indices, expected)
    assert_allclose(sq_dist, np.take_along_axis(d2, expected, axis=1), rtol=1e-12)


def test_knn_search_ties_by_id():
    # node 0 is equidistant from 1, 2 and 3
    cloud = PointCloud([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [5.0, 5.0]])
    indices, _ = knn_search(cloud, 2, mode='exact')
    assert_array_equal(indices[0], [1, 2])


def test_knn_search_many_exact_ties():
    # 300 points at squared distance 4 from the origin (node 300), 8 from each other
    cloud = PointCloud(np.vstack([2.0 * np.eye(300), np.zeros((1, 300))]))
    indices, sq_dist = knn_search(cloud, 3, mode='exact', threads=1)
    assert_array_equal(indices[300], [0, 1, 2])
    assert_array_equal(sq_dist[300], [4.0, 4.0, 4.0])
    assert_array_equal(indices[0], [300, 1, 2])
    assert_array_equal(indices[150], [300, 0, 1])
    assert_array_equal(sq_dist[150], [4.0, 8.0, 8.0])


def test_knn_search_colinear_points():
    cloud = PointCloud([[0.0], [1.0], [10.0]])
    indices, sq_dist = knn_search(cloud, 1, mode='exact')
    assert_array_equal(indices[:, 0], [1, 0, 1])
    assert_array_equal(sq_dist[:, 0], [1.0, 1.0, 81.0])


def test_knn_search_approximate_with_full_budget(rng):
    cloud = PointCloud(rng.normal(size=(400, 4)))
    exact, _ = knn_search(cloud, 5, mode='exact')
    approximate, _ = knn_search(cloud, 5, mode='approximate', checks=10000, seed=3)
    assert_array_equal(approximate, exact)


def test_knn_search_rejects_bad_k(rng):
    cloud = PointCloud(rng.normal(size=(5, 2)))
    with pytest.raises(InvalidInputError):
        knn_search(cloud, 5)
    with pytest.raises(InvalidInputError):
        knn_search(cloud, 0)
    with pytest.raises(InvalidInputError):
        knn_search(cloud, 2, mode='fast')


def test_graph_invariants():
    graph, _ = random_instance(0, n=40, k=6)
    W = graph.affinity.toarray()
    assert_array_equal(W, W.T)
    assert_array_equal(np.diag(W), 0.0)
    assert_allclose(W, dense_affinity(graph), rtol=0, atol=0)
    assert np.all((graph.weights > 0) & (graph.weights <= 1))
    assert_allclose(graph.degrees, W.sum(axis=1), rtol=1e-14)
    row_sums = np.asarray(graph.laplacian.sum(axis=1)).ravel()
    assert np.all(np.abs(row_sums) <= 1e-12 * graph.degrees)
    assert graph.neighbors.shape == (40, 5)


def test_graph_is_immutable():
    graph, _ = random_instance(1)
    with pytest.raises(ValueError):
        graph.weights[0, 0] = 2.0


def test_build_graph_k_bounds(rng):
    cloud = PointCloud(rng.normal(size=(6, 2)))
    with pytest.raises(InvalidInputError):
        build_graph(cloud, 1, RBF(1.0))
    with pytest.raises(InvalidInputError):
        build_graph(cloud, 7, RBF(1.0))
    graph = build_graph(cloud, 6, RBF(1.0))
    # k = N: every node is linked to all others
    assert graph.edge_count == 15


def test_build_graph_zmp_local_scales(rng):
    cloud = PointCloud(rng.normal(size=(30, 3)))
    graph = build_graph(cloud, 3, ZelnikManorPerona(7), mode='exact')
    # var(x) is the squared distance to the 7th nearest other point
    dist = np.linalg.norm(cloud.points[:, None] - cloud.points[None], axis=2)
    np.fill_diagonal(dist, np.inf)
    var = np.sort(dist, axis=1)[:, 6] ** 2
    for x in range(cloud.n):
        for y, w in zip(graph.neighbors[x], graph.weights[x]):
            assert_allclose(w, math.exp(-dist[x, y] ** 2 / (var[x] * var[y])), rtol=1e-10)


def test_build_graph_zmp_distance_scale(rng):
    cloud = PointCloud(rng.normal(size=(30, 3)))
    graph = build_graph(cloud, 3, ZelnikManorPerona(4, distance_scale=True), mode='exact')
    _, sq_dist = knn_search(cloud, 4, mode='exact')
    scale = np.sqrt(sq_dist[:, 3])
    x, y = 5, graph.neighbors[5, 0]
    expected = compute_weight(ZelnikManorPerona(4), cloud.points[x], cloud.points[y], aux=(scale[x], scale[y]))
    assert_allclose(graph.weights[5, 0], expected, rtol=1e-12)
    assert ZelnikManorPerona(4, distance_scale=True) != ZelnikManorPerona(4)


def test_build_graph_zmp_duplicates_rejected():
    points = np.zeros((6, 2))
    points[5] = 1.0
    with pytest.raises(InvalidInputError):
        build_graph(PointCloud(points), 2, ZelnikManorPerona(2))


def test_build_graph_cosine_signed():
    cloud = PointCloud([[1.0, 0.0], [-1.0, 0.1], [0.0, 1.0]])
    with pytest.raises(InvalidInputError):
        build_graph(cloud, 3, Cosine(), allow_signed_weights=False)
    graph = build_graph(cloud, 3, Cosine(), allow_signed_weights=True)
    assert np.all(graph.weights >= 0)


def test_energies_agree():
    graph, _ = random_instance(2, n=25, k=5)
    u = np.random.default_rng(0).normal(size=graph.n)
    W = dense_affinity(graph)
    oracle = 0.25 * sum(W[x, y] * (u[x] - u[y]) ** 2 for x in range(graph.n) for y in range(graph.n))
    assert_allclose(graph.dirichlet_energy(u), oracle, rtol=1e-12)
    assert_allclose(graph.edge_energy(u), oracle, rtol=1e-12)


@pytest.mark.parametrize('seed', range(3))
def test_laplacians_are_positive_semidefinite(seed):
    graph, split = random_instance(seed, n=40, k=6, n_train=8, num_classes=3)
    LS = assemble_laplacian_split(graph, split).LS
    generator = np.random.default_rng(seed)
    for _ in range(100):
        v = generator.normal(size=graph.n)
        assert v @ (graph.laplacian @ v) >= -1e-10 * (v @ v)
        v_s = v[split.test_ids]
        assert v_s @ (LS @ v_s) >= -1e-10 * (v_s @ v_s)


def test_data_split_validation():
    split = DataSplit(6, [4, 1], [1, 0], 2)
    assert_array_equal(split.train_ids, [1, 4])
    assert_array_equal(split.train_labels, [0, 1])
    assert_array_equal(split.test_ids, [0, 2, 3, 5])
    assert_array_equal(split.train_onehot, [[1, 0], [0, 1]])
    with pytest.raises(InvalidInputError):
        DataSplit(6, [], [], 2)
    with pytest.raises(InvalidInputError):
        DataSplit(6, [1, 1], [0, 1], 2)
    with pytest.raises(InvalidInputError):
        DataSplit(6, [1, 2], [0, 0], 2)
    with pytest.raises(InvalidInputError):
        DataSplit(6, [1, 7], [0, 1], 2)


@pytest.mark.parametrize('seed', range(5))
@pytest.mark.parametrize('exact_block', [False, True])
def test_laplacian_split_reassembles(seed, exact_block):
    graph, split = random_instance(seed, n=30, k=5, n_train=8, num_classes=3)
    blocks = assemble_laplacian_split(graph, split)
    W = dense_affinity(graph)
    L = np.diag(W.sum(axis=1)) - W
    order = np.concatenate([split.test_ids, split.train_ids])
    assert_allclose(blocks.reassemble().toarray(), L[np.ix_(order, order)], rtol=0, atol=1e-14)

    test, train = split.test_ids, split.train_ids
    W_ss = W[np.ix_(test, test)]
    assert_allclose(blocks.LS.toarray(), np.diag(W_ss.sum(axis=1)) - W_ss, atol=1e-14)
    assert_allclose(blocks.L1.toarray(), np.diag(W[np.ix_(test, train)].sum(axis=1)), atol=1e-14)
    assert_allclose(blocks.L3.toarray(), -W[np.ix_(test, train)], atol=0)
    expected = blocks.LS + blocks.L1 if exact_block else blocks.LS
    assert_allclose(blocks.system_matrix(exact_block).toarray(), expected.toarray())


@pytest.mark.parametrize('seed', range(5))
def test_gradient_decomposition(seed):
    graph, split = random_instance(seed, n=25, k=4, n_train=6, num_classes=3)
    op = GradientOp(graph, split)
    u_test = np.random.default_rng(seed).normal(size=split.n_test)
    for j in range(3):
        u = np.zeros(graph.n)
        u[split.test_ids] = u_test
        u[split.train_ids] = split.train_onehot[:, j]
        oracle = np.empty((graph.n, graph.k - 1))
        for x in range(graph.n):
            for m, (y, w) in enumerate(zip(graph.neighbors[x], graph.weights[x])):
                oracle[x, m] = w * (u[x] - u[y])
        assert_allclose(gradient_apply(op, u_test, j), oracle, rtol=0, atol=1e-10)


@pytest.mark.parametrize('seed', range(5))
def test_gradient_adjoint(seed):
    graph, split = random_instance(seed, n=25, k=5)
    op = GradientOp(graph, split)
    generator = np.random.default_rng(100 + seed)
    u = generator.normal(size=op.n_test)
    p = generator.normal(size=op.A.shape[0])
    assert abs(np.dot(op.apply(u), p) - np.dot(u, op.adjoint(p))) <= 1e-10 * max(1.0, abs(np.dot(u, op.adjoint(p))))


def test_gradient_shape_check():
    graph, split = random_instance(3)
    op = GradientOp(graph, split)
    with pytest.raises(InvalidInputError):
        gradient_apply(op, np.zeros(op.n_test + 1), 0)


def test_two_node_operator_norm():
    graph = Graph([[1], [0]], [[0.5], [0.5]])
    split = DataSplit(2, [0], [0], 1)
    op = GradientOp(graph, split)
    assert_allclose(op.A.toarray(), [[-0.5], [0.5]])
    assert_allclose(operator_norm_estimate(op), 0.5 * math.sqrt(2.0), rtol=1e-12)
    # the full gradient sees both directed rows of the single edge
    assert_allclose(np.linalg.norm(op.full.toarray(), 2), 1.0, rtol=1e-12)


@pytest.mark.parametrize('seed', range(3))
def test_operator_norm_estimate(seed):
    graph, split = random_instance(seed, n=30, k=5)
    op = GradientOp(graph, split)
    true_norm = np.linalg.norm(op.A.toarray(), 2)
    estimate = operator_norm_estimate(op, iters=500)
    assert estimate <= true_norm * (1 + 1e-12)
    assert_allclose(estimate, true_norm, rtol=1e-2)
    assert operator_norm_estimate(op, iters=5) <= estimate + 1e-15
    assert true_norm <= theorem_norm_bound(graph.n, graph.k)


def test_graph_cache_round_trip(tmp_path):
    graph, _ = random_instance(4, n=15, k=4)
    filename = str(tmp_path / 'graph.satg')
    save_graph(graph, filename)
    loaded = load_graph(filename)
    assert (loaded.n, loaded.k) == (graph.n, graph.k)
    assert_array_equal(loaded.neighbors, graph.neighbors)
    assert_array_equal(loaded.weights, graph.weights)


def test_graph_cache_errors(tmp_path):
    graph, _ = random_instance(5, n=10, k=3)
    filename = tmp_path / 'graph.satg'
    save_graph(graph, str(filename))
    payload = filename.read_bytes()

    bad_magic = tmp_path / 'magic.satg'
    bad_magic.write_bytes(b'XXXX' + payload[4:])
    with pytest.raises(DataFormatError):
        load_graph(str(bad_magic))

    truncated = tmp_path / 'truncated.satg'
    truncated.write_bytes(payload[:-8])
    with pytest.raises(DataFormatError):
        load_graph(str(truncated))

    with pytest.raises(DataFormatError):
        load_graph(str(tmp_path / 'missing.satg'))
