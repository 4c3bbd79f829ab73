"""Tests for the ``initialization`` module."""

import numpy as np
from numpy.testing import assert_array_equal
import pytest

from ..exceptions import DataFormatError, InvalidInputError
from ..graph import DataSplit, PointCloud
from ..initialization import (External, LinearOvr, NearestNeighbor, Random, init_external,
                              init_linear_ovr, init_method_from_name, init_nearest_neighbor, init_random,
                              initialize, predict_linear_ovr, train_linear_ovr)


def test_random_respects_training_labels():
    split = DataSplit(2000, [3, 10], [1, 0], 2)
    U = init_random(split, seed=0)
    labels = U.labels()
    assert labels[3] == 1 and labels[10] == 0
    assert U.kind == 'binary'
    # uniform draws over two classes
    assert 850 <= np.sum(labels[split.test_ids] == 1) <= 1150


def test_random_is_seeded():
    split = DataSplit(50, [0, 1, 2], [0, 1, 2], 3)
    assert_array_equal(init_random(split, seed=4).values, init_random(split, seed=4).values)
    assert not np.array_equal(init_random(split, seed=4).values, init_random(split, seed=5).values)


def test_random_single_class():
    split = DataSplit(10, [0], [0], 1)
    assert_array_equal(init_random(split).values, np.ones((10, 1)))


def test_nearest_neighbor_labels():
    cloud = PointCloud([[0.0, 0.0], [10.0, 0.0], [0.0, 0.0], [9.0, 1.0], [4.9, 0.0], [5.0, 0.0]])
    split = DataSplit(6, [0, 1], [1, 0], 2)
    labels = init_nearest_neighbor(cloud, split).labels()
    # coincident with node 0, closer to node 1, strictly closer to node 0, equidistant
    assert_array_equal(labels, [1, 0, 1, 0, 1, 1])


def test_nearest_neighbor_brute_force(rng):
    points = rng.normal(size=(10, 3))
    train_ids = np.array([2, 5, 7])
    split = DataSplit(10, train_ids, [0, 1, 2], 3)
    labels = init_nearest_neighbor(PointCloud(points), split, chunk_size=3).labels()
    for i in split.test_ids:
        nearest = train_ids[np.argmin(((points[train_ids] - points[i]) ** 2).sum(axis=1))]
        assert labels[i] == split.train_labels[np.searchsorted(split.train_ids, nearest)]


def test_linear_ovr_separable(rng):
    centers = np.array([[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]])
    features = np.vstack([center + rng.normal(scale=0.5, size=(30, 2)) for center in centers])
    features = (features - features.mean(axis=0)) / features.std(axis=0)
    labels = np.repeat(np.arange(3), 30)
    weights = train_linear_ovr(features, labels, 3, epochs=50, reg_weight=1e-3, seed=1, threads=1)
    assert weights.shape == (3, 3)
    assert_array_equal(predict_linear_ovr(weights, features), labels)


def test_linear_ovr_is_seeded(rng):
    features = rng.normal(size=(40, 4))
    labels = np.arange(40) % 2
    first = train_linear_ovr(features, labels, 2, seed=3, threads=1)
    second = train_linear_ovr(features, labels, 2, seed=3, threads=2)
    assert_array_equal(first, second)


def test_init_linear_ovr(blobs):
    points, truth = blobs
    train_ids = [0, 1, 2, 20, 21, 22, 40, 41, 42]
    split = DataSplit(60, train_ids, truth[train_ids], 3)
    U = init_linear_ovr(PointCloud(points), split, seed=0, threads=1)
    assert 'warning' not in U.meta
    assert_array_equal(U.values[split.train_ids], split.train_onehot)
    assert np.mean(U.labels() == truth) >= 0.9


def test_init_linear_ovr_degenerate():
    cloud = PointCloud(np.ones((8, 2)))
    split = DataSplit(8, [0, 1, 2], [1, 0, 1], 2)
    U = init_linear_ovr(cloud, split)
    assert 'warning' in U.meta
    assert_array_equal(U.labels(), [1, 0, 1, 1, 1, 1, 1, 1])


def test_linear_ovr_validation():
    with pytest.raises(InvalidInputError):
        LinearOvr(epochs=0)
    with pytest.raises(InvalidInputError):
        LinearOvr(reg_weight=0.0)


def test_external(tmp_path):
    path = tmp_path / 'init.txt'
    path.write_text('0\n1\n1\n0\n2\n\n\n')
    split = DataSplit(5, [1, 4], [1, 2], 3)
    U = init_external(str(path), split)
    assert_array_equal(U.labels(), [0, 1, 1, 0, 2])
    assert U.meta['corrections'] == 0

    path.write_text('0\n0\n1\n0\n0\n')
    U = init_external(str(path), split)
    assert_array_equal(U.labels(), [0, 1, 1, 0, 2])
    assert U.meta['corrections'] == 2


def test_external_errors(tmp_path):
    split = DataSplit(8, [0, 1], [0, 1], 2)
    path = tmp_path / 'init.txt'

    path.write_text('0\n1\n0\n0\n1\n1\n2\n0\n')
    with pytest.raises(DataFormatError) as error:
        init_external(str(path), split)
    assert error.value.line == 7

    path.write_text('0\n1\nx\n')
    with pytest.raises(DataFormatError) as error:
        init_external(str(path), split)
    assert error.value.line == 3

    path.write_text('0\n1\n0\n')
    with pytest.raises(DataFormatError) as error:
        init_external(str(path), split)
    assert 'expected 8 labels, found 3' in str(error.value)

    with pytest.raises(DataFormatError):
        init_external(str(tmp_path / 'missing.txt'), split)


def test_dispatch(blobs, tmp_path):
    points, truth = blobs
    cloud = PointCloud(points)
    split = DataSplit(60, [0, 20, 40], [0, 1, 2], 3)
    path = tmp_path / 'init.txt'
    path.write_text('\n'.join(str(label) for label in truth))

    assert_array_equal(initialize(Random(7), cloud, split).values, init_random(split, 7).values)
    assert_array_equal(initialize(NearestNeighbor(), cloud, split).labels(), truth)
    assert_array_equal(initialize(External(str(path)), cloud, split).labels(), truth)
    assert initialize(LinearOvr(seed=2), cloud, split, threads=1).meta['init'] == 'linear-ovr'
    with pytest.raises(InvalidInputError):
        initialize('random', cloud, split)


def test_method_names():
    assert init_method_from_name('random', seed=3) == Random(3)
    assert init_method_from_name('nearest-neighbor') == NearestNeighbor()
    assert init_method_from_name('linear-ovr', seed=1).seed == 1
    assert init_method_from_name('external', path='a.txt') == External('a.txt')
    with pytest.raises(InvalidInputError):
        init_method_from_name('external')
    with pytest.raises(InvalidInputError):
        init_method_from_name('kmeans')
