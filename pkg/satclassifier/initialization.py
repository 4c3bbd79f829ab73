"""Warm initializations of the partition matrix.

Any binary labeling that agrees with the training labels is a valid start
for the SaT loop; its accuracy is not critical. Four sources are provided:

- `init_random`: uniform random labels on the test points;
- `init_nearest_neighbor`: label of the Euclidean-nearest training point;
- `init_linear_ovr`: one-vs-rest linear hinge-loss scorers trained with a
  Pegasos step schedule;
- `init_external`: one integer label per line read from a text file.
"""

from dataclasses import dataclass

from astropy import log
from joblib import Parallel, delayed
import numba
import numpy as np
from scipy.spatial.distance import cdist

from .config import conf
from .exceptions import DataFormatError, InvalidInputError
from .pipeline import LabelMatrix, enforce_training_rows
from .utils import resolve_threads

__all__ = ['InitMethod', 'Random', 'NearestNeighbor', 'LinearOvr', 'External',
           'init_random', 'init_nearest_neighbor', 'init_linear_ovr', 'init_external',
           'train_linear_ovr', 'predict_linear_ovr', 'initialize',
           'init_method_from_name', 'INIT_METHODS']


class InitMethod(object):
    """Base class of the initializer descriptions."""
    name = None


@dataclass(frozen=True)
class Random(InitMethod):
    seed: int = 0
    name = 'random'


@dataclass(frozen=True)
class NearestNeighbor(InitMethod):
    name = 'nearest-neighbor'


@dataclass(frozen=True)
class LinearOvr(InitMethod):
    epochs: int = None
    reg_weight: float = None
    seed: int = 0
    name = 'linear-ovr'

    def __post_init__(self):
        if self.epochs is None:
            object.__setattr__(self, 'epochs', conf.ovr_epochs)
        if self.reg_weight is None:
            object.__setattr__(self, 'reg_weight', conf.ovr_reg_weight)
        if self.epochs < 1:
            raise InvalidInputError('epochs must be at least 1, got {}'.format(self.epochs))
        if not self.reg_weight > 0:
            raise InvalidInputError('reg_weight must be positive, got {}'.format(self.reg_weight))


@dataclass(frozen=True)
class External(InitMethod):
    path: str = None
    name = 'external'


def _from_test_labels(split, test_labels, meta=None):
    labels = np.empty(split.n, dtype=np.int64)
    labels[split.train_ids] = split.train_labels
    labels[split.test_ids] = test_labels
    return LabelMatrix.from_labels(labels, split.num_classes, meta=meta)


def init_random(split, seed=0):
    """Assign every test point a class drawn uniformly from ``0..K-1``."""
    rng = np.random.default_rng(seed)
    return _from_test_labels(split, rng.integers(0, split.num_classes, size=split.n_test),
                             meta={'init': 'random', 'seed': seed})


def init_nearest_neighbor(cloud, split, chunk_size=256):
    """Give each test point the label of its nearest training point.

    Distances are exact pairwise evaluations; ties go to the lowest
    training id.
    """
    train_points = cloud.points[split.train_ids]
    nearest = np.empty(split.n_test, dtype=np.int64)
    for start in range(0, split.n_test, chunk_size):
        stop = min(start + chunk_size, split.n_test)
        d2 = cdist(cloud.points[split.test_ids[start:stop]], train_points, 'sqeuclidean')
        # train_ids are sorted, argmin keeps the first minimum
        nearest[start:stop] = np.argmin(d2, axis=1)
    return _from_test_labels(split, split.train_labels[nearest], meta={'init': 'nearest-neighbor'})


@numba.njit(cache=True)
def _pegasos(X, y, order, reg_weight):
    """Stochastic subgradient descent on the regularized hinge loss.

    ``order`` holds one permutation of the rows per epoch. The step at
    update ``t`` is ``1 / (reg_weight t)``, followed by projection onto the
    ball of radius ``1 / sqrt(reg_weight)``.
    """
    w = np.zeros(X.shape[1])
    radius = 1.0 / np.sqrt(reg_weight)
    t = 0
    for epoch in range(order.shape[0]):
        for i in order[epoch]:
            t += 1
            eta = 1.0 / (reg_weight * t)
            margin = y[i] * np.dot(w, X[i])
            w *= 1.0 - eta * reg_weight
            if margin < 1.0:
                w += eta * y[i] * X[i]
            norm = np.sqrt(np.dot(w, w))
            if norm > radius:
                w *= radius / norm
    return w


def _standardize(train_features, features):
    mean = train_features.mean(axis=0)
    std = train_features.std(axis=0)
    std[std == 0] = 1.0
    return (features - mean) / std


def _augment(features):
    return np.hstack([features, np.ones((features.shape[0], 1))])


def train_linear_ovr(features, labels, num_classes, epochs=None, reg_weight=None, seed=0, threads=None):
    """Train ``K`` one-vs-rest linear scorers.

    Parameters
    ----------
    features : ndarray
        ``(n, M)`` standardized features.
    labels : ndarray
        Class per row.
    num_classes : int
    epochs, reg_weight : optional
        Default to ``conf.ovr_epochs`` and ``conf.ovr_reg_weight``.
    seed : int
        Seed of the per-epoch sample order (one stream per class).

    Returns
    -------
    weights : ndarray
        ``(K, M + 1)``; the last column is the bias.
    """
    method = LinearOvr(epochs=epochs, reg_weight=reg_weight, seed=seed)
    X = np.ascontiguousarray(_augment(np.asarray(features, dtype=np.float64)))
    labels = np.asarray(labels, dtype=np.int64)

    def train(j):
        rng = np.random.default_rng([seed, j])
        order = np.array([rng.permutation(X.shape[0]) for _ in range(method.epochs)], dtype=np.int64)
        y = np.where(labels == j, 1.0, -1.0)
        return _pegasos(X, y, order, method.reg_weight)

    n_jobs = min(num_classes, resolve_threads(threads))
    weights = Parallel(n_jobs=n_jobs, prefer='threads')(delayed(train)(j) for j in range(num_classes))
    return np.array(weights)


def predict_linear_ovr(weights, features):
    """Class of highest score per row, ties to the lowest index."""
    return np.argmax(_augment(np.asarray(features, dtype=np.float64)) @ weights.T, axis=1)


def init_linear_ovr(cloud, split, epochs=None, reg_weight=None, seed=0, threads=None):
    """Label the test points with one-vs-rest linear scorers.

    Features are standardized with statistics of the training rows. If the
    training data cannot separate anything (a single class, or identical
    feature vectors) every test point gets the most frequent training class
    and ``meta['warning']`` is set.
    """
    train_features = cloud.points[split.train_ids]
    meta = {'init': 'linear-ovr', 'seed': seed}
    present = np.unique(split.train_labels)
    if present.size < 2 or not np.any(train_features.std(axis=0) > 0):
        majority = int(np.argmax(np.bincount(split.train_labels, minlength=split.num_classes)))
        meta['warning'] = 'degenerate training data, all test points assigned class {}'.format(majority)
        log.warning(meta['warning'])
        return _from_test_labels(split, np.full(split.n_test, majority), meta=meta)

    weights = train_linear_ovr(_standardize(train_features, train_features), split.train_labels,
                               split.num_classes, epochs=epochs, reg_weight=reg_weight, seed=seed,
                               threads=threads)
    test_features = _standardize(train_features, cloud.points[split.test_ids])
    return _from_test_labels(split, predict_linear_ovr(weights, test_features), meta=meta)


def init_external(path, split):
    """Read one label per line (node-id order) and enforce the training rows.

    The number of corrected training rows is reported in
    ``meta['corrections']``.
    """
    try:
        with open(path) as file:
            lines = file.read().splitlines()
    except OSError as e:
        raise DataFormatError('cannot read initialization file ({})'.format(e.strerror), path=path)
    while lines and not lines[-1].strip():
        lines.pop()

    labels = np.empty(len(lines), dtype=np.int64)
    for number, line in enumerate(lines, start=1):
        try:
            labels[number - 1] = int(line.strip())
        except ValueError:
            raise DataFormatError('expected an integer label, got {!r}'.format(line.strip()),
                                  path=path, line=number)
        if not 0 <= labels[number - 1] < split.num_classes:
            raise DataFormatError('label {} outside 0..{}'.format(labels[number - 1], split.num_classes - 1),
                                  path=path, line=number)
    if labels.size != split.n:
        raise DataFormatError('expected {} labels, found {}'.format(split.n, labels.size),
                              path=path, line=labels.size)

    U = enforce_training_rows(LabelMatrix.from_labels(labels, split.num_classes), split)
    U.meta['init'] = 'external'
    if U.meta['corrections']:
        log.info('corrected {} training rows of {}'.format(U.meta['corrections'], path))
    return U


def initialize(method, cloud, split, threads=None):
    """Dispatch on an `InitMethod` description."""
    if isinstance(method, Random):
        return init_random(split, method.seed)
    if isinstance(method, NearestNeighbor):
        return init_nearest_neighbor(cloud, split)
    if isinstance(method, LinearOvr):
        return init_linear_ovr(cloud, split, method.epochs, method.reg_weight, method.seed, threads=threads)
    if isinstance(method, External):
        return init_external(method.path, split)
    raise InvalidInputError('unknown initialization method {!r}'.format(method))


INIT_METHODS = ('random', 'nearest-neighbor', 'linear-ovr', 'external')


def init_method_from_name(name, seed=0, path=None):
    """`InitMethod` for a command-line or spec-file name."""
    if name == 'random':
        return Random(seed)
    if name == 'nearest-neighbor':
        return NearestNeighbor()
    if name == 'linear-ovr':
        return LinearOvr(seed=seed)
    if name == 'external':
        if path is None:
            raise InvalidInputError('the external initialization needs a label file')
        return External(path)
    raise InvalidInputError('unknown initialization {!r}; choose from {}'.format(name, ', '.join(INIT_METHODS)))
