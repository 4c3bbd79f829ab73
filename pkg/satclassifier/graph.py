"""Weighted k-nearest-neighbor graphs and the operators built on them.

A :class:`Graph` keeps, for every node, its ``k - 1`` nearest other points
(the node itself counts as the first of its ``k`` neighbors) together with
the edge weights, plus the symmetrized affinity ``W = max(W_knn, W_knn.T)``
and its degrees. The Laplacian ``L = D - W`` uses the symmetrized affinity
while the gradient operator keeps the per-node neighbor rows, so its
codomain is ``N x (k - 1)``.

Given a train/test split, :func:`assemble_laplacian_split` cuts the
Laplacian into test-test, cross and train-train blocks and
:class:`GradientOp` splits the gradient into the part acting on test
values and the fixed contribution of the training labels.
"""

import math
import struct

from astropy import log
from joblib import Parallel, delayed
import numpy as np
from scipy import sparse

from .config import conf
from .exceptions import DataFormatError, InvalidInputError
from .kdtree import KDTreeForest
from .utils import resolve_threads

__all__ = ['PointCloud', 'WeightKind', 'RBF', 'ZelnikManorPerona', 'Cosine',
           'compute_weight', 'knn_search', 'build_graph', 'Graph', 'DataSplit',
           'LaplacianSplit', 'assemble_laplacian_split', 'GradientOp',
           'gradient_apply', 'operator_norm_estimate', 'theorem_norm_bound',
           'save_graph', 'load_graph']

GRAPH_MAGIC = b'SATG'
GRAPH_VERSION = 1
_HEADER = struct.Struct('<4sHQIQ')


def _frozen(array):
    array = np.asarray(array)
    array.flags.writeable = False
    return array


class PointCloud(object):
    """N points in R^M.

    Parameters
    ----------
    points : array-like
        ``(N, M)`` real array, ``N >= 2``, all entries finite.
    """
    def __init__(self, points):
        points = np.array(points, dtype=np.float64)
        if points.ndim != 2:
            raise InvalidInputError('points must be a 2-d array, got shape {}'.format(points.shape))
        if points.shape[0] < 2:
            raise InvalidInputError('a point cloud needs at least 2 points')
        if not np.all(np.isfinite(points)):
            raise InvalidInputError('points contain non-finite entries')
        self.points = _frozen(points)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def ids(self):
        return np.arange(self.n)

    def __len__(self):
        return self.n

    def __repr__(self):
        return "<PointCloud {} points in R^{}>".format(self.n, self.dim)


class WeightKind(object):
    """Base class of the edge weight functions."""
    name = 'weight'
    #: number of neighbors needed beyond the graph's own to compute local scales
    scale_rank = 0

    def edge_weights(self, points, rows, cols, sq_dist, scales=None):
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and vars(self) == vars(other)

    def __hash__(self):
        return hash((type(self).__name__,) + tuple(sorted(vars(self).items())))


class RBF(WeightKind):
    """Radial basis function ``exp(-d^2 / (2 xi))``.

    Parameters
    ----------
    xi : float
        Positive scale. ``RBF.from_denominator`` takes the raw denominator
        ``2 xi`` instead.
    """
    name = 'rbf'

    def __init__(self, xi):
        if not xi > 0:
            raise InvalidInputError('RBF scale xi must be positive, got {}'.format(xi))
        self.xi = float(xi)

    @classmethod
    def from_denominator(cls, denominator):
        if not denominator > 0:
            raise InvalidInputError('kernel denominator must be positive, got {}'.format(denominator))
        return cls(denominator / 2.0)

    @property
    def denominator(self):
        return 2.0 * self.xi

    def edge_weights(self, points, rows, cols, sq_dist, scales=None):
        return np.exp(-sq_dist / self.denominator)

    def __repr__(self):
        return 'RBF(xi={})'.format(self.xi)


class ZelnikManorPerona(WeightKind):
    """Self-tuning weight ``exp(-d^2 / (var(x) var(y)))``.

    ``var(x)`` is the local scale of ``x``: its squared distance to the
    ``var_neighbor``-th nearest other point, or the plain distance when
    ``distance_scale`` is set.
    """
    name = 'zmp'

    def __init__(self, var_neighbor=None, distance_scale=False):
        if var_neighbor is None:
            var_neighbor = conf.zmp_rank
        if int(var_neighbor) < 1:
            raise InvalidInputError('varNeighbor must be >= 1, got {}'.format(var_neighbor))
        self.var_neighbor = int(var_neighbor)
        self.distance_scale = bool(distance_scale)

    @property
    def scale_rank(self):
        return self.var_neighbor

    def local_scales(self, sq_dist):
        """Local scale per point from a sorted ``(N, >= var_neighbor)`` squared distance table."""
        rank_sq = sq_dist[:, self.var_neighbor - 1]
        return np.sqrt(rank_sq) if self.distance_scale else rank_sq

    def edge_weights(self, points, rows, cols, sq_dist, scales=None):
        if np.any(scales <= 0):
            raise InvalidInputError('Zelnik-Manor/Perona local scale is not positive '
                                    '(duplicated points within rank {})'.format(self.var_neighbor))
        return np.exp(-sq_dist / (scales[rows] * scales[cols]))

    def __repr__(self):
        return 'ZelnikManorPerona(var_neighbor={})'.format(self.var_neighbor)


class Cosine(WeightKind):
    """Cosine similarity ``<x, y> / sqrt(<x, x> <y, y>)``."""
    name = 'cosine'

    def edge_weights(self, points, rows, cols, sq_dist, scales=None):
        norms = np.sqrt(np.einsum('ij,ij->i', points, points))
        if np.any(norms[rows] == 0) or np.any(norms[cols] == 0):
            raise InvalidInputError('cosine weight is undefined for an all-zero vector')
        dots = np.einsum('ij,ij->i', points[rows], points[cols])
        return dots / (norms[rows] * norms[cols])

    def __repr__(self):
        return 'Cosine()'


def compute_weight(kind, x, y, aux=None):
    """Weight of the edge between vectors ``x`` and ``y``.

    Parameters
    ----------
    kind : WeightKind
        Weight function.
    x, y : array-like
        Vectors of the same dimension.
    aux : tuple of float, optional
        ``(var(x), var(y))``, required for `ZelnikManorPerona`.

    Returns
    -------
    weight : float
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidInputError('vectors differ in dimension: {} vs {}'.format(x.shape, y.shape))
    sq_dist = float(np.sum((x - y) ** 2))
    if isinstance(kind, RBF):
        return math.exp(-sq_dist / kind.denominator)
    if isinstance(kind, ZelnikManorPerona):
        if aux is None:
            raise InvalidInputError('Zelnik-Manor/Perona weight needs (var(x), var(y))')
        var_x, var_y = aux
        if not (var_x > 0 and var_y > 0):
            raise InvalidInputError('local variances must be positive, got {} and {}'.format(var_x, var_y))
        return math.exp(-sq_dist / (var_x * var_y))
    if isinstance(kind, Cosine):
        norm_x, norm_y = float(np.dot(x, x)), float(np.dot(y, y))
        if norm_x == 0 or norm_y == 0:
            raise InvalidInputError('cosine weight is undefined for an all-zero vector')
        return float(np.dot(x, y)) / math.sqrt(norm_x * norm_y)
    raise InvalidInputError('unknown weight kind {!r}'.format(kind))


def _exact_chunk(points, sq_norms, start, stop, k, margin):
    block = points[start:stop]
    n_points = points.shape[0]
    gram = sq_norms[start:stop, None] + sq_norms[None, :] - 2.0 * block @ points.T
    rows = np.arange(stop - start)
    gram[rows, rows + start] = np.inf
    n_candidates = min(n_points - 1, k + margin)
    candidates = np.argpartition(gram, n_candidates - 1, axis=1)[:, :n_candidates]
    # rounding bound of the expanded distance formula
    slack = 1e-9 * (sq_norms[start:stop] + sq_norms.max())
    indices = np.empty((stop - start, k), dtype=np.int64)
    sq_dist = np.empty((stop - start, k), dtype=np.float64)
    for i in range(stop - start):
        # every column tied with the partition cut joins the re-rank
        limit = gram[i, candidates[i]].max() + slack[i]
        cand = np.flatnonzero(gram[i] <= limit)
        diff = points[cand] - block[i]
        exact = np.einsum('ij,ij->i', diff, diff)
        order = np.lexsort((cand, exact))[:k]
        indices[i] = cand[order]
        sq_dist[i] = exact[order]
    return indices, sq_dist


def knn_search(cloud, k, mode='auto', checks=None, n_trees=None, leaf_size=None,
               seed=0, threads=None, chunk_size=1024):
    """Find the ``k`` nearest other points of every point.

    Parameters
    ----------
    cloud : PointCloud
        Points to search.
    k : int
        Neighbors per point, ``1 <= k < N``.
    mode : {'auto', 'exact', 'approximate'}
        ``'auto'`` runs the exact search up to ``conf.approximate_threshold``
        points and the randomized kd-tree forest above.
    checks, n_trees, leaf_size : int, optional
        Forest parameters; default to the package configuration.
    seed : int
        Seed of the randomized trees.
    threads : int, optional
        Worker cap of the exact search.

    Returns
    -------
    indices : ndarray
        ``(N, k)`` neighbor ids sorted by distance, ties by ascending id.
    sq_dist : ndarray
        ``(N, k)`` squared Euclidean distances.
    """
    n_points = cloud.n
    k = int(k)
    if k < 1 or k >= n_points:
        raise InvalidInputError('k must satisfy 1 <= k < N = {}, got {}'.format(n_points, k))
    if mode == 'auto':
        mode = 'exact' if n_points <= conf.approximate_threshold else 'approximate'
    points = cloud.points

    if mode == 'exact':
        sq_norms = np.einsum('ij,ij->i', points, points)
        bounds = [(start, min(start + chunk_size, n_points)) for start in range(0, n_points, chunk_size)]
        results = Parallel(n_jobs=resolve_threads(threads), prefer='threads')(
            delayed(_exact_chunk)(points, sq_norms, start, stop, k, 16) for start, stop in bounds)
        indices = np.concatenate([r[0] for r in results])
        sq_dist = np.concatenate([r[1] for r in results])
    elif mode == 'approximate':
        forest = KDTreeForest(points,
                              n_trees=conf.kdtree_count if n_trees is None else n_trees,
                              leaf_size=conf.kdtree_leaf_size if leaf_size is None else leaf_size,
                              seed=seed)
        indices, sq_dist = forest.query_self(k, checks=conf.kdtree_checks if checks is None else checks)
    else:
        raise InvalidInputError("mode must be 'auto', 'exact' or 'approximate', got {!r}".format(mode))
    log.debug('k-NN search ({}) over {} points, k={}'.format(mode, n_points, k))
    return indices, sq_dist


class Graph(object):
    """Immutable weighted k-NN graph.

    Parameters
    ----------
    neighbors : ndarray
        ``(N, k - 1)`` neighbor ids per node (self excluded).
    weights : ndarray
        ``(N, k - 1)`` edge weights ``w(x, y)`` matching ``neighbors``.
    k : int, optional
        Neighborhood size including the node itself; inferred as
        ``neighbors.shape[1] + 1``.
    kind : WeightKind, optional
        Weight function the weights came from (informational).
    """
    def __init__(self, neighbors, weights, k=None, kind=None):
        neighbors = np.array(neighbors, dtype=np.int64)
        weights = np.array(weights, dtype=np.float64)
        if neighbors.ndim != 2 or neighbors.shape != weights.shape:
            raise InvalidInputError('neighbors and weights must be congruent 2-d arrays')
        n_nodes, width = neighbors.shape
        if k is None:
            k = width + 1
        if width != k - 1:
            raise InvalidInputError('neighbor rows must hold k - 1 = {} entries, got {}'.format(k - 1, width))
        if np.any(neighbors < 0) or np.any(neighbors >= n_nodes):
            raise InvalidInputError('neighbor id out of range')
        if np.any(neighbors == np.arange(n_nodes)[:, None]):
            raise InvalidInputError('a node cannot be its own neighbor')
        if not np.all(np.isfinite(weights)):
            raise InvalidInputError('edge weights must be finite')
        if np.any(weights < 0):
            raise InvalidInputError('edge weights must be non-negative')

        self.n = n_nodes
        self.k = int(k)
        self.kind = kind
        self.neighbors = _frozen(neighbors)
        self.weights = _frozen(weights)

        rows = np.repeat(np.arange(n_nodes), width)
        directed = sparse.csr_matrix((weights.ravel(), (rows, neighbors.ravel())),
                                     shape=(n_nodes, n_nodes))
        affinity = directed.maximum(directed.T).tocsr()
        affinity.eliminate_zeros()
        affinity.sort_indices()
        self.affinity = affinity
        self.degrees = _frozen(np.asarray(affinity.sum(axis=1)).ravel())

    def __repr__(self):
        return "<Graph {} nodes, k={}, {} undirected edges>".format(self.n, self.k, self.edge_count)

    @property
    def edge_count(self):
        return self.affinity.nnz // 2

    @property
    def laplacian(self):
        """Graph Laplacian ``L = D - W`` (CSR)."""
        return (_diagonal(self.degrees) - self.affinity).tocsr()

    def dirichlet_energy(self, u):
        """``0.5 u^T L u``."""
        u = np.asarray(u, dtype=np.float64)
        return 0.5 * float(u @ (self.laplacian @ u))

    def edge_energy(self, u):
        """``0.5 sum w(x, y) (u(x) - u(y))^2`` over the undirected edges of ``W``."""
        u = np.asarray(u, dtype=np.float64)
        upper = sparse.triu(self.affinity, k=1).tocoo()
        return 0.5 * float(np.sum(upper.data * (u[upper.row] - u[upper.col]) ** 2))


def build_graph(cloud, k, kind, mode='auto', allow_signed_weights=None, seed=0, threads=None):
    """Build the weighted k-NN graph of a point cloud.

    Each point counts as its own nearest neighbor, so every node keeps its
    ``k - 1`` nearest other points.

    Parameters
    ----------
    cloud : PointCloud
        Points.
    k : int
        Neighborhood size including the point itself, ``2 <= k <= N``.
    kind : WeightKind
        Edge weight function.
    mode : {'auto', 'exact', 'approximate'}
        k-NN search mode, see `knn_search`.
    allow_signed_weights : bool, optional
        Clamp negative cosine weights to zero instead of raising.
        Defaults to ``conf.allow_signed_weights``.

    Returns
    -------
    graph : Graph
    """
    k = int(k)
    if k < 2 or k > cloud.n:
        raise InvalidInputError('k must satisfy 2 <= k <= N = {}, got {}'.format(cloud.n, k))
    if allow_signed_weights is None:
        allow_signed_weights = conf.allow_signed_weights
    width = k - 1
    depth = width
    if kind.scale_rank:
        if kind.scale_rank > cloud.n - 1:
            raise InvalidInputError('local scale rank {} exceeds the {} other points'.format(
                kind.scale_rank, cloud.n - 1))
        depth = max(width, kind.scale_rank)
    indices, sq_dist = knn_search(cloud, depth, mode=mode, seed=seed, threads=threads)

    scales = kind.local_scales(sq_dist) if kind.scale_rank else None
    neighbors = indices[:, :width]
    edge_sq = sq_dist[:, :width]
    rows = np.repeat(np.arange(cloud.n), width)
    weights = kind.edge_weights(cloud.points, rows, neighbors.ravel(), edge_sq.ravel(), scales)
    weights = weights.reshape(cloud.n, width)
    if np.any(weights < 0):
        if not allow_signed_weights:
            raise InvalidInputError('{} negative weights; set allow-signed-weights to clamp them'.format(
                int(np.sum(weights < 0))))
        log.warning('clamping {} negative weights to zero'.format(int(np.sum(weights < 0))))
        weights = np.maximum(weights, 0.0)

    graph = Graph(neighbors, weights, k=k, kind=kind)
    log.info('built {!r} with {} weights'.format(graph, kind.name))
    return graph


class DataSplit(object):
    """Training set ``T`` with fixed labels and test set ``S = V \\ T``.

    Parameters
    ----------
    n : int
        Number of nodes.
    train_ids : array-like
        Distinct node ids of the training points.
    train_labels : array-like
        Class in ``0..K-1`` per training id (same order as ``train_ids``).
    num_classes : int
        ``K``; every class needs at least one training point.
    """
    def __init__(self, n, train_ids, train_labels, num_classes):
        train_ids = np.asarray(train_ids, dtype=np.int64)
        train_labels = np.asarray(train_labels, dtype=np.int64)
        if train_ids.shape != train_labels.shape or train_ids.ndim != 1:
            raise InvalidInputError('train_ids and train_labels must be 1-d and of equal length')
        if train_ids.size == 0:
            raise InvalidInputError('the training set is empty')
        if np.any(train_ids < 0) or np.any(train_ids >= n):
            raise InvalidInputError('training id out of range 0..{}'.format(n - 1))
        if np.unique(train_ids).size != train_ids.size:
            raise InvalidInputError('training ids are not distinct')
        if np.any(train_labels < 0) or np.any(train_labels >= num_classes):
            raise InvalidInputError('training label out of range 0..{}'.format(num_classes - 1))
        missing = np.setdiff1d(np.arange(num_classes), train_labels)
        if missing.size:
            raise InvalidInputError('classes without training points: {}'.format(missing.tolist()))

        order = np.argsort(train_ids)
        self.n = int(n)
        self.num_classes = int(num_classes)
        self.train_ids = _frozen(train_ids[order])
        self.train_labels = _frozen(train_labels[order])
        is_train = np.zeros(self.n, dtype=bool)
        is_train[self.train_ids] = True
        self.is_train = _frozen(is_train)
        self.test_ids = _frozen(np.flatnonzero(~is_train))

    def __repr__(self):
        return "<DataSplit {} training / {} test points, {} classes>".format(
            self.n_train, self.n_test, self.num_classes)

    @property
    def n_train(self):
        return self.train_ids.size

    @property
    def n_test(self):
        return self.test_ids.size

    @property
    def train_onehot(self):
        """``(N_T, K)`` one-hot matrix of the training labels."""
        onehot = np.zeros((self.n_train, self.num_classes))
        onehot[np.arange(self.n_train), self.train_labels] = 1.0
        return onehot


class LaplacianSplit(object):
    """Blocks of ``L`` induced by a split.

    ``LS`` is the Laplacian of the test-test edges, ``Lbar`` of the
    train-train edges. The cross edges contribute the diagonal blocks
    ``L1`` (test) and ``L2`` (train) and the off-diagonal ``L3`` (test rows,
    train columns), so that in (test, train) order::

        L = [[LS + L1, L3], [L3.T, Lbar + L2]]
    """
    def __init__(self, LS, L1, L2, L3, Lbar):
        self.LS = LS
        self.L1 = L1
        self.L2 = L2
        self.L3 = L3
        self.Lbar = Lbar

    def __repr__(self):
        return "<LaplacianSplit test block {}, cross block {}>".format(self.LS.shape, self.L3.shape)

    def system_matrix(self, exact_block=False):
        """Test block used by the smoothing model: ``LS``, or ``LS + L1``."""
        if exact_block:
            return (self.LS + self.L1).tocsr()
        return self.LS

    def reassemble(self):
        """``L`` in (test, train) order, as a CSR matrix."""
        return sparse.bmat([[self.LS + self.L1, self.L3],
                            [self.L3.T, self.Lbar + self.L2]], format='csr')


def _diagonal(values):
    values = np.asarray(values, dtype=np.float64).ravel()
    index = np.arange(values.size)
    return sparse.csr_matrix((values, (index, index)), shape=(values.size, values.size))


def _edge_laplacian(block):
    return (_diagonal(block.sum(axis=1)) - block).tocsr()


def assemble_laplacian_split(graph, split):
    """Split the graph Laplacian along the training/test partition.

    Parameters
    ----------
    graph : Graph
    split : DataSplit

    Returns
    -------
    blocks : LaplacianSplit
    """
    if split.n != graph.n:
        raise InvalidInputError('split covers {} nodes, graph has {}'.format(split.n, graph.n))
    affinity = graph.affinity
    test, train = split.test_ids, split.train_ids
    test_rows = affinity[test]
    w_ss = test_rows[:, test]
    w_st = test_rows[:, train]
    w_tt = affinity[train][:, train]

    LS = _edge_laplacian(w_ss)
    Lbar = _edge_laplacian(w_tt)
    L1 = _diagonal(w_st.sum(axis=1))
    L2 = _diagonal(w_st.sum(axis=0))
    L3 = (-w_st).tocsr()
    return LaplacianSplit(LS, L1, L2, L3, Lbar)


class GradientOp(object):
    """Graph gradient restricted to test values.

    The full gradient maps ``u`` on all nodes to the ``N x (k - 1)`` array
    ``w(x, y) (u(x) - u(y))`` over the neighbor rows. Splitting its columns
    into test and training nodes gives ``A_S`` and the per-class offsets
    ``H_j = grad(0; ubar_j)``, so that ``grad(u) = A_S u_S + H_j``.

    Parameters
    ----------
    graph : Graph
    split : DataSplit
    """
    def __init__(self, graph, split):
        if split.n != graph.n:
            raise InvalidInputError('split covers {} nodes, graph has {}'.format(split.n, graph.n))
        width = graph.k - 1
        n_rows = graph.n * width
        rows = np.arange(n_rows)
        sources = np.repeat(np.arange(graph.n), width)
        w = graph.weights.ravel()
        full = sparse.csr_matrix((np.concatenate([w, -w]),
                                  (np.concatenate([rows, rows]),
                                   np.concatenate([sources, graph.neighbors.ravel()]))),
                                 shape=(n_rows, graph.n))
        self.n = graph.n
        self.k = graph.k
        self.shape = (graph.n, width)
        self.full = full
        self.A = full[:, split.test_ids].tocsr()
        self.AT = self.A.T.tocsr()
        # fixed training contribution, one column per class
        self.H = np.asarray(full[:, split.train_ids] @ split.train_onehot)

    def __repr__(self):
        return "<GradientOp {} -> {}x{}>".format(self.A.shape[1], *self.shape)

    @property
    def n_test(self):
        return self.A.shape[1]

    def apply(self, u_test):
        """``A_S u_S`` as a flat array."""
        return self.A @ u_test

    def adjoint(self, p):
        """``A_S^* p`` for a flat dual array ``p``."""
        return self.AT @ np.ravel(p)

    def offset(self, class_idx):
        return self.H[:, class_idx]


def gradient_apply(op, u_test, class_idx):
    """Edge differences of ``u = (u_S; ubar_j)``.

    Returns
    -------
    grad : ndarray
        ``(N, k - 1)`` array ``A_S u_S + H_j``.
    """
    u_test = np.asarray(u_test, dtype=np.float64)
    if u_test.shape != (op.n_test,):
        raise InvalidInputError('u_test must have length {}, got {}'.format(op.n_test, u_test.shape))
    return (op.apply(u_test) + op.offset(class_idx)).reshape(op.shape)


def theorem_norm_bound(n, k):
    """Worst-case bound ``N sqrt(k - 1)`` on the gradient operator norm."""
    return n * math.sqrt(k - 1)


def operator_norm_estimate(op, iters=None, seed=0):
    """Power-iteration estimate of the spectral norm of ``A_S``.

    The estimate never decreases with more iterations on a fixed seed and is
    capped at `theorem_norm_bound`.
    """
    if iters is None:
        iters = conf.power_iters
    if iters < 1:
        raise InvalidInputError('iters must be >= 1')
    if op.n_test == 0 or op.A.nnz == 0:
        return 0.0
    bound = theorem_norm_bound(op.n, op.k)
    v = np.random.default_rng(seed).standard_normal(op.n_test)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(int(iters)):
        av = op.A @ v
        estimate = max(estimate, float(np.linalg.norm(av)))
        v = op.AT @ av
        norm = np.linalg.norm(v)
        if norm == 0:
            break
        v /= norm
    return min(estimate, bound)


def save_graph(graph, filename):
    """Write a graph to the binary SATG cache format.

    Layout (little-endian): magic ``SATG``, u16 version, u64 node count,
    u32 k, u64 entry count, then the CSR neighbor arrays ``indptr``
    (int64, N+1), ``indices`` (int64) and ``weights`` (float64).
    """
    width = graph.k - 1
    indptr = np.arange(graph.n + 1, dtype='<i8') * width
    with open(filename, 'wb') as f:
        f.write(_HEADER.pack(GRAPH_MAGIC, GRAPH_VERSION, graph.n, graph.k, graph.n * width))
        f.write(indptr.tobytes())
        f.write(graph.neighbors.astype('<i8').tobytes())
        f.write(graph.weights.astype('<f8').tobytes())
    log.info('graph cache written to {}'.format(filename))


def load_graph(filename, kind=None):
    """Read a graph written by `save_graph`."""
    try:
        with open(filename, 'rb') as f:
            payload = f.read()
    except OSError as e:
        raise DataFormatError('cannot read graph cache ({})'.format(e.strerror), path=filename)
    if len(payload) < _HEADER.size:
        raise DataFormatError('truncated graph cache header', path=filename)
    magic, version, n_nodes, k, nnz = _HEADER.unpack_from(payload)
    if magic != GRAPH_MAGIC:
        raise DataFormatError('not a graph cache (magic {!r})'.format(magic), path=filename)
    if version != GRAPH_VERSION:
        raise DataFormatError('unsupported graph cache version {}'.format(version), path=filename)
    expected = _HEADER.size + 8 * (n_nodes + 1) + 16 * nnz
    if len(payload) != expected:
        raise DataFormatError('graph cache holds {} bytes, expected {}'.format(len(payload), expected),
                              path=filename)
    offset = _HEADER.size
    indptr = np.frombuffer(payload, dtype='<i8', count=n_nodes + 1, offset=offset)
    offset += 8 * (n_nodes + 1)
    indices = np.frombuffer(payload, dtype='<i8', count=nnz, offset=offset)
    offset += 8 * nnz
    weights = np.frombuffer(payload, dtype='<f8', count=nnz, offset=offset)
    width = k - 1
    if nnz != n_nodes * width or np.any(np.diff(indptr) != width):
        raise DataFormatError('graph cache rows are not uniform k - 1 = {} lists'.format(width),
                              path=filename)
    return Graph(indices.reshape(n_nodes, width), weights.reshape(n_nodes, width), k=k, kind=kind)
