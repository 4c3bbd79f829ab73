"""Smoothing-and-thresholding (SaT) outer loop.

Every outer iteration smooths the current partition class by class
(stage one, the ``K`` subproblems are independent and run in parallel),
then maps each row back to the nearest simplex vertex (stage two). The
binary result becomes the next fidelity anchor and ``beta`` grows by
``beta_growth``. The loop stops when no label changes.
"""

from collections import OrderedDict
import copy

from astropy import log
from astropy.table import Table
from joblib import Parallel, delayed
import numpy as np

from .config import SatConfig
from .exceptions import InvalidInputError
from .graph import GradientOp, assemble_laplacian_split, operator_norm_estimate
from .solver import PrimalDualSolver
from .utils import resolve_threads, stopwatch

__all__ = ['LabelMatrix', 'threshold', 'enforce_training_rows', 'SatHistory', 'run_sat']


class LabelMatrix(object):
    """``N x K`` matrix of per-class labeling values.

    Parameters
    ----------
    values : array-like
        ``(N, K)`` real array.
    kind : {'fuzzy', 'binary'}
        Binary matrices hold exactly one 1 per row.
    meta : dict, optional
        Free-form annotations (initializer warnings, correction counts).
    """
    def __init__(self, values, kind='fuzzy', meta=None):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidInputError('label matrix must be 2-d, got shape {}'.format(values.shape))
        if kind not in ('fuzzy', 'binary'):
            raise InvalidInputError("kind must be 'fuzzy' or 'binary', got {!r}".format(kind))
        if kind == 'binary' and not _rows_are_vertices(values):
            raise InvalidInputError('binary label matrix rows must be unit basis vectors')
        self.values = values
        self.kind = kind
        self.meta = OrderedDict() if meta is None else OrderedDict(meta)

    @classmethod
    def from_labels(cls, labels, num_classes, meta=None):
        """Binary matrix with row ``i`` equal to ``e_{labels[i]}``."""
        labels = np.asarray(labels, dtype=np.int64)
        if np.any(labels < 0) or np.any(labels >= num_classes):
            raise InvalidInputError('labels must lie in 0..{}'.format(num_classes - 1))
        values = np.zeros((labels.size, num_classes))
        values[np.arange(labels.size), labels] = 1.0
        return cls(values, kind='binary', meta=meta)

    @property
    def shape(self):
        return self.values.shape

    @property
    def num_classes(self):
        return self.values.shape[1]

    def labels(self):
        """Class index per row (argmax, ties to the lowest index)."""
        return np.argmax(self.values, axis=1)

    def copy(self):
        return LabelMatrix(self.values.copy(), kind=self.kind, meta=copy.deepcopy(self.meta))

    def __repr__(self):
        return "<LabelMatrix {} {}x{}>".format(self.kind, *self.values.shape)


def _rows_are_vertices(values):
    ones = values == 1.0
    zeros = values == 0.0
    return bool(np.all(ones | zeros) and np.all(ones.sum(axis=1) == 1))


def threshold(fuzzy, split=None):
    """Map every row to the unit vector of its largest entry.

    Ties go to the lowest class index. When ``split`` is given the training
    rows are set to their fixed labels.
    """
    binary = LabelMatrix.from_labels(fuzzy.labels(), fuzzy.num_classes, meta=fuzzy.meta)
    if split is not None:
        binary = enforce_training_rows(binary, split)
    return binary


def enforce_training_rows(U, split):
    """Overwrite the training rows with their one-hot labels.

    The number of rows that differed is stored in ``meta['corrections']``.
    """
    if U.shape != (split.n, split.num_classes):
        raise InvalidInputError('label matrix shape {} does not match the split ({}, {})'.format(
            U.shape, split.n, split.num_classes))
    result = U.copy()
    fixed = split.train_onehot
    differs = np.any(result.values[split.train_ids] != fixed, axis=1)
    result.values[split.train_ids] = fixed
    result.meta['corrections'] = int(differs.sum())
    return result


class SatHistory(object):
    """Per-outer-iteration trace of a SaT run.

    Row 0 describes the initialization. ``converged`` is set when the last
    iteration changed no label; ``truncated`` when the iteration cap was hit
    first.
    """
    columns = ('iteration', 'beta', 'changes', 'accuracy', 'test_accuracy',
               'pd_iterations', 'smooth_time', 'threshold_time')

    def __init__(self):
        self.rows = []
        self.converged = False
        self.truncated = False

    def add(self, **row):
        self.rows.append(OrderedDict((name, row.get(name, np.nan)) for name in self.columns))

    @property
    def outer_iterations(self):
        return len(self.rows) - 1

    @property
    def betas(self):
        return [row['beta'] for row in self.rows[1:]]

    @property
    def changes(self):
        return [row['changes'] for row in self.rows[1:]]

    @property
    def accuracies(self):
        return [row['accuracy'] for row in self.rows]

    def to_table(self):
        """Return the history as an astropy table."""
        table = Table(rows=[list(row.values()) for row in self.rows], names=self.columns,
                      dtype=(int, float, int, float, float, int, float, float))
        table.meta['comments'] = ['converged = {}'.format(self.converged),
                                  'truncated = {}'.format(self.truncated)]
        return table

    def __repr__(self):
        return "<SatHistory {} outer iterations, converged={}>".format(self.outer_iterations, self.converged)


def _check_init(init, split):
    if init.kind != 'binary':
        raise InvalidInputError('the initial partition must be binary')
    if init.shape != (split.n, split.num_classes):
        raise InvalidInputError('initial partition shape {} does not match the split ({}, {})'.format(
            init.shape, split.n, split.num_classes))
    if np.any(init.values[split.train_ids] != split.train_onehot):
        raise InvalidInputError('initial partition contradicts the training labels')


def _score(labels, truth, split):
    if truth is None:
        return np.nan, np.nan
    correct = labels == truth
    test_score = float(correct[split.test_ids].mean()) if split.n_test else np.nan
    return float(correct.mean()), test_score


def _solve_class(j, U, split, onehot, op, blocks, params, cfg, op_norm, diagnostics):
    solver = PrimalDualSolver(j, U.values[split.test_ids, j], onehot[:, j], op, blocks, params,
                              cfg=cfg.solver, op_norm=op_norm, diagnostics=diagnostics)
    u = solver.solve()
    return u, solver.state.iter if solver.state is not None else 0


def run_sat(graph, split, init, cfg=None, truth=None, threads=None, diagnostics=None):
    """Iterate smoothing and thresholding until the partition is stationary.

    Parameters
    ----------
    graph : Graph
    split : DataSplit
    init : LabelMatrix
        Binary warm initialization consistent with the training labels.
    cfg : SatConfig, optional
    truth : array-like, optional
        Ground-truth labels; enables accuracy in the history.
    threads : int, optional
        Cap on concurrently solved classes; defaults to ``cfg.threads``.
    diagnostics : callable, optional
        Per-iteration solver callback, see `PrimalDualSolver`.

    Returns
    -------
    partition : LabelMatrix
        Binary partition.
    history : SatHistory
    """
    cfg = SatConfig() if cfg is None else cfg
    _check_init(init, split)
    if truth is not None:
        truth = np.asarray(truth, dtype=np.int64)
        if truth.shape != (split.n,):
            raise InvalidInputError('truth must hold one label per node')

    blocks = assemble_laplacian_split(graph, split)
    op = GradientOp(graph, split)
    op_norm = None
    if cfg.solver.step_mode == 'power' and op.n_test and op.A.nnz:
        op_norm = operator_norm_estimate(op, cfg.solver.power_iters)
    onehot = split.train_onehot
    n_jobs = min(split.num_classes, resolve_threads(cfg.threads if threads is None else threads))

    history = SatHistory()
    U = init.copy()
    labels = U.labels()
    score, test_score = _score(labels, truth, split)
    history.add(iteration=0, beta=np.nan, changes=0, accuracy=score, test_accuracy=test_score,
                pd_iterations=0, smooth_time=0.0, threshold_time=0.0)

    beta = cfg.params.beta
    for outer in range(1, cfg.max_outer_iters + 1):
        params = cfg.params.with_beta(beta)
        timings = {}
        with stopwatch(timings, 'smooth_time'):
            results = Parallel(n_jobs=n_jobs, prefer='threads')(
                delayed(_solve_class)(j, U, split, onehot, op, blocks, params, cfg, op_norm, diagnostics)
                for j in range(split.num_classes))

        with stopwatch(timings, 'threshold_time'):
            fuzzy = np.empty((split.n, split.num_classes))
            fuzzy[split.train_ids] = onehot
            for j, (u, _) in enumerate(results):
                fuzzy[split.test_ids, j] = u
            U_next = threshold(LabelMatrix(fuzzy), split)
            if not _rows_are_vertices(U_next.values):
                raise AssertionError('thresholded partition violates the no-vacuum/no-overlap constraint')
            new_labels = U_next.labels()
            changes = int(np.sum(new_labels != labels))

        score, test_score = _score(new_labels, truth, split)
        history.add(iteration=outer, beta=beta, changes=changes, accuracy=score, test_accuracy=test_score,
                    pd_iterations=int(sum(it for _, it in results)), **timings)
        log.info('SaT iteration {}: beta={:.3g}, {} label changes{}'.format(
            outer, beta, changes, '' if truth is None else ', accuracy {:.4f}'.format(score)))

        U, labels = U_next, new_labels
        if changes == 0:
            history.converged = True
            break
        if outer < cfg.max_outer_iters:
            beta *= cfg.beta_growth

    if not history.converged:
        history.truncated = True
        log.warning('SaT stopped after {} outer iterations without reaching a stationary '
                    'partition'.format(cfg.max_outer_iters))
    U.meta['converged'] = history.converged
    U.meta['outer_iterations'] = history.outer_iterations
    return U, history
