"""Accuracy evaluation and repeated-trial experiments.

An experiment is described by a spec file of ``key = value`` lines (see
`ExperimentSpec`). It loads or generates its dataset once, builds (or
reads from cache) one k-NN graph, then runs ``trials`` independent
trials: trial ``t`` samples its training set and initializes with seed
``seed_base + t``. Results are collected in astropy tables written as CSV.
"""

from dataclasses import dataclass, field, fields, replace
import os
import time

from astropy import log
from astropy.table import Table
from joblib import Parallel, delayed
import numpy as np

from ._astropy_init import __version__
from .config import ModelParams, SatConfig, SolverConfig, coerce_value, conf, parse_config_file
from .data import SamplingPlan, load_dataset, sample_training
from .exceptions import AcceptanceGateError, InvalidInputError, SatError
from .graph import RBF, Cosine, ZelnikManorPerona, build_graph, load_graph, save_graph
from .initialization import init_method_from_name, initialize
from .pipeline import LabelMatrix, run_sat
from .utils import resolve_threads

__all__ = ['ExperimentSpec', 'TrialResult', 'ExperimentReport', 'accuracy', 'make_weight_kind',
           'prepare_graph', 'run_trial', 'run_experiment', 'bundled_spec']

WEIGHTS = ('rbf', 'zmp', 'cosine')


def make_weight_kind(weight, kernel_denom=None, zmp_rank=None):
    """Weight function for a name used in spec files and on the command line.

    ``kernel_denom`` is the raw RBF denominator ``2 xi``.
    """
    if weight == 'rbf':
        if kernel_denom is None:
            raise InvalidInputError('the rbf weight needs a kernel denominator')
        return RBF.from_denominator(kernel_denom)
    if weight == 'zmp':
        return ZelnikManorPerona(zmp_rank)
    if weight == 'cosine':
        return Cosine()
    raise InvalidInputError('unknown weight {!r}; choose from {}'.format(weight, ', '.join(WEIGHTS)))


@dataclass(frozen=True)
class ExperimentSpec:
    """Dataset, graph, model, sampling and repetition settings."""
    name: str = 'experiment'
    dataset: str = 'three-moon'
    files: tuple = ()
    data_seed: int = 0
    noise: float = 0.14
    label_column: int = -1
    k: int = 10
    weight: str = 'rbf'
    kernel_denom: float = 18.0
    zmp_rank: int = field(default_factory=lambda: conf.zmp_rank)
    graph_mode: str = 'auto'
    alpha: float = 1.0
    beta: float = 1e-2
    beta_growth: float = field(default_factory=lambda: conf.beta_growth)
    max_outer: int = field(default_factory=lambda: conf.max_outer_iters)
    rel_tol: float = field(default_factory=lambda: conf.rel_tol)
    max_iters: int = field(default_factory=lambda: conf.max_iters)
    step_mode: str = field(default_factory=lambda: conf.step_mode)
    exact_laplacian_block: bool = False
    init: str = 'linear-ovr'
    init_file: str = None
    sampling: str = 'uniform'
    train_total: int = 75
    train_counts: tuple = ()
    trials: int = 10
    seed_base: int = 0
    gate: float = None
    gate_outer: float = None

    #: value kind of every key in spec files
    kinds = {'name': str, 'dataset': str, 'files': 'strs', 'data_seed': int, 'noise': float,
             'label_column': int, 'k': int, 'weight': str, 'kernel_denom': float, 'zmp_rank': int,
             'graph_mode': str, 'alpha': float, 'beta': float, 'beta_growth': float, 'max_outer': int,
             'rel_tol': float, 'max_iters': int, 'step_mode': str, 'exact_laplacian_block': bool,
             'init': str, 'init_file': str, 'sampling': str, 'train_total': int, 'train_counts': 'ints',
             'trials': int, 'seed_base': int, 'gate': float, 'gate_outer': float}

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidInputError('trials must be at least 1, got {}'.format(self.trials))
        if self.sampling not in ('uniform', 'per_class'):
            raise InvalidInputError("sampling must be 'uniform' or 'per_class', got {!r}".format(self.sampling))
        make_weight_kind(self.weight, self.kernel_denom, self.zmp_rank)
        self.sat_config()

    @classmethod
    def from_settings(cls, settings, path=None, **overrides):
        """Build a spec from parsed ``{key: (value, line)}`` settings.

        ``overrides`` are already typed values that take precedence.
        """
        values = {}
        for key, (value, line) in settings.items():
            values[key] = coerce_value(value, cls.kinds[key], key=key, path=path, line=line)
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    @classmethod
    def from_file(cls, filename, **overrides):
        """Read a spec file; see `satclassifier.config.parse_config_file`."""
        settings = parse_config_file(filename, allowed_keys=cls.kinds)
        spec = cls.from_settings(settings, path=filename, **overrides)
        if 'name' not in settings and 'name' not in overrides:
            spec = replace(spec, name=os.path.splitext(os.path.basename(filename))[0])
        return spec

    def sat_config(self, threads=None):
        solver = SolverConfig(max_iters=self.max_iters, rel_tol=self.rel_tol, step_mode=self.step_mode,
                              exact_laplacian_block=self.exact_laplacian_block)
        return SatConfig(params=ModelParams(self.alpha, self.beta), solver=solver,
                         beta_growth=self.beta_growth, max_outer_iters=self.max_outer,
                         threads=conf.threads if threads is None else threads)

    def weight_kind(self):
        return make_weight_kind(self.weight, self.kernel_denom, self.zmp_rank)

    def sampling_plan(self, seed):
        return SamplingPlan(mode=self.sampling, total=self.train_total, counts=self.train_counts, seed=seed)

    def to_lines(self):
        """Resolved settings as ``key = value`` lines."""
        lines = []
        for item in fields(self):
            value = getattr(self, item.name)
            if isinstance(value, tuple):
                value = ', '.join(str(v) for v in value)
            lines.append('{} = {}'.format(item.name, value))
        return lines


def report_comments(spec):
    """Header lines echoed into every report table."""
    return ['satclassifier {}'.format(__version__)] + spec.to_lines()


def accuracy(predicted, truth, split=None, scope='all'):
    """Fraction of correctly labeled points.

    Parameters
    ----------
    predicted : LabelMatrix or array-like
        Binary partition, or one class id per point.
    truth : array-like
        Ground-truth class per point.
    split : DataSplit, optional
        Required for ``scope='test'``.
    scope : {'all', 'test'}
        Score all points (training rows included) or the test points only.
    """
    labels = predicted.labels() if isinstance(predicted, LabelMatrix) else np.asarray(predicted)
    truth = np.asarray(truth)
    if labels.shape != truth.shape:
        raise InvalidInputError('predicted and true labels differ in length: {} vs {}'.format(
            labels.shape, truth.shape))
    if scope == 'all':
        correct = labels == truth
    elif scope == 'test':
        if split is None:
            raise InvalidInputError("scope 'test' needs the data split")
        correct = labels[split.test_ids] == truth[split.test_ids]
    else:
        raise InvalidInputError("scope must be 'all' or 'test', got {!r}".format(scope))
    return float(correct.mean()) if correct.size else 1.0


@dataclass
class TrialResult:
    """Outcome of one trial. Failed trials carry ``status='failed'`` and the
    error message; their numeric fields are NaN."""
    trial: int
    seed: int
    status: str = 'ok'
    message: str = ''
    accuracy: float = np.nan
    test_accuracy: float = np.nan
    init_accuracy: float = np.nan
    outer_iters: int = -1
    converged: bool = False
    wall_time: float = np.nan
    trace: Table = None

    @property
    def ok(self):
        return self.status == 'ok'


def prepare_graph(spec, dataset, graph_cache=None, threads=None):
    """Build the experiment graph, or read it from ``graph_cache`` if that
    file exists (writing it otherwise)."""
    kind = spec.weight_kind()
    if graph_cache is not None and os.path.exists(graph_cache):
        graph = load_graph(graph_cache, kind=kind)
        if graph.n != dataset.cloud.n or graph.k != spec.k:
            raise InvalidInputError('graph cache {} holds N={}, k={}; the experiment needs N={}, k={}'.format(
                graph_cache, graph.n, graph.k, dataset.cloud.n, spec.k))
        log.info('graph read from cache {}'.format(graph_cache))
        return graph
    graph = build_graph(dataset.cloud, spec.k, kind, mode=spec.graph_mode, seed=spec.data_seed, threads=threads)
    if graph_cache is not None:
        save_graph(graph, graph_cache)
    return graph


def run_trial(spec, dataset, graph, trial, threads=1):
    """Run trial number ``trial`` (0-based) of an experiment.

    Package errors are caught and recorded in the result.
    """
    seed = spec.seed_base + trial
    result = TrialResult(trial=trial, seed=seed)
    start = time.perf_counter()
    try:
        split = sample_training(dataset, spec.sampling_plan(seed))
        init = initialize(init_method_from_name(spec.init, seed, spec.init_file), dataset.cloud, split,
                          threads=threads)
        U, history = run_sat(graph, split, init, spec.sat_config(threads), truth=dataset.labels)
    except SatError as e:
        result.status = 'failed'
        result.message = str(e)
        log.warning('{} trial {} (seed {}) failed: {}'.format(spec.name, trial, seed, e))
        return result
    result.wall_time = time.perf_counter() - start
    result.accuracy = accuracy(U, dataset.labels)
    result.test_accuracy = accuracy(U, dataset.labels, split, scope='test')
    result.init_accuracy = accuracy(init, dataset.labels)
    result.outer_iters = history.outer_iterations
    result.converged = history.converged
    result.trace = history.to_table()
    log.info('{} trial {}: accuracy {:.4f} after {} outer iterations ({:.2f} s)'.format(
        spec.name, trial, result.accuracy, result.outer_iters, result.wall_time))
    return result


class ExperimentReport(object):
    """Trials of one experiment with aggregate statistics."""
    def __init__(self, spec, trials):
        self.spec = spec
        self.trials = list(trials)

    def __repr__(self):
        return "<ExperimentReport {}: {} trials, {} failed>".format(
            self.spec.name, len(self.trials), self.n_failed)

    @property
    def successful(self):
        return [trial for trial in self.trials if trial.ok]

    @property
    def n_failed(self):
        return len(self.trials) - len(self.successful)

    @property
    def summary(self):
        """Aggregates over the successful trials."""
        ok = self.successful

        def stat(name, func):
            return float(func([getattr(trial, name) for trial in ok])) if ok else np.nan

        return {'trials': len(self.trials), 'failed': self.n_failed,
                'mean_accuracy': stat('accuracy', np.mean), 'std_accuracy': stat('accuracy', np.std),
                'mean_test_accuracy': stat('test_accuracy', np.mean),
                'mean_init_accuracy': stat('init_accuracy', np.mean),
                'mean_outer_iters': stat('outer_iters', np.mean), 'mean_wall_time': stat('wall_time', np.mean),
                'improved': sum(trial.accuracy >= trial.init_accuracy for trial in ok)}

    def trials_table(self):
        names = ('trial', 'seed', 'status', 'accuracy', 'test_accuracy', 'init_accuracy',
                 'outer_iters', 'converged', 'wall_time', 'message')
        table = Table(rows=[[getattr(trial, name) for name in names] for trial in self.trials], names=names)
        table.meta['comments'] = report_comments(self.spec)
        return table

    def summary_table(self):
        summary = self.summary
        table = Table(rows=[[self.spec.name] + list(summary.values())], names=['name'] + list(summary))
        table.meta['comments'] = report_comments(self.spec)
        return table

    def traces_table(self):
        """Per-trial convergence traces: accuracy and label changes by outer iteration."""
        rows = []
        for trial in self.successful:
            for row in trial.trace:
                rows.append([trial.trial, row['iteration'], row['beta'], row['changes'], row['accuracy']])
        table = Table(rows=rows or None, names=('trial', 'iteration', 'beta', 'changes', 'accuracy'),
                      dtype=(int, int, float, int, float))
        table.meta['comments'] = report_comments(self.spec)
        return table

    def check_gates(self):
        """Descriptions of the missed acceptance gates (empty when all pass)."""
        failures = []
        summary = self.summary
        if self.spec.gate is not None:
            if self.n_failed:
                failures.append('{}: {} failed trials'.format(self.spec.name, self.n_failed))
            if not summary['mean_accuracy'] >= self.spec.gate:
                failures.append('{}: mean accuracy {:.4f} < {}'.format(
                    self.spec.name, summary['mean_accuracy'], self.spec.gate))
        if self.spec.gate_outer is not None and not summary['mean_outer_iters'] <= self.spec.gate_outer:
            failures.append('{}: mean outer iterations {:.2f} > {}'.format(
                self.spec.name, summary['mean_outer_iters'], self.spec.gate_outer))
        return failures

    def enforce_gates(self):
        failures = self.check_gates()
        if failures:
            raise AcceptanceGateError(failures)

    def write(self, filename):
        """Write ``filename`` (trials) plus ``-summary`` and ``-traces`` CSV files."""
        stem, ext = os.path.splitext(filename)
        ext = ext or '.csv'
        outputs = [filename, '{}-summary{}'.format(stem, ext), '{}-traces{}'.format(stem, ext)]
        for table, path in zip((self.trials_table(), self.summary_table(), self.traces_table()), outputs):
            table.write(path, format='ascii.csv', overwrite=True)
        return outputs


def run_experiment(spec, dataset=None, graph=None, threads=None, data_dir=None, graph_cache=None):
    """Run all trials of an experiment.

    Parameters
    ----------
    spec : ExperimentSpec
    dataset : LabeledDataset, optional
        Loaded from the spec when omitted.
    graph : Graph, optional
        Built from the spec (or read from ``graph_cache``) when omitted.
    threads : int, optional
        Cap on concurrently running trials.
    data_dir : str, optional
        Directory the spec's relative file names refer to.

    Returns
    -------
    report : ExperimentReport
    """
    if dataset is None:
        dataset = load_dataset(spec.dataset, spec.files, seed=spec.data_seed, noise=spec.noise,
                               label_column=spec.label_column, data_dir=data_dir)
    if graph is None:
        graph = prepare_graph(spec, dataset, graph_cache=graph_cache, threads=threads)
    n_jobs = min(spec.trials, resolve_threads(threads))
    log.info('{}: {} trials on {!r}'.format(spec.name, spec.trials, dataset))
    # one thread per trial when trials already run side by side
    inner = 1 if n_jobs > 1 else threads
    trials = Parallel(n_jobs=n_jobs, prefer='threads')(
        delayed(run_trial)(spec, dataset, graph, t, threads=inner) for t in range(spec.trials))
    report = ExperimentReport(spec, trials)
    summary = report.summary
    log.info('{}: mean accuracy {:.4f} +/- {:.4f}, {:.2f} outer iterations, {} failed'.format(
        spec.name, summary['mean_accuracy'], summary['std_accuracy'], summary['mean_outer_iters'],
        summary['failed']))
    return report


def bundled_spec(name):
    """Path of an experiment spec file shipped with the package."""
    filename = name if name.endswith('.spec') else name + '.spec'
    path = os.path.join(os.path.dirname(__file__), 'data', filename)
    if not os.path.exists(path):
        raise InvalidInputError('no bundled experiment named {!r}'.format(name))
    return path
