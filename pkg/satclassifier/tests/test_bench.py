"""Tests for the ``bench`` module."""

import os

import numpy as np
from numpy.testing import assert_allclose
import pytest
from astropy.table import Table

from ..bench import (ExperimentReport, ExperimentSpec, TrialResult, accuracy, bundled_spec, make_weight_kind,
                     prepare_graph, run_experiment, run_trial)
from ..data import LabeledDataset, gen_three_moon
from ..exceptions import AcceptanceGateError, DataFormatError, InvalidInputError
from ..graph import RBF, Cosine, DataSplit, PointCloud, ZelnikManorPerona
from ..pipeline import LabelMatrix

BUNDLED = ('threemoon-uniform', 'threemoon-uniform-xi3', 'threemoon-nonuniform', 'optdigits-50',
           'optdigits-100', 'optdigits-150', 'mnist-2500', 'coil-10pct')


@pytest.fixture
def blob_dataset(blobs):
    points, labels = blobs
    return LabeledDataset(PointCloud(points), labels, 3, name='blobs')


def blob_spec(**settings):
    values = dict(name='blobs', dataset='csv', k=8, kernel_denom=2.0, init='nearest-neighbor',
                  train_total=9, trials=3, max_outer=5)
    values.update(settings)
    return ExperimentSpec(**values)


def test_accuracy():
    truth = np.array([0, 1, 2, 2])
    assert accuracy([0, 1, 2, 2], truth) == 1.0
    assert accuracy([0, 1, 1, 0], truth) == 0.5
    assert accuracy(LabelMatrix.from_labels([0, 0, 2, 2], 3), truth) == 0.75
    split = DataSplit(4, [0, 1], [0, 1], 2)
    assert accuracy([0, 1, 2, 0], truth, split, scope='test') == 0.5
    with pytest.raises(InvalidInputError):
        accuracy([0, 1], truth)
    with pytest.raises(InvalidInputError):
        accuracy([0, 1, 2, 2], truth, scope='test')
    with pytest.raises(InvalidInputError):
        accuracy([0, 1, 2, 2], truth, split, scope='train')


def test_weight_kinds():
    assert make_weight_kind('rbf', 18) == RBF(9.0)
    assert make_weight_kind('zmp', zmp_rank=5) == ZelnikManorPerona(5)
    assert isinstance(make_weight_kind('cosine'), Cosine)
    with pytest.raises(InvalidInputError):
        make_weight_kind('rbf')
    with pytest.raises(InvalidInputError):
        make_weight_kind('laplace', 1.0)


@pytest.mark.parametrize('name', BUNDLED)
def test_bundled_specs_parse(name):
    spec = ExperimentSpec.from_file(bundled_spec(name))
    assert spec.name == name
    assert spec.trials >= 1
    assert spec.sampling_plan(0).size >= 50


def test_bundled_spec_values():
    spec = ExperimentSpec.from_file(bundled_spec('threemoon-nonuniform'))
    assert spec.train_counts == (5, 65, 5)
    assert spec.weight_kind() == RBF(9.0)
    assert spec.gate == 0.985
    optdigits = ExperimentSpec.from_file(bundled_spec('optdigits-50.spec'))
    assert optdigits.files == ('optdigits.tra', 'optdigits.tes')
    assert optdigits.weight_kind().denominator == 1800
    with pytest.raises(InvalidInputError):
        bundled_spec('imagenet')


def test_spec_file_errors(tmp_path):
    path = tmp_path / 'bad.spec'
    path.write_text('k = 10\n# comment\nlearning_rate = 0.1\n')
    with pytest.raises(DataFormatError) as error:
        ExperimentSpec.from_file(str(path))
    assert error.value.line == 3

    path.write_text('k = 10\nalpha = lots\n')
    with pytest.raises(DataFormatError) as error:
        ExperimentSpec.from_file(str(path))
    assert error.value.line == 2

    path.write_text('beta = -1\n')
    with pytest.raises(InvalidInputError):
        ExperimentSpec.from_file(str(path))


def test_spec_overrides_and_defaults(tmp_path):
    path = tmp_path / 'small.spec'
    path.write_text('trials = 4\nalpha = 0.5\n')
    spec = ExperimentSpec.from_file(str(path), trials=2, seed_base=None)
    assert spec.name == 'small'
    assert spec.trials == 2
    assert spec.alpha == 0.5
    assert spec.seed_base == 0
    assert 'alpha = 0.5' in spec.to_lines()

    with pytest.raises(InvalidInputError):
        ExperimentSpec(trials=0)
    with pytest.raises(InvalidInputError):
        ExperimentSpec(sampling='random')


def test_run_trial(blob_dataset):
    spec = blob_spec()
    graph = prepare_graph(spec, blob_dataset, threads=1)
    result = run_trial(spec, blob_dataset, graph, 1)
    assert result.ok
    assert result.seed == 1
    assert result.accuracy == 1.0
    assert result.converged
    assert len(result.trace) == result.outer_iters + 1


def test_failed_trial_is_recorded(blob_dataset, tmp_path):
    spec = blob_spec(init='external', init_file=str(tmp_path / 'missing.txt'), trials=2)
    report = run_experiment(spec, blob_dataset, threads=1)
    assert report.n_failed == 2
    assert all(trial.status == 'failed' for trial in report.trials)
    assert np.isnan(report.summary['mean_accuracy'])
    assert len(report.traces_table()) == 0


def test_experiment_is_deterministic(blob_dataset):
    spec = blob_spec()
    first = run_experiment(spec, blob_dataset, threads=1)
    second = run_experiment(spec, blob_dataset, threads=3)
    assert [t.accuracy for t in first.trials] == [t.accuracy for t in second.trials]
    assert [t.outer_iters for t in first.trials] == [t.outer_iters for t in second.trials]


def test_summary_aggregates():
    trials = [TrialResult(trial=0, seed=0, accuracy=0.9, test_accuracy=0.8, init_accuracy=0.7, outer_iters=2,
                          converged=True, wall_time=1.0),
              TrialResult(trial=1, seed=1, accuracy=0.7, test_accuracy=0.6, init_accuracy=0.8, outer_iters=4,
                          converged=True, wall_time=3.0),
              TrialResult(trial=2, seed=2, status='failed', message='boom')]
    report = ExperimentReport(ExperimentSpec(name='agg'), trials)
    summary = report.summary
    assert summary['trials'] == 3
    assert summary['failed'] == 1
    assert_allclose(summary['mean_accuracy'], 0.8)
    assert_allclose(summary['std_accuracy'], 0.1)
    assert_allclose(summary['mean_outer_iters'], 3.0)
    assert summary['improved'] == 1


def test_gates(blob_dataset):
    report = run_experiment(blob_spec(gate=0.9, gate_outer=5), blob_dataset, threads=1)
    assert report.check_gates() == []
    report.enforce_gates()

    strict = ExperimentReport(blob_spec(gate=1.01, gate_outer=0.5), report.trials)
    failures = strict.check_gates()
    assert len(failures) == 2
    with pytest.raises(AcceptanceGateError):
        strict.enforce_gates()

    with_failure = ExperimentReport(blob_spec(gate=0.5), report.trials + [TrialResult(trial=3, seed=3,
                                                                                        status='failed')])
    assert any('failed trials' in failure for failure in with_failure.check_gates())


def test_report_files(blob_dataset, tmp_path):
    report = run_experiment(blob_spec(trials=2), blob_dataset, threads=1)
    outputs = report.write(str(tmp_path / 'blobs.csv'))
    assert [os.path.basename(path) for path in outputs] == ['blobs.csv', 'blobs-summary.csv', 'blobs-traces.csv']
    for path in outputs:
        with open(path) as file:
            assert file.readline().startswith('# satclassifier ')

    trials = Table.read(outputs[0], format='ascii.csv')
    assert list(trials['trial']) == [0, 1]
    assert 'k = 8' in trials.meta['comments']
    summary = Table.read(outputs[1], format='ascii.csv')
    assert_allclose(summary['mean_accuracy'][0], np.mean(trials['accuracy']))


def test_graph_cache(blob_dataset, tmp_path):
    spec = blob_spec()
    cache = str(tmp_path / 'blobs.satg')
    built = prepare_graph(spec, blob_dataset, graph_cache=cache, threads=1)
    assert os.path.exists(cache)
    cached = prepare_graph(spec, blob_dataset, graph_cache=cache, threads=1)
    assert (built.affinity != cached.affinity).nnz == 0
    with pytest.raises(InvalidInputError):
        prepare_graph(blob_spec(k=5), blob_dataset, graph_cache=cache)


@pytest.mark.slow
@pytest.mark.parametrize('name', ['threemoon-uniform', 'threemoon-nonuniform'])
def test_three_moon_reproduction(name):
    spec = ExperimentSpec.from_file(bundled_spec(name))
    report = run_experiment(spec, gen_three_moon(seed=spec.data_seed, noise=spec.noise))
    assert report.n_failed == 0
    report.enforce_gates()
    assert report.summary['improved'] >= 9
