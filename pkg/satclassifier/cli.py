"""Command line interface.

::

    satclassifier generate three-moon --seed 1 --out tm.csv
    satclassifier build-graph --dataset three-moon --k 10 --out tm.satg
    satclassifier classify --dataset three-moon --train-uniform 75 --out pred.txt --report run.csv
    satclassifier bench threemoon-uniform --report bench.csv

Exit codes: 0 success, 1 usage or invalid input, 2 data or format error,
3 solver failure, 4 missed acceptance gate.
"""

import argparse
import json
import os
import sys
import threading

from astropy import log
import numpy as np

from ._astropy_init import __version__
from .bench import (WEIGHTS, ExperimentSpec, accuracy, bundled_spec, prepare_graph, report_comments,
                    run_experiment)
from .config import parse_config_file
from .data import DATASETS, export_csv, gen_three_moon, load_dataset, sample_training
from .exceptions import AcceptanceGateError, DataFormatError, InvalidInputError, SolverStallError
from .graph import DataSplit
from .initialization import INIT_METHODS, init_method_from_name, initialize
from .pipeline import run_sat

__all__ = ['main', 'build_parser']

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER, EXIT_GATE = range(5)

DEFAULT_SUITE = ('threemoon-uniform', 'threemoon-nonuniform', 'optdigits-50', 'optdigits-100',
                 'optdigits-150')


class _ArgumentParser(argparse.ArgumentParser):
    """Parser whose usage errors exit with `EXIT_USAGE`."""
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, '{}: error: {}\n'.format(self.prog, message))


def _int_list(value):
    try:
        return tuple(int(part) for part in value.split(',') if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError('expected comma-separated integers, got {!r}'.format(value))


def _data_arguments():
    parent = _ArgumentParser(add_help=False)
    group = parent.add_argument_group('dataset')
    group.add_argument('--dataset', choices=DATASETS, help='dataset id (default three-moon)')
    group.add_argument('--files', type=lambda v: tuple(p.strip() for p in v.split(',') if p.strip()),
                       help='comma-separated input files of the dataset')
    group.add_argument('--data-dir', help='directory relative input files are read from')
    group.add_argument('--data-seed', type=int, help='seed of the generated Three Moon set')
    group.add_argument('--noise', type=float, help='Three Moon noise standard deviation')
    group.add_argument('--label-column', type=int, help='label column of CSV input')
    group.add_argument('--config', help='key = value file with defaults for these flags')
    return parent


def _graph_arguments():
    parent = _ArgumentParser(add_help=False)
    group = parent.add_argument_group('graph')
    group.add_argument('--k', type=int, help='neighborhood size including the point itself')
    group.add_argument('--weight', choices=WEIGHTS, help='edge weight function')
    group.add_argument('--kernel-denom', type=float, help='RBF denominator 2*xi')
    group.add_argument('--zmp-rank', type=int, help='neighbor rank of the local scale')
    group.add_argument('--graph-mode', choices=('auto', 'exact', 'approximate'), help='k-NN search mode')
    return parent


def build_parser():
    parser = _ArgumentParser(prog='satclassifier',
                             description='Smoothing-and-thresholding semi-supervised classification.')
    parser.add_argument('--version', action='version', version='%(prog)s {}'.format(__version__))
    parser.add_argument('-v', '--verbose', action='store_true', help='log debug messages')
    parser.add_argument('-q', '--quiet', action='store_true', help='log warnings and errors only')
    parser.add_argument('--threads', type=int, help='worker thread cap (default: all cores)')
    commands = parser.add_subparsers(dest='command', metavar='command', parser_class=_ArgumentParser)
    commands.required = True

    generate = commands.add_parser('generate', help='generate a synthetic dataset as CSV')
    generate.add_argument('dataset', choices=('three-moon',))
    generate.add_argument('--seed', type=int, default=0)
    generate.add_argument('--noise', type=float, default=0.14)
    generate.add_argument('--out', required=True, help='CSV file to write')
    generate.set_defaults(func=cmd_generate)

    data, graph = _data_arguments(), _graph_arguments()
    build = commands.add_parser('build-graph', parents=[data, graph], help='build and cache a k-NN graph')
    build.add_argument('--out', required=True, help='graph cache file to write')
    build.set_defaults(func=cmd_build_graph)

    classify = commands.add_parser('classify', parents=[data, graph], help='classify one dataset')
    model = classify.add_argument_group('model')
    model.add_argument('--alpha', type=float)
    model.add_argument('--beta', type=float)
    model.add_argument('--max-outer', type=int, help='outer iteration cap')
    model.add_argument('--tol', type=float, help='relative change stopping the primal-dual loop')
    model.add_argument('--exact-laplacian-block', action='store_true', default=None,
                       help='use LS + L1 instead of LS in the smoothing model')
    model.add_argument('--init', choices=INIT_METHODS)
    model.add_argument('--init-file', help='labels for --init external')
    train = classify.add_mutually_exclusive_group()
    train.add_argument('--train-file', help='training ids, one "id" or "id,label" per line')
    train.add_argument('--train-uniform', type=int, metavar='N')
    train.add_argument('--train-per-class', type=_int_list, metavar='A,B,...')
    classify.add_argument('--seed', type=int, help='seed of the sampling and the initializer')
    classify.add_argument('--graph-cache', help='graph cache to read, or write when missing')
    classify.add_argument('--out', required=True, help='predicted labels, one per line')
    classify.add_argument('--report', help='CSV run report')
    classify.add_argument('--diagnostics', help='JSON lines file of primal-dual iterations')
    classify.set_defaults(func=cmd_classify)

    bench = commands.add_parser('bench', help='run experiment spec files')
    bench.add_argument('specs', nargs='*',
                       help='spec files or bundled experiment names (default: the gated suite)')
    bench.add_argument('--data-dir', help='directory relative input files are read from')
    bench.add_argument('--trials', type=int)
    bench.add_argument('--seed-base', type=int)
    bench.add_argument('--graph-cache', help='graph cache (single spec only)')
    bench.add_argument('--report', help='CSV report; one set of files per spec')
    bench.set_defaults(func=cmd_bench)
    return parser


def _resolve_spec(args, **extra):
    """Experiment settings from built-in defaults, ``--config`` and flags,
    in increasing precedence."""
    settings = {}
    if getattr(args, 'config', None):
        settings = parse_config_file(args.config, allowed_keys=ExperimentSpec.kinds)
    overrides = {name: getattr(args, name, None) for name in
                 ('dataset', 'files', 'data_seed', 'noise', 'label_column', 'k', 'weight', 'kernel_denom',
                  'zmp_rank', 'graph_mode', 'alpha', 'beta', 'init', 'init_file', 'exact_laplacian_block')}
    overrides['max_outer'] = getattr(args, 'max_outer', None)
    overrides['rel_tol'] = getattr(args, 'tol', None)
    overrides['seed_base'] = getattr(args, 'seed', None)
    if getattr(args, 'train_uniform', None) is not None:
        overrides.update(sampling='uniform', train_total=args.train_uniform)
    if getattr(args, 'train_per_class', None) is not None:
        overrides.update(sampling='per_class', train_counts=args.train_per_class)
    overrides.update(extra)
    return ExperimentSpec.from_settings(settings, path=getattr(args, 'config', None), **overrides)


def _load(spec, args):
    return load_dataset(spec.dataset, spec.files, seed=spec.data_seed, noise=spec.noise,
                        label_column=spec.label_column, data_dir=getattr(args, 'data_dir', None))


def read_train_file(path, dataset):
    """Training split from a file of ``id`` or ``id,label`` lines.

    Missing labels are taken from the dataset.
    """
    try:
        with open(path) as file:
            lines = file.read().splitlines()
    except OSError as e:
        raise DataFormatError('cannot read training file ({})'.format(e.strerror), path=path)
    ids, labels = [], []
    for number, line in enumerate(lines, start=1):
        parts = [part.strip() for part in line.replace(',', ' ').split()]
        if not parts or parts[0].startswith('#'):
            continue
        try:
            values = [int(part) for part in parts]
        except ValueError:
            raise DataFormatError('expected integer "id" or "id,label", got {!r}'.format(line), path=path,
                                  line=number)
        if len(values) > 2 or not 0 <= values[0] < dataset.cloud.n:
            raise DataFormatError('invalid training entry {!r}'.format(line), path=path, line=number)
        ids.append(values[0])
        labels.append(values[1] if len(values) == 2 else dataset.labels[values[0]])
    return DataSplit(dataset.cloud.n, ids, labels, dataset.num_classes)


def cmd_generate(args):
    dataset = gen_three_moon(seed=args.seed, noise=args.noise)
    path, mapping_path = export_csv(dataset, args.out)
    log.info('wrote {!r} to {} (label mapping {})'.format(dataset, path, mapping_path))
    return EXIT_OK


def cmd_build_graph(args):
    spec = _resolve_spec(args, trials=1)
    dataset = _load(spec, args)
    prepare_graph(spec, dataset, graph_cache=args.out, threads=args.threads)
    return EXIT_OK


class _JsonLines(object):
    """Thread-safe JSON lines writer for solver diagnostics."""
    def __init__(self, file):
        self.file = file
        self.lock = threading.Lock()

    def __call__(self, record):
        line = json.dumps(record)
        with self.lock:
            self.file.write(line + '\n')


def cmd_classify(args):
    spec = _resolve_spec(args, trials=1)
    dataset = _load(spec, args)
    graph = prepare_graph(spec, dataset, graph_cache=args.graph_cache, threads=args.threads)
    if args.train_file:
        split = read_train_file(args.train_file, dataset)
    else:
        split = sample_training(dataset, spec.sampling_plan(spec.seed_base))
    init = initialize(init_method_from_name(spec.init, spec.seed_base, spec.init_file), dataset.cloud, split,
                      threads=args.threads)

    cfg = spec.sat_config(args.threads)
    if args.diagnostics:
        with open(args.diagnostics, 'w') as file:
            U, history = run_sat(graph, split, init, cfg, truth=dataset.labels, diagnostics=_JsonLines(file))
    else:
        U, history = run_sat(graph, split, init, cfg, truth=dataset.labels)

    np.savetxt(args.out, U.labels(), fmt='%d')
    log.info('accuracy {:.4f} (test points {:.4f}, initialization {:.4f}) after {} outer iterations'.format(
        accuracy(U, dataset.labels), accuracy(U, dataset.labels, split, scope='test'),
        accuracy(init, dataset.labels), history.outer_iterations))
    if args.report:
        table = history.to_table()
        table.meta['comments'] = report_comments(spec) + table.meta['comments'] + [
            'init_accuracy = {}'.format(accuracy(init, dataset.labels))]
        table.write(args.report, format='ascii.csv', overwrite=True)
    return EXIT_OK


def cmd_bench(args):
    names = args.specs or DEFAULT_SUITE
    if args.graph_cache and len(names) > 1:
        raise InvalidInputError('--graph-cache needs a single spec')
    overrides = {'trials': args.trials, 'seed_base': args.seed_base}
    failures = []
    for name in names:
        path = name if name.endswith('.spec') else bundled_spec(name)
        spec = ExperimentSpec.from_file(path, **overrides)
        report = run_experiment(spec, threads=args.threads, data_dir=args.data_dir, graph_cache=args.graph_cache)
        if args.report:
            report_path = args.report
            if len(names) > 1:
                stem, ext = os.path.splitext(args.report)
                report_path = '{}-{}{}'.format(stem, spec.name, ext or '.csv')
            for output in report.write(report_path):
                log.info('wrote {}'.format(output))
        failures.extend(report.check_gates())
    if failures:
        raise AcceptanceGateError(failures)
    return EXIT_OK


def main(argv=None):
    """Console script entry point; returns the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        log.setLevel('DEBUG')
    elif args.quiet:
        log.setLevel('WARNING')
    else:
        log.setLevel('INFO')

    try:
        return args.func(args)
    except AcceptanceGateError as e:
        log.error(str(e))
        return EXIT_GATE
    except SolverStallError as e:
        log.error(str(e))
        return EXIT_SOLVER
    except (DataFormatError, OSError) as e:
        log.error(str(e))
        return EXIT_DATA
    except InvalidInputError as e:
        log.error(str(e))
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
