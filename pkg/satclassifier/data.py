"""Datasets: the Three Moon generator, CSV / Opt-Digits / MNIST loaders and
training set sampling."""

from collections import OrderedDict
from dataclasses import dataclass
import gzip
import os
import re

from astropy import log
from astropy.io import ascii
from astropy.io.ascii import InconsistentTableError
from astropy.table import Table
import numpy as np

from .exceptions import DataFormatError, InvalidInputError
from .graph import DataSplit, PointCloud

__all__ = ['LabeledDataset', 'SamplingPlan', 'gen_three_moon', 'load_csv', 'load_optdigits',
           'load_mnist_idx', 'export_csv', 'sample_training', 'load_dataset', 'DATASETS']

DATASETS = ('three-moon', 'csv', 'optdigits', 'mnist', 'coil')

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049


class LabeledDataset(object):
    """Point cloud with ground-truth classes.

    Parameters
    ----------
    cloud : PointCloud
    labels : array-like
        Dense class ids ``0..K-1``, one per point.
    num_classes : int, optional
        Defaults to ``max(labels) + 1``; every class must be present.
    name : str
    mapping : array-like, optional
        Original label value of each dense class id.
    """
    def __init__(self, cloud, labels, num_classes=None, name='dataset', mapping=None):
        labels = np.array(labels, dtype=np.int64)
        if labels.shape != (cloud.n,):
            raise InvalidInputError('expected {} labels, got shape {}'.format(cloud.n, labels.shape))
        if np.any(labels < 0):
            raise InvalidInputError('labels must be non-negative')
        num_classes = int(labels.max()) + 1 if num_classes is None else int(num_classes)
        counts = np.bincount(labels, minlength=num_classes)
        if counts.size > num_classes or np.any(counts == 0):
            raise InvalidInputError('labels must cover every class 0..{} exactly'.format(num_classes - 1))
        self.cloud = cloud
        self.labels = labels
        self.labels.flags.writeable = False
        self.num_classes = num_classes
        self.name = name
        self.mapping = np.arange(num_classes) if mapping is None else np.asarray(mapping)

    def __repr__(self):
        return "<LabeledDataset {}: {} points, {} dims, {} classes>".format(
            self.name, self.cloud.n, self.cloud.dim, self.num_classes)

    @property
    def class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)


@dataclass(frozen=True)
class SamplingPlan:
    """How training points are drawn.

    ``mode='uniform'`` draws ``total`` points without replacement from the
    whole set; ``mode='per_class'`` draws ``counts[j]`` points of class
    ``j``.
    """
    mode: str = 'uniform'
    total: int = 0
    counts: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.mode == 'uniform':
            if self.total < 1:
                raise InvalidInputError('uniform sampling needs a positive total, got {}'.format(self.total))
        elif self.mode == 'per_class':
            object.__setattr__(self, 'counts', tuple(int(c) for c in self.counts))
            if not self.counts or min(self.counts) < 1:
                raise InvalidInputError('per-class counts must all be at least 1, got {}'.format(self.counts))
        else:
            raise InvalidInputError("mode must be 'uniform' or 'per_class', got {!r}".format(self.mode))

    @property
    def size(self):
        return self.total if self.mode == 'uniform' else sum(self.counts)


def gen_three_moon(seed=0, noise=0.14, n_per_class=500, dim=100):
    """Three half circles embedded in ``R^dim`` with Gaussian noise.

    Classes 0 and 1 are upper unit half circles centered at ``(0, 0)`` and
    ``(3, 0)``; class 2 is the lower half circle of radius 1.5 centered at
    ``(1.5, 0.4)``. Angles are uniform, the geometry lives in the first two
    coordinates and i.i.d. ``N(0, noise^2)`` noise is added to every
    coordinate.
    """
    if dim < 2:
        raise InvalidInputError('dim must be at least 2')
    rng = np.random.default_rng(seed)
    arcs = [((0.0, 0.0), 1.0, 0.0), ((3.0, 0.0), 1.0, 0.0), ((1.5, 0.4), 1.5, np.pi)]
    points = np.zeros((3 * n_per_class, dim))
    labels = np.repeat(np.arange(3), n_per_class)
    for j, (center, radius, offset) in enumerate(arcs):
        angle = offset + rng.uniform(0.0, np.pi, n_per_class)
        rows = slice(j * n_per_class, (j + 1) * n_per_class)
        points[rows, 0] = center[0] + radius * np.cos(angle)
        points[rows, 1] = center[1] + radius * np.sin(angle)
    if noise > 0:
        points += rng.normal(0.0, noise, points.shape)
    return LabeledDataset(PointCloud(points), labels, 3, name='three-moon')


# set up regular expressions for parsing
rx_dict = OrderedDict([
    ('blank', re.compile(r'^\s*$')),
    ('comment', re.compile(r'^\s*#')),
    ('number', re.compile(r'^\s*[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?\s*$')),
])


def _is_number(cell):
    return rx_dict['number'].match(cell) is not None


def _read_csv(path, label_column=-1):
    """Parse a numeric CSV file into features and raw labels."""
    try:
        with open(path) as file:
            lines = file.read().splitlines()
    except OSError as e:
        raise DataFormatError('cannot read file ({})'.format(e.strerror), path=path)

    numbered = [(number, line) for number, line in enumerate(lines, start=1)
                if not (rx_dict['blank'].match(line) or rx_dict['comment'].match(line))]
    if not numbered:
        raise DataFormatError('no data rows', path=path)
    try:
        raw = ascii.read([line for _, line in numbered], format='no_header', delimiter=',',
                         guess=False, fast_reader=False,
                         converters={'*': [ascii.convert_numpy(str)]})
    except InconsistentTableError:
        width = len(numbered[0][1].split(','))
        for number, line in numbered:
            if len(line.split(',')) != width:
                raise DataFormatError('expected {} columns, found {}'.format(width, len(line.split(','))),
                                      path=path, line=number)
        raise DataFormatError('inconsistent number of columns', path=path)

    # cells as strings, empty ones included, row by row
    cells = np.column_stack([np.ma.filled(raw[name], '') for name in raw.colnames])
    width = cells.shape[1]
    if not all(_is_number(cell) for cell in cells[0]):
        log.debug('{}: skipping header row'.format(path))
        cells, numbered = cells[1:], numbered[1:]
    for row, (number, _) in zip(cells, numbered):
        for column, cell in enumerate(row, start=1):
            if not _is_number(cell):
                raise DataFormatError('non-numeric cell {!r}'.format(str(cell).strip()),
                                      path=path, line=number, column=column)

    if not len(cells):
        raise DataFormatError('no data rows', path=path)
    if width < 2:
        raise DataFormatError('need at least one feature column and a label column', path=path)
    table = cells.astype(np.float64)
    label_column = label_column % width
    features = np.delete(table, label_column, axis=1)
    return features, table[:, label_column]


def _dense_labels(raw):
    mapping, labels = np.unique(raw, return_inverse=True)
    if np.all(mapping == np.round(mapping)):
        mapping = mapping.astype(np.int64)
    return labels.astype(np.int64), mapping


def load_csv(path, label_column=-1, name=None):
    """Load a numeric CSV file, one point per row.

    A first row that is not entirely numeric is taken as a header. Labels
    are remapped to dense ids ``0..K-1``; ``dataset.mapping`` holds the
    original values.

    Parameters
    ----------
    path : str
    label_column : int
        Index of the label column (negative counts from the end).
    name : str, optional
    """
    features, raw = _read_csv(path, label_column)
    labels, mapping = _dense_labels(raw)
    name = os.path.splitext(os.path.basename(path))[0] if name is None else name
    return LabeledDataset(PointCloud(features), labels, mapping.size, name=name, mapping=mapping)


def load_optdigits(train_path, test_path=None):
    """UCI Opt-Digits: training and test files concatenated.

    The files are header-less CSV with 64 integer features in ``0..16`` and
    the digit last.
    """
    parts = [_read_csv(path) for path in (train_path, test_path) if path is not None]
    features = np.vstack([features for features, _ in parts])
    labels, mapping = _dense_labels(np.concatenate([raw for _, raw in parts]))
    return LabeledDataset(PointCloud(features), labels, mapping.size, name='optdigits', mapping=mapping)


def _read_idx(path, magic):
    opener = gzip.open if path.endswith('.gz') else open
    try:
        with opener(path, 'rb') as file:
            payload = file.read()
    except OSError as e:
        raise DataFormatError('cannot read IDX file ({})'.format(e), path=path)

    n_dims = 3 if magic == IDX_IMAGES_MAGIC else 1
    header_size = 4 * (1 + n_dims)
    if len(payload) < header_size:
        raise DataFormatError('truncated IDX header', path=path)
    header = np.frombuffer(payload[:header_size], dtype='>u4')
    if header[0] != magic:
        raise DataFormatError('magic number {} (expected {})'.format(header[0], magic), path=path)
    shape = tuple(int(size) for size in header[1:])
    expected = int(np.prod(shape))
    if len(payload) - header_size < expected:
        raise DataFormatError('truncated IDX payload: {} of {} bytes'.format(
            len(payload) - header_size, expected), path=path)
    return np.frombuffer(payload, dtype=np.uint8, count=expected, offset=header_size).reshape(shape)


def load_mnist_idx(images_path, labels_path, test_images_path=None, test_labels_path=None):
    """MNIST from IDX files (optionally gzip compressed).

    Pixels are scaled to ``[0, 1]``. When the test pair is given it is
    appended to the training pair.
    """
    pairs = [(images_path, labels_path)]
    if test_images_path is not None or test_labels_path is not None:
        if test_images_path is None or test_labels_path is None:
            raise InvalidInputError('the test images and labels must be given together')
        pairs.append((test_images_path, test_labels_path))

    images, labels = [], []
    for image_path, label_path in pairs:
        pixels = _read_idx(image_path, IDX_IMAGES_MAGIC)
        digits = _read_idx(label_path, IDX_LABELS_MAGIC)
        if pixels.shape[0] != digits.shape[0]:
            raise DataFormatError('{} images but {} labels in {}'.format(
                pixels.shape[0], digits.shape[0], label_path), path=image_path)
        images.append(pixels.reshape(pixels.shape[0], -1).astype(np.float64) / 255.0)
        labels.append(digits.astype(np.int64))
    labels, mapping = _dense_labels(np.concatenate(labels))
    return LabeledDataset(PointCloud(np.vstack(images)), labels, mapping.size, name='mnist', mapping=mapping)


def export_csv(dataset, path, mapping_path=None):
    """Write a dataset as CSV: header row, features with 17 significant
    digits, label last.

    The label mapping is written to ``mapping_path`` (default
    ``<path>.labels.csv``).
    """
    names = ['x{}'.format(i) for i in range(dataset.cloud.dim)]
    table = Table(dataset.cloud.points, names=names)
    table['label'] = dataset.labels
    table.write(path, format='ascii.csv', formats={name: '%.17g' for name in names}, overwrite=True)

    mapping_path = '{}.labels.csv'.format(path) if mapping_path is None else mapping_path
    Table([np.arange(dataset.num_classes), dataset.mapping], names=['label', 'original']).write(
        mapping_path, format='ascii.csv', overwrite=True)
    return path, mapping_path


def sample_training(dataset, plan):
    """Draw a training set according to ``plan``.

    Uniform plans draw without replacement, then swap in one point of every
    class that was missed (replacing a point of the best represented
    class). Deterministic for a given ``plan.seed``.

    Returns
    -------
    split : DataSplit
    """
    rng = np.random.default_rng(plan.seed)
    labels = dataset.labels
    K = dataset.num_classes
    members = [np.flatnonzero(labels == j) for j in range(K)]

    if plan.mode == 'uniform':
        if not K <= plan.total <= dataset.cloud.n:
            raise InvalidInputError('cannot draw {} training points covering {} classes from {} points'.format(
                plan.total, K, dataset.cloud.n))
        chosen = rng.choice(dataset.cloud.n, plan.total, replace=False)
        for j in range(K):
            if np.any(labels[chosen] == j):
                continue
            counts = np.bincount(labels[chosen], minlength=K)
            donor = int(np.argmax(counts))
            slots = np.flatnonzero(labels[chosen] == donor)
            chosen[slots[rng.integers(slots.size)]] = members[j][rng.integers(members[j].size)]
    else:
        if len(plan.counts) != K:
            raise InvalidInputError('expected {} per-class counts, got {}'.format(K, len(plan.counts)))
        chosen = []
        for j, count in enumerate(plan.counts):
            if count > members[j].size:
                raise InvalidInputError('class {} has {} points, cannot draw {}'.format(j, members[j].size, count))
            chosen.append(rng.choice(members[j], count, replace=False))
        chosen = np.concatenate(chosen)

    return DataSplit(dataset.cloud.n, chosen, labels[chosen], K)


def load_dataset(dataset, files=(), seed=0, noise=0.14, label_column=-1, data_dir=None):
    """Load a dataset by id.

    Parameters
    ----------
    dataset : str
        One of `DATASETS`.
    files : sequence of str
        Input files: a CSV file for ``csv`` and ``coil``; the training and
        optionally test file for ``optdigits``; the image and label files
        (and optionally the test pair) for ``mnist``.
    seed, noise : optional
        Generator settings for ``three-moon``.
    data_dir : str, optional
        Directory relative file names are resolved against.
    """
    if dataset not in DATASETS:
        raise InvalidInputError('unknown dataset {!r}; choose from {}'.format(dataset, ', '.join(DATASETS)))
    if dataset == 'three-moon':
        return gen_three_moon(seed=seed, noise=noise)

    files = [path if data_dir is None else os.path.join(data_dir, path) for path in files]
    expected = {'csv': (1,), 'coil': (1,), 'optdigits': (1, 2), 'mnist': (2, 4)}[dataset]
    if len(files) not in expected:
        raise InvalidInputError('dataset {} needs {} input file(s), got {}'.format(
            dataset, ' or '.join(str(n) for n in expected), len(files)))
    if dataset == 'optdigits':
        return load_optdigits(*files)
    if dataset == 'mnist':
        return load_mnist_idx(*files)
    return load_csv(files[0], label_column=label_column, name=dataset if dataset == 'coil' else None)
