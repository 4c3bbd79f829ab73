"""Configuration for ``satclassifier``.

Built-in defaults are kept in an astropy configuration namespace so that
they can be overridden from ``~/.astropy/config/satclassifier.cfg``. The
parameter containers used by the solver and the SaT pipeline read their
defaults from it at construction time.

Experiment spec files and ``--config`` files share one plain text format::

    # comment
    dataset = three-moon
    k = 10
    alpha = 1.0

"""

from collections import OrderedDict
from dataclasses import dataclass, field, replace
import re

from astropy import config as _config

from .exceptions import DataFormatError, InvalidInputError

__all__ = ['Conf', 'conf', 'ModelParams', 'SolverConfig', 'SatConfig',
           'parse_config_file', 'parse_config_lines', 'coerce_value']


class Conf(_config.ConfigNamespace):
    """Configuration parameters for `satclassifier`."""
    max_iters = _config.ConfigItem(
        300, 'Maximum primal-dual iterations per class subproblem.')
    rel_tol = _config.ConfigItem(
        1e-6, 'Relative change of the primal iterate that stops the primal-dual loop.')
    cg_tol = _config.ConfigItem(
        1e-8, 'Relative residual tolerance of the conjugate gradient solve in the primal prox.')
    cg_max_iters = _config.ConfigItem(
        200, 'Maximum conjugate gradient iterations per primal prox.')
    step_mode = _config.ConfigItem(
        ['power', 'theorem'], 'Initial step size rule: power iteration estimate or worst-case bound.')
    power_iters = _config.ConfigItem(
        50, 'Power iterations used to estimate the gradient operator norm.')
    beta_growth = _config.ConfigItem(
        2.0, 'Factor applied to the fidelity weight between outer SaT iterations.')
    max_outer_iters = _config.ConfigItem(
        20, 'Maximum number of outer smoothing/thresholding iterations.')
    approximate_threshold = _config.ConfigItem(
        5000, 'Point count above which k-NN search switches to the randomized kd-tree forest.')
    kdtree_count = _config.ConfigItem(
        4, 'Number of randomized kd-trees in the approximate search forest.')
    kdtree_checks = _config.ConfigItem(
        4096, 'Budget of candidate points checked per query in approximate search.')
    kdtree_leaf_size = _config.ConfigItem(
        16, 'Maximum number of points in a kd-tree leaf.')
    zmp_rank = _config.ConfigItem(
        7, 'Neighbor rank defining the local scale of the Zelnik-Manor/Perona weight.')
    allow_signed_weights = _config.ConfigItem(
        False, 'Clamp negative cosine weights to zero instead of rejecting them.')
    ovr_epochs = _config.ConfigItem(
        20, 'Training epochs of the linear one-vs-rest initializer.')
    ovr_reg_weight = _config.ConfigItem(
        1e-4, 'Regularization weight of the linear one-vs-rest initializer.')
    threads = _config.ConfigItem(
        0, 'Worker thread cap; 0 uses all available cores.')


conf = Conf()


def _conf_default(name):
    return field(default_factory=lambda: getattr(conf, name))


@dataclass(frozen=True)
class ModelParams:
    """Weights of the smoothing model.

    Parameters
    ----------
    alpha : float
        Weight of the Dirichlet (graph Laplacian) term, ``alpha >= 0``.
    beta : float
        Weight of the fidelity term, ``beta > 0``.
    """
    alpha: float = 1.0
    beta: float = 1e-2

    def __post_init__(self):
        if not self.alpha >= 0:
            raise InvalidInputError('alpha must be non-negative, got {}'.format(self.alpha))
        if not self.beta > 0:
            raise InvalidInputError('beta must be positive, got {}'.format(self.beta))

    def with_beta(self, beta):
        return replace(self, beta=beta)


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules and step size policy of the primal-dual solver."""
    max_iters: int = _conf_default('max_iters')
    rel_tol: float = _conf_default('rel_tol')
    cg_tol: float = _conf_default('cg_tol')
    cg_max_iters: int = _conf_default('cg_max_iters')
    step_mode: str = _conf_default('step_mode')
    power_iters: int = _conf_default('power_iters')
    exact_laplacian_block: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInputError('max_iters must be at least 1')
        if self.cg_max_iters < 1:
            raise InvalidInputError('cg_max_iters must be at least 1')
        if self.power_iters < 1:
            raise InvalidInputError('power_iters must be at least 1')
        for name in ('rel_tol', 'cg_tol'):
            if getattr(self, name) < 0:
                raise InvalidInputError('{} must be non-negative'.format(name))
        if self.step_mode not in ('power', 'theorem'):
            raise InvalidInputError("step_mode must be 'power' or 'theorem', got {!r}".format(self.step_mode))


@dataclass(frozen=True)
class SatConfig:
    """Outer loop settings of the smoothing-and-thresholding pipeline."""
    params: ModelParams = field(default_factory=ModelParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    beta_growth: float = _conf_default('beta_growth')
    max_outer_iters: int = _conf_default('max_outer_iters')
    threads: int = _conf_default('threads')

    def __post_init__(self):
        if self.beta_growth < 1:
            raise InvalidInputError('beta_growth must be >= 1, got {}'.format(self.beta_growth))
        if self.max_outer_iters < 1:
            raise InvalidInputError('max_outer_iters must be at least 1')


# set up regular expressions for parsing
rx_dict = OrderedDict([
    ('comment', re.compile(r'^\s*#')),
    ('blank', re.compile(r'^\s*$')),
    ('setting', re.compile(r'^\s*(?P<key>[A-Za-z][\w\-]*)\s*=\s*(?P<value>.*?)\s*$')),
])


def _parse_line(line, rx_dict):
    """Do a regex search against all defined regexes.

    Return the key and match result of the first matching regex.
    """
    for key, rx in rx_dict.items():
        match = rx.search(line)
        if match:
            return key, match

    # if there are no matches
    return None, None


def parse_config_lines(lines, allowed_keys=None, path=None):
    """Parse ``key = value`` lines.

    Parameters
    ----------
    lines : iterable of str
        Text lines.
    allowed_keys : collection of str, optional
        If given, any other key raises an error.
    path : str, optional
        Used in error messages.

    Returns
    -------
    settings : OrderedDict
        Maps each key (dashes normalized to underscores) to a
        ``(value, line_number)`` tuple.
    """
    settings = OrderedDict()
    for number, line in enumerate(lines, start=1):
        kind, match = _parse_line(line.rstrip('\n'), rx_dict)
        if kind in ('comment', 'blank'):
            continue
        if kind is None:
            raise DataFormatError('expected "key = value", got {!r}'.format(line.strip()),
                                  path=path, line=number)
        key = match.group('key').replace('-', '_')
        if allowed_keys is not None and key not in allowed_keys:
            raise DataFormatError('unknown key {!r}'.format(key), path=path, line=number)
        if key in settings:
            raise DataFormatError('duplicate key {!r}'.format(key), path=path, line=number)
        settings[key] = (match.group('value'), number)
    return settings


def parse_config_file(filename, allowed_keys=None):
    """Read and parse a ``key = value`` file line-by-line.

    Parameters
    ----------
    filename : str
        Name of file to parse
    allowed_keys : collection of str, optional
        Keys accepted in the file.

    Returns
    -------
    settings : OrderedDict
        See `parse_config_lines`.

    """
    try:
        with open(filename) as file:
            lines = file.readlines()
    except OSError as e:
        raise DataFormatError('cannot read file ({})'.format(e.strerror), path=filename)
    return parse_config_lines(lines, allowed_keys=allowed_keys, path=filename)


_TRUE = {'1', 'true', 'yes', 'on'}
_FALSE = {'0', 'false', 'no', 'off'}


def coerce_value(value, kind, key='value', path=None, line=None):
    """Convert a raw string setting to ``kind``.

    ``kind`` is one of ``int``, ``float``, ``bool``, ``str``, ``'ints'``
    or ``'strs'`` (comma-separated lists).
    """
    try:
        if kind is bool:
            lowered = value.strip().lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(value)
        if kind == 'ints':
            return tuple(int(part) for part in value.split(',') if part.strip())
        if kind == 'strs':
            return tuple(part.strip() for part in value.split(',') if part.strip())
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        return value
    except ValueError:
        name = kind if isinstance(kind, str) else kind.__name__
        raise DataFormatError('{} = {!r} is not a valid {}'.format(key, value, name),
                              path=path, line=line)
