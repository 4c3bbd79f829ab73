"""Exceptions raised by ``satclassifier``.

The command line maps each class onto an exit code, see
:func:`satclassifier.cli.main`.
"""

__all__ = ['SatError', 'InvalidInputError', 'DataFormatError',
           'SolverStallError', 'AcceptanceGateError']


class SatError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SatError, ValueError):
    """An argument violates a documented precondition."""


class DataFormatError(SatError, ValueError):
    """A file could not be parsed.

    Parameters
    ----------
    message : str
        Description of the problem.
    path : str, optional
        File that was being read.
    line : int, optional
        1-based line (or row) number.
    column : int, optional
        1-based column number.
    """
    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        location = []
        if path is not None:
            location.append(str(path))
        if line is not None:
            location.append('line {}'.format(line))
        if column is not None:
            location.append('column {}'.format(column))
        if location:
            message = '{}: {}'.format(', '.join(location), message)
        super().__init__(message)


class SolverStallError(SatError, RuntimeError):
    """The conjugate gradient inner solve did not reach its tolerance."""
    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        if residual is not None:
            message = '{} (residual {:.3e} after {} iterations)'.format(message, residual, iterations)
        super().__init__(message)


class AcceptanceGateError(SatError):
    """One or more benchmark acceptance gates were missed."""
    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__('acceptance gate(s) missed: ' + '; '.join(self.failures))
