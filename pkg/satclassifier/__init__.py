# Licensed under a 3-clause BSD style license - see LICENSE.rst
"""Smoothing-and-thresholding (SaT) semi-supervised classification of point
clouds on k-nearest-neighbor graphs."""

# Packages may add whatever they like to this file, but
# should keep this content at the top.
# ----------------------------------------------------------------------------
from ._astropy_init import *
# ----------------------------------------------------------------------------

# Enforce Python version check during package import.
# This is the same check as the one at the top of setup.py
import sys

__minimum_python_version__ = "3.9"


class UnsupportedPythonError(Exception):
    pass


if sys.version_info < tuple((int(val) for val in __minimum_python_version__.split('.'))):
    raise UnsupportedPythonError("satclassifier does not support Python < {}".format(__minimum_python_version__))

from .config import conf, ModelParams, SolverConfig, SatConfig  # noqa: E402
from .exceptions import (SatError, InvalidInputError, DataFormatError,  # noqa: E402
                         SolverStallError, AcceptanceGateError)
from .graph import (PointCloud, RBF, ZelnikManorPerona, Cosine, Graph, DataSplit,  # noqa: E402
                    build_graph, assemble_laplacian_split, GradientOp)
from .pipeline import LabelMatrix, run_sat, threshold  # noqa: E402
from .data import LabeledDataset, SamplingPlan, gen_three_moon, sample_training  # noqa: E402
