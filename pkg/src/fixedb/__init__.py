"""Lag-window variance estimation and confidence intervals for (adaptive) MCMC.

The package provides:

* weight kernels and the centered kernel driving the fixed-b limit law
  (:mod:`fixedb.kernels`),
* its Nystrom eigendecomposition (:mod:`fixedb.mercer`),
* simulation of the fixed-b limiting distribution, quantile and CDF tables
  (:mod:`fixedb.limitdist`),
* the lag-window estimator, effective sample size and studentized statistic
  (:mod:`fixedb.lagwindow`),
* reference targets and samplers (:mod:`fixedb.chains`),
* the two confidence-interval procedures (:mod:`fixedb.ci`),
* the replication harness for coverage, convergence-rate and multi-limit
  studies (:mod:`fixedb.experiments`),
* a command-line interface (:mod:`fixedb.cli`).
"""

__version__ = "0.1.0"

from fixedb.exceptions import (
    DomainError,
    KernelNotPositiveDefiniteError,
    MissingTableRowError,
    NonStudentizableError,
)
from fixedb.kernels import WeightKernel, bartlett, custom_kernel, quadratic

__all__ = [
    "__version__",
    "WeightKernel",
    "bartlett",
    "quadratic",
    "custom_kernel",
    "DomainError",
    "NonStudentizableError",
    "KernelNotPositiveDefiniteError",
    "MissingTableRowError",
]
