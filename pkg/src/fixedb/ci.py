"""Confidence intervals for the stationary mean from a single chain path.

Two procedures share the pivot sqrt(n)(mean - truth)/sqrt(Gamma^2):

* *classical*: bandwidth c_n = o(n), standard-normal critical value;
* *fixed-b*: bandwidth c_n = n, critical value from a persisted quantile
  table of the non-Gaussian limit law.

``level`` is the confidence level (e.g. 0.95); the critical value is the
(1 - (1-level)/2)-quantile of the respective limit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from fixedb.exceptions import DomainError, NonStudentizableError
from fixedb.kernels import WeightKernel
from fixedb.lagwindow import gamma_n_sq
from fixedb.limitdist import FixedBQuantileTable

CLASSICAL = "classical"
FIXED_B = "fixedb"


@dataclass(frozen=True)
class ConfidenceInterval:
    center: float
    halfwidth: float
    method: str
    level: float
    c_n: int
    kernel_id: str
    critical_value: float

    @property
    def lower(self) -> float:
        return self.center - self.halfwidth

    @property
    def upper(self) -> float:
        return self.center + self.halfwidth

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def _check_level(level: float) -> float:
    level = float(level)
    if not 0.0 < level < 1.0:
        raise DomainError("confidence level must lie in (0, 1)")
    return level


def ci_classical(x, c_n: int, kernel: WeightKernel, level: float = 0.95,
                 ) -> ConfidenceInterval:
    """Gaussian-limit interval mean(x) +/- z * sqrt(Gamma^2 / n)."""
    level = _check_level(level)
    x = np.asarray(x, dtype=float).ravel()
    n = len(x)
    if c_n >= n:
        raise DomainError("classical interval needs c_n < n")
    if c_n > n**0.9:
        warnings.warn("c_n > n^0.9: the Gaussian limit may be unreliable "
                      "this close to the fixed-b regime", stacklevel=2)
    est = gamma_n_sq(x, c_n, kernel)
    if not est.positive:
        raise NonStudentizableError(
            f"Gamma^2 = {est.gamma_sq:.3e} is not positive")
    z = float(ndtri(0.5 + level / 2.0))
    halfwidth = z * np.sqrt(est.gamma_sq / n)
    return ConfidenceInterval(center=float(x.mean()), halfwidth=float(halfwidth),
                              method=CLASSICAL, level=level, c_n=est.c_n,
                              kernel_id=kernel.id, critical_value=z)


def ci_fixedb(x, kernel: WeightKernel, level: float,
              table: FixedBQuantileTable) -> ConfidenceInterval:
    """Fixed-b interval mean(x) +/- t * sqrt(Gamma^2 / n) with c_n = n.

    The critical value always comes from a persisted table, never from an
    inline simulation, so coverage studies are deterministic.
    """
    level = _check_level(level)
    x = np.asarray(x, dtype=float).ravel()
    n = len(x)
    if table.kernel_id != kernel.id:
        raise DomainError(f"table is for kernel {table.kernel_id!r}, "
                          f"not {kernel.id!r}")
    tail = (1.0 - level) / 2.0
    row = table.lookup(tail)
    est = gamma_n_sq(x, n, kernel)
    if not est.positive:
        raise NonStudentizableError(
            f"Gamma^2 = {est.gamma_sq:.3e} is not positive")
    halfwidth = row.critical_value * np.sqrt(est.gamma_sq / n)
    return ConfidenceInterval(center=float(x.mean()), halfwidth=float(halfwidth),
                              method=FIXED_B, level=level, c_n=n,
                              kernel_id=kernel.id,
                              critical_value=row.critical_value)
