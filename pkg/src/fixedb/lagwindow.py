"""Sample autocovariances, the lag-window variance estimator, effective
sample size and the studentized statistic.

The autocovariance at lag ``l`` uses divisor ``n`` (not ``n - l``):

    gamma_l = (1/n) sum_{j=1}^{n-l} (x_j - mean)(x_{j+l} - mean)

which is the biased form the limit theory analyzes. The estimator

    Gamma^2 = sum_{|k| < n} w(k / c_n) gamma_k

truncates at the kernel support, so only lags below ``c_n`` enter. A
zero-padded FFT computes the autocovariances when many lags are needed;
a direct dot-product path covers short runs, and the two agree to 1e-10
relative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft

from fixedb.exceptions import DomainError, NonStudentizableError
from fixedb.kernels import WeightKernel

_FFT_MIN_LAG = 64


@dataclass(frozen=True)
class LagWindowEstimate:
    """The variance estimate and the quantities it was built from."""

    gamma_sq: float
    gamma0: float
    n: int
    c_n: int
    kernel_id: str
    ess: float

    @property
    def positive(self) -> bool:
        return self.gamma_sq > 0.0

    @property
    def mc_error(self) -> float:
        """Monte Carlo error of the sample mean, sqrt(Gamma^2 / n)."""
        if not self.positive:
            return float("nan")
        return float(np.sqrt(self.gamma_sq / self.n))


def _validate_series(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if len(x) < 2:
        raise DomainError("need a series of length >= 2")
    if not np.all(np.isfinite(x)):
        raise DomainError("series contains non-finite values")
    return x


def autocovariances(x, max_lag: int) -> np.ndarray:
    """Sample autocovariances gamma_0..gamma_max_lag with divisor n."""
    x = _validate_series(x)
    n = len(x)
    if not 0 <= max_lag <= n - 1:
        raise DomainError(f"max_lag must lie in [0, {n - 1}]")
    xc = x - x.mean()
    if max_lag > _FFT_MIN_LAG:
        return _acov_fft(xc, max_lag)
    return _acov_direct(xc, max_lag)


def _acov_direct(xc: np.ndarray, max_lag: int) -> np.ndarray:
    n = len(xc)
    out = np.empty(max_lag + 1)
    out[0] = xc @ xc / n
    for lag in range(1, max_lag + 1):
        out[lag] = xc[:-lag] @ xc[lag:] / n
    return out


def _acov_fft(xc: np.ndarray, max_lag: int) -> np.ndarray:
    n = len(xc)
    size = next_fast_len(2 * n)
    f = rfft(xc, size)
    acf = irfft(f * np.conj(f), size)[: max_lag + 1]
    return acf / n


def gamma_n_sq(x, c_n: int, kernel: WeightKernel) -> LagWindowEstimate:
    """Lag-window estimate of the asymptotic variance with cutoff c_n.

    A non-positive estimate is a legitimate return value (the estimator is
    not guaranteed positive); it is reported with ess = nan rather than
    clamped, and confidence-interval construction refuses it.
    """
    x = _validate_series(x)
    n = len(x)
    c_n = int(c_n)
    if not 1 <= c_n <= n:
        raise DomainError(f"c_n must lie in [1, {n}]")
    max_lag = min(c_n, n) - 1
    acov = autocovariances(x, max_lag)
    if max_lag >= 1:
        lags = np.arange(1, max_lag + 1)
        weights = kernel.w(lags / c_n)
        gamma_sq = float(acov[0] + 2.0 * (weights @ acov[1:]))
    else:
        gamma_sq = float(acov[0])
    gamma0 = float(acov[0])
    ess = n * gamma0 / gamma_sq if gamma_sq > 0 else float("nan")
    return LagWindowEstimate(gamma_sq=gamma_sq, gamma0=gamma0, n=n, c_n=c_n,
                             kernel_id=kernel.id, ess=ess)


def t_stat(x, pi_h: float, c_n: int, kernel: WeightKernel) -> float:
    """Studentized statistic sqrt(n) (mean(x) - pi_h) / sqrt(Gamma^2)."""
    x = _validate_series(x)
    est = gamma_n_sq(x, c_n, kernel)
    if not est.positive:
        raise NonStudentizableError(
            f"Gamma^2 = {est.gamma_sq:.3e} is not positive")
    return float(np.sqrt(est.n) * (x.mean() - pi_h) / np.sqrt(est.gamma_sq))


def cn_from_rule(n: int, rule: str) -> int:
    """Resolve a bandwidth rule to an integer cutoff.

    Accepted forms: an integer literal, ``npow:DELTA`` for
    ``max(1, round(n**DELTA))``, or ``n`` for the fixed-b choice c_n = n.
    """
    rule = str(rule).strip()
    if rule == "n":
        return n
    if rule.startswith("npow:"):
        delta = float(rule.split(":", 1)[1])
        if not 0.0 < delta <= 1.0:
            raise DomainError("npow exponent must lie in (0, 1]")
        return max(1, min(n, round(n**delta)))
    try:
        value = int(rule)
    except ValueError:
        raise DomainError(f"bad c_n rule {rule!r}") from None
    return value
