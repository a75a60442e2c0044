"""Simulation of the fixed-b limiting random variables.

Two independent routes produce the limit of the studentized mean when the
bandwidth equals the sample size:

* the *eigen* route draws ``T = Z0 / sqrt(sum_i alpha_i Z_i^2)`` from the
  retained Nystrom eigenvalues (O(#eigenvalues) per draw, used for
  production quantile tables), and
* the *ito* route discretizes the iterated stochastic integral
  ``chi2 = 1 - int g + 2 int_0^1 [int_0^t rho_star(s,t) dB(s)] dB(t)``
  on a uniform grid with left-point increments (O(m^2) per draw, used as
  a cross-check).

Both routes are driven by chunked RNG streams derived from (seed, route,
chunk index), so tables are bit-reproducible for any worker count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import ks_2samp

from fixedb.exceptions import DomainError, MissingTableRowError
from fixedb.kernels import WeightKernel
from fixedb.mercer import (
    DEFAULT_M,
    DEFAULT_TRACE_FRACTION,
    MercerDecomposition,
    nystrom_decompose,
)
from fixedb.seeding import derive_seed

_CHUNK = 4096
_Z975 = 1.959963984540054

_decomp_cache: dict[tuple, MercerDecomposition] = {}


def cached_decomposition(kernel: WeightKernel, m: int = DEFAULT_M,
                         trace_fraction: float = DEFAULT_TRACE_FRACTION,
                         ) -> MercerDecomposition:
    """Nystrom decomposition memoized for the built-in kernels."""
    key = (kernel.id, m, trace_fraction)
    if kernel.id in ("bartlett", "quadratic"):
        if key not in _decomp_cache:
            _decomp_cache[key] = nystrom_decompose(kernel, m, trace_fraction)
        return _decomp_cache[key]
    return nystrom_decompose(kernel, m, trace_fraction)


# ---------------------------------------------------------------------------
# draws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChiSquareDraw:
    """One draw of the limiting chi-square, with the terminal Brownian
    value when produced by the ito route."""
    chi2: float
    b1: float


def _ito_precompute(kernel: WeightKernel, m: int):
    nodes = np.arange(1, m + 1) / m
    grid = kernel.rho_star_grid(nodes)
    lower = np.tril(grid, k=-1)
    return lower, 1.0 - kernel.integral_g()


def _chi2_ito_block(lower: np.ndarray, const: float, xi: np.ndarray):
    # xi: (k, m) standard normals; dB = xi / sqrt(m).
    m = xi.shape[1]
    inner = xi @ lower.T
    chi2 = const + (2.0 / m) * np.einsum("ij,ij->i", xi, inner)
    b1 = xi.sum(axis=1) / np.sqrt(m)
    return chi2, b1


def draw_chi2_ito(kernel: WeightKernel, m: int, rng: np.random.Generator,
                  ) -> ChiSquareDraw:
    """Single draw of (chi2, B(1)) from the discretized iterated integral."""
    if m < 64:
        raise DomainError("ito discretization needs m >= 64")
    lower, const = _ito_precompute(kernel, m)
    chi2, b1 = _chi2_ito_block(lower, const, rng.standard_normal((1, m)))
    return ChiSquareDraw(chi2=float(chi2[0]), b1=float(b1[0]))


def chi2_ito_sample(kernel: WeightKernel, m: int, n_draws: int, seed: int,
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ito-route sample: arrays (chi2, b1), chunk-seeded."""
    if m < 64:
        raise DomainError("ito discretization needs m >= 64")
    lower, const = _ito_precompute(kernel, m)
    chi2 = np.empty(n_draws)
    b1 = np.empty(n_draws)
    for c, start in enumerate(range(0, n_draws, _CHUNK)):
        k = min(_CHUNK, n_draws - start)
        rng = np.random.default_rng(derive_seed(seed, "ito", c))
        xi = rng.standard_normal((k, m))
        chi2[start:start + k], b1[start:start + k] = \
            _chi2_ito_block(lower, const, xi)
    return chi2, b1


def draw_T_eigen(decomp: MercerDecomposition, rng: np.random.Generator,
                 ) -> float:
    """Single draw of ``Z0 / sqrt(sum alpha_i Z_i^2)``."""
    if decomp.n_retained < 1:
        raise DomainError("decomposition has no retained eigenvalues")
    z0 = rng.standard_normal()
    z = rng.standard_normal(decomp.n_retained)
    return float(z0 / np.sqrt(np.dot(decomp.eigenvalues, z**2)))


def t_eigen_sample(decomp: MercerDecomposition, n_draws: int, seed: int,
                   ) -> np.ndarray:
    """Vectorized eigen-route sample of T, chunk-seeded."""
    if decomp.n_retained < 1:
        raise DomainError("decomposition has no retained eigenvalues")
    alpha = decomp.eigenvalues
    out = np.empty(n_draws)
    for c, start in enumerate(range(0, n_draws, _CHUNK)):
        k = min(_CHUNK, n_draws - start)
        rng = np.random.default_rng(derive_seed(seed, "eigen", c))
        z = rng.standard_normal((k, len(alpha) + 1))
        denom = np.sqrt((z[:, 1:] ** 2) @ alpha)
        out[start:start + k] = z[:, 0] / denom
    return out


def chi2_eigen_sample(decomp: MercerDecomposition, n_draws: int, seed: int,
                      ) -> np.ndarray:
    """Vectorized sample of ``chi2 = sum alpha_i Z_i^2`` (eigen route)."""
    alpha = decomp.eigenvalues
    out = np.empty(n_draws)
    for c, start in enumerate(range(0, n_draws, _CHUNK)):
        k = min(_CHUNK, n_draws - start)
        rng = np.random.default_rng(derive_seed(seed, "chi2eigen", c))
        z = rng.standard_normal((k, len(alpha)))
        out[start:start + k] = (z**2) @ alpha
    return out


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantileRow:
    level: float            # tail probability P(T > t)
    critical_value: float
    mc_se: float


@dataclass(frozen=True)
class FixedBQuantileTable:
    kernel_id: str
    method: str             # "eigen" or "ito"
    n_draws: int
    m: int
    seed: int
    rows: tuple = field(default_factory=tuple)

    def lookup(self, tail: float, tol: float = 1e-9) -> QuantileRow:
        for row in self.rows:
            if abs(row.level - tail) <= tol:
                return row
        raise MissingTableRowError(
            f"no row for tail probability {tail!r} in {self.kernel_id} table")

    def to_csv(self) -> str:
        lines = ["level,critical_value,mc_se"]
        for row in self.rows:
            lines.append(f"{row.level!r},{row.critical_value!r},{row.mc_se!r}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({
            "kernel_id": self.kernel_id,
            "method": self.method,
            "n_draws": self.n_draws,
            "m": self.m,
            "seed": self.seed,
            "rows": [[r.level, r.critical_value, r.mc_se] for r in self.rows],
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "FixedBQuantileTable":
        doc = json.loads(text)
        rows = tuple(QuantileRow(*map(float, r)) for r in doc["rows"])
        return cls(kernel_id=doc["kernel_id"], method=doc["method"],
                   n_draws=int(doc["n_draws"]), m=int(doc["m"]),
                   seed=int(doc["seed"]), rows=rows)


def _order_statistic_se(sorted_sample: np.ndarray, q: float) -> float:
    # Distribution-free 95% order-statistic bracket around the q-quantile;
    # reported as the half-width of that interval.
    n = len(sorted_sample)
    half = _Z975 * np.sqrt(n * q * (1.0 - q))
    lo = int(np.clip(np.floor(n * q - half), 0, n - 1))
    hi = int(np.clip(np.ceil(n * q + half), 0, n - 1))
    return float((sorted_sample[hi] - sorted_sample[lo]) / 2.0)


def quantile_table(kernel: WeightKernel, levels, n_draws: int, seed: int,
                   method: str = "eigen", m: int | None = None,
                   decomp: MercerDecomposition | None = None,
                   ) -> FixedBQuantileTable:
    """Critical values ``t`` with ``P(T > t) = level`` for each tail level.

    The default eigen route is cheap enough for n_draws = 10^6; the ito
    route exists as an independent cross-check. Quantiles use linear
    interpolation between order statistics, with distribution-free
    order-statistic 95% brackets as Monte Carlo standard errors.
    """
    levels = [float(v) for v in levels]
    if n_draws < 10**5:
        raise DomainError("quantile tables need n_draws >= 1e5")
    if not levels or any(not (0.0 < v < 0.5) for v in levels):
        raise DomainError("levels must be tail probabilities in (0, 0.5)")

    if method == "eigen":
        if decomp is None:
            m_eff = m if m is not None else DEFAULT_M
            decomp = cached_decomposition(kernel, m_eff)
        else:
            m_eff = decomp.m
        sample = t_eigen_sample(decomp, n_draws, seed)
    elif method == "ito":
        m_eff = m if m is not None else 512
        chi2, b1 = chi2_ito_sample(kernel, m_eff, n_draws, seed)
        ok = chi2 > 0
        sample = b1[ok] / np.sqrt(chi2[ok])
    else:
        raise DomainError(f"unknown method {method!r}")

    sample = np.sort(sample)
    rows = []
    for level in sorted(levels, reverse=True):
        q = 1.0 - level
        t = float(np.quantile(sample, q, method="linear"))
        rows.append(QuantileRow(level=level, critical_value=t,
                                mc_se=_order_statistic_se(sample, q)))
    return FixedBQuantileTable(kernel_id=kernel.id, method=method,
                               n_draws=n_draws, m=m_eff, seed=seed,
                               rows=tuple(rows))


@dataclass(frozen=True)
class CdfTable:
    kernel_id: str
    n_draws: int
    seed: int
    xs: np.ndarray
    cdf: np.ndarray

    def to_csv(self) -> str:
        lines = ["x,cdf"]
        for x, f in zip(self.xs, self.cdf):
            lines.append(f"{float(x)!r},{float(f)!r}")
        return "\n".join(lines) + "\n"


def cdf_table(kernel: WeightKernel, grid, n_draws: int, seed: int,
              decomp: MercerDecomposition | None = None) -> CdfTable:
    """Empirical CDF of T on a sorted grid (monotone by construction)."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) < 0):
        raise DomainError("grid must be a sorted 1-d array")
    if decomp is None:
        decomp = cached_decomposition(kernel)
    sample = np.sort(t_eigen_sample(decomp, n_draws, seed))
    cdf = np.searchsorted(sample, grid, side="right") / n_draws
    return CdfTable(kernel_id=kernel.id, n_draws=n_draws, seed=seed,
                    xs=grid, cdf=cdf)


# ---------------------------------------------------------------------------
# cross-validation of the two routes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CrossRouteReport:
    kernel_id: str
    m: int
    n_draws: int
    ks_distance: float
    threshold: float
    passed: bool
    n_nonpositive_chi2: int


def crossvalidate_routes(kernel: WeightKernel, m: int = 512,
                         n_draws: int = 10**4, seed: int = 0,
                         decomp: MercerDecomposition | None = None,
                         ) -> CrossRouteReport:
    """Two-sample KS comparison of the ito-route and eigen-route T samples.

    The pass threshold is the asymptotic 1% KS band for two samples of
    equal size, 1.63 * sqrt(2 / n_draws).
    """
    chi2, b1 = chi2_ito_sample(kernel, m, n_draws, derive_seed(seed, "xval-ito"))
    ok = chi2 > 0
    n_bad = int(np.sum(~ok))
    t_ito = b1[ok] / np.sqrt(chi2[ok])
    if decomp is None:
        decomp = cached_decomposition(kernel)
    t_eig = t_eigen_sample(decomp, n_draws, derive_seed(seed, "xval-eigen"))
    ks = float(ks_2samp(t_ito, t_eig).statistic)
    threshold = 1.63 * np.sqrt(2.0 / n_draws)
    return CrossRouteReport(kernel_id=kernel.id, m=m, n_draws=n_draws,
                            ks_distance=ks, threshold=threshold,
                            passed=ks <= threshold,
                            n_nonpositive_chi2=n_bad)
