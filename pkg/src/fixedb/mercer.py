"""Nystrom eigendecomposition of the centered kernel on [0, 1]^2.

The fixed-b limit law is driven by the positive eigenvalues of the
integral operator with kernel ``rho_star``. We approximate them with the
standard Nystrom estimator: discretize on the uniform grid {i/m} with 1/m
weights, take the symmetric eigendecomposition of (1/m) rho_star(i/m, j/m),
and keep the leading eigenvalues up to a requested trace fraction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from fixedb.exceptions import DomainError, KernelNotPositiveDefiniteError
from fixedb.kernels import WeightKernel, by_name

DEFAULT_M = 1000
DEFAULT_TRACE_FRACTION = 0.999
EIGENVALUE_FLOOR = 1e-10
PSD_TOLERANCE = -1e-8


@dataclass(frozen=True)
class MercerDecomposition:
    """Retained spectrum of the discretized centered kernel.

    ``eigenfunctions[i]`` is the i-th eigenfunction sampled on the grid
    {k/m}, scaled to be orthonormal under the (1/m)-weighted inner
    product.
    """

    kernel_id: str
    m: int
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray = field(repr=False)
    kept_trace_fraction: float
    trace_estimate: float

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues",
                           np.asarray(self.eigenvalues, dtype=float))

    @property
    def n_retained(self) -> int:
        return len(self.eigenvalues)

    def to_json(self) -> str:
        doc = {
            "kernel_id": self.kernel_id,
            "m": self.m,
            "eigenvalues": self.eigenvalues.tolist(),
            "kept_trace_fraction": self.kept_trace_fraction,
            "trace_estimate": self.trace_estimate,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MercerDecomposition":
        doc = json.loads(text)
        return cls(
            kernel_id=doc["kernel_id"],
            m=int(doc["m"]),
            eigenvalues=np.asarray(doc["eigenvalues"], dtype=float),
            eigenfunctions=np.empty((0, int(doc["m"]))),
            kept_trace_fraction=float(doc["kept_trace_fraction"]),
            trace_estimate=float(doc["trace_estimate"]),
        )


@dataclass(frozen=True)
class PositiveDefinitenessReport:
    kernel_id: str
    m: int
    min_eigenvalue: float
    passed: bool


def nystrom_nodes(m: int) -> np.ndarray:
    """Midpoint grid {(i - 1/2)/m}: its 1/m-weighted row sums of the
    centered kernel vanish at O(1/m^2), so the constant function stays in
    the numerical null space."""
    return (np.arange(m) + 0.5) / m


def _grid_matrix(kernel: WeightKernel, m: int) -> np.ndarray:
    return kernel.rho_star_grid(nystrom_nodes(m)) / m


def nystrom_decompose(kernel: WeightKernel, m: int = DEFAULT_M,
                      trace_fraction: float = DEFAULT_TRACE_FRACTION,
                      ) -> MercerDecomposition:
    """Eigendecompose the kernel on an m-point uniform grid.

    Raises :class:`KernelNotPositiveDefiniteError` if the discretized
    matrix has an eigenvalue below the PSD tolerance (-1e-8), since the
    fixed-b limit law only exists for positive definite centered kernels.
    """
    if m < 50:
        raise DomainError("m must be at least 50")
    if not (0.9 < trace_fraction <= 1.0):
        raise DomainError("trace_fraction must lie in (0.9, 1]")

    mat = _grid_matrix(kernel, m)
    vals, vecs = np.linalg.eigh(mat)
    if vals[0] < PSD_TOLERANCE:
        raise KernelNotPositiveDefiniteError(
            f"kernel {kernel.id!r}: min Nystrom eigenvalue {vals[0]:.3e} "
            f"below tolerance {PSD_TOLERANCE:g}")

    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]

    positive = vals > EIGENVALUE_FLOOR
    vals = vals[positive]
    vecs = vecs[:, positive]

    trace = float(np.trace(mat))
    csum = np.cumsum(vals)
    target = trace_fraction * trace
    keep = int(np.searchsorted(csum, target) + 1)
    keep = min(keep, len(vals))
    vals = vals[:keep]
    vecs = vecs[:, :keep]

    # Orthonormal under (1/m) sum phi_i phi_j, with a deterministic sign.
    funcs = (vecs * np.sqrt(m)).T
    for row in funcs:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0

    kept = min(1.0, float(np.sum(vals)) / trace) if trace > 0 else 0.0
    return MercerDecomposition(
        kernel_id=kernel.id,
        m=m,
        eigenvalues=vals,
        eigenfunctions=funcs,
        kept_trace_fraction=kept,
        trace_estimate=trace,
    )


def positive_definiteness_report(kernel: WeightKernel, m: int = 500,
                                 ) -> PositiveDefinitenessReport:
    """Diagnostic: minimum Nystrom eigenvalue and a pass/fail PSD flag."""
    if m < 50:
        raise DomainError("m must be at least 50")
    vals = np.linalg.eigvalsh(_grid_matrix(kernel, m))
    vmin = float(vals[0])
    return PositiveDefinitenessReport(
        kernel_id=kernel.id, m=m, min_eigenvalue=vmin,
        passed=vmin >= PSD_TOLERANCE)


def load_decomposition(path) -> MercerDecomposition:
    with open(path, "r", encoding="utf-8") as fh:
        return MercerDecomposition.from_json(fh.read())


def decompose_by_name(kernel_id: str, m: int = DEFAULT_M,
                      trace_fraction: float = DEFAULT_TRACE_FRACTION,
                      ) -> MercerDecomposition:
    return nystrom_decompose(by_name(kernel_id), m, trace_fraction)
