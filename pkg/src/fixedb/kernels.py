"""Weight kernels for lag-window estimation and the centered fixed-b kernel.

A weight kernel is an even function ``w`` on [-1, 1] with ``w(0) = 1`` and
``w(1) = 0``, vanishing outside the support. From ``w`` we derive the
smoothed function ``g(t) = int_0^1 w(t-u) du`` and the centered kernel

    rho_star(s, t) = w(t - s) - g(t) - g(s) + int_0^1 g(u) du

on the unit square, whose positive eigenvalues determine the fixed-b
limiting distribution of the studentized mean.

The two standard kernels (triangular/Bartlett and parabolic/quadratic)
carry closed forms throughout; user-supplied kernels fall back to adaptive
quadrature.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.integrate import quad

from fixedb.exceptions import DomainError

BARTLETT = "bartlett"
QUADRATIC = "quadratic"
CUSTOM = "custom"

_QUAD_TOL = 1e-10
_VALIDATION_GRID = 1001


class WeightKernel:
    """An admissible even weight function and its derived quantities.

    Instances are immutable after construction and safe to share between
    any number of concurrent workers.
    """

    def __init__(self, kernel_id: str, fn: Callable, has_closed_rho_star: bool,
                 integral_g_value: float | None = None):
        self._id = kernel_id
        self._fn = fn
        self._has_closed = bool(has_closed_rho_star)
        self._integral_g = integral_g_value

    @property
    def id(self) -> str:
        return self._id

    @property
    def has_closed_rho_star(self) -> bool:
        return self._has_closed

    def __repr__(self) -> str:
        return f"WeightKernel({self._id!r})"

    # -- w ------------------------------------------------------------

    def w(self, u):
        """Evaluate the weight function; exactly 0 outside (-1, 1)."""
        arr = np.atleast_1d(np.asarray(u, dtype=float))
        inside = np.abs(arr) < 1.0
        out = np.zeros_like(arr)
        if inside.any():
            out[inside] = self._fn(arr[inside])
        if np.ndim(u) == 0:
            return float(out[0])
        return out

    # -- g ------------------------------------------------------------

    def g(self, t):
        """The smoothed function ``g(t) = int_0^1 w(t-u) du`` on [0, 1]."""
        t = np.asarray(t, dtype=float)
        if np.any((t < 0.0) | (t > 1.0)):
            raise DomainError("g(t) requires t in [0, 1]")
        if self._id == BARTLETT:
            out = 1.0 - (t**2 + (1.0 - t) ** 2) / 2.0
        elif self._id == QUADRATIC:
            out = 1.0 - (t**3 + (1.0 - t) ** 3) / 3.0
        else:
            out = self._g_quad(t)
        if out.ndim == 0:
            return float(out)
        return out

    def _g_quad(self, t: np.ndarray) -> np.ndarray:
        flat = np.atleast_1d(t).ravel()
        vals = np.empty_like(flat)
        for i, ti in enumerate(flat):
            # w may be kinked at ti (e.g. |t-u| kernels): split there.
            pts = [ti] if 0.0 < ti < 1.0 else None
            vals[i], _ = quad(lambda u: self.w(ti - u), 0.0, 1.0,
                              epsabs=_QUAD_TOL, limit=200, points=pts)
        return vals.reshape(np.shape(t))

    def integral_g(self) -> float:
        """``int_0^1 g(t) dt``; a value in [0, 1] for admissible kernels."""
        if self._integral_g is None:
            val, _ = quad(lambda t: self.g(t), 0.0, 1.0,
                          epsabs=_QUAD_TOL, limit=200)
            self._integral_g = val
        return self._integral_g

    # -- rho_star -------------------------------------------------------

    def rho_star(self, s, t):
        """The centered kernel on the unit square (closed form if known)."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any((s < 0.0) | (s > 1.0)) or np.any((t < 0.0) | (t > 1.0)):
            raise DomainError("rho_star requires (s, t) in the unit square")
        if self._id == BARTLETT:
            out = 2.0 / 3.0 - s * (1.0 - s) - t * (1.0 - t) - np.abs(s - t)
        elif self._id == QUADRATIC:
            out = 2.0 * (s - 0.5) * (t - 0.5)
        else:
            out = self._rho_star_generic(s, t)
        if np.ndim(out) == 0:
            return float(out)
        return out

    def rho_star_generic(self, s, t):
        """Always evaluate ``w(t-s) - g(t) - g(s) + int g``, ignoring any
        closed form. Used to cross-check the closed forms."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any((s < 0.0) | (s > 1.0)) or np.any((t < 0.0) | (t > 1.0)):
            raise DomainError("rho_star requires (s, t) in the unit square")
        out = self._rho_star_generic(s, t)
        if np.ndim(out) == 0:
            return float(out)
        return out

    def _rho_star_generic(self, s, t):
        return self.w(t - s) - self.g(t) - self.g(s) + self.integral_g()

    def rho_star_grid(self, nodes: np.ndarray) -> np.ndarray:
        """Matrix ``rho_star(nodes[i], nodes[j])`` (vectorized outer grid)."""
        nodes = np.asarray(nodes, dtype=float)
        s = nodes[:, None]
        t = nodes[None, :]
        if self._id in (BARTLETT, QUADRATIC):
            return self.rho_star(s, t)
        g = self.g(nodes)
        return self.w(t - s) - g[None, :] - g[:, None] + self.integral_g()


def _bartlett_w(u):
    return 1.0 - np.abs(u)


def _quadratic_w(u):
    return 1.0 - u**2


def bartlett() -> WeightKernel:
    """The triangular kernel ``w(u) = 1 - |u|`` on (-1, 1)."""
    return WeightKernel(BARTLETT, _bartlett_w, True,
                        integral_g_value=2.0 / 3.0)


def quadratic() -> WeightKernel:
    """The parabolic kernel ``w(u) = 1 - u^2`` on (-1, 1)."""
    return WeightKernel(QUADRATIC, _quadratic_w, True,
                        integral_g_value=5.0 / 6.0)


def custom_kernel(fn: Callable, name: str = CUSTOM,
                  check_range: bool = True) -> WeightKernel:
    """Wrap a user-supplied weight function after validating admissibility.

    The function is checked on a 1001-point grid for evenness, ``w(0)=1``,
    ``w(1)=0`` and (unless ``check_range`` is off, e.g. for diagnostics on
    deliberately inadmissible kernels) for values in [0, 1]. Support outside
    (-1, 1) is enforced by construction, not trusted.
    """
    u = np.linspace(-1.0, 1.0, _VALIDATION_GRID)
    vals = np.asarray(fn(u), dtype=float)
    if vals.shape != u.shape:
        raise DomainError("kernel function must evaluate elementwise on arrays")
    if not np.all(np.isfinite(vals)):
        raise DomainError("kernel function must be finite on [-1, 1]")
    if np.max(np.abs(vals - vals[::-1])) > 1e-12:
        raise DomainError("kernel function must be even")
    if abs(float(fn(np.array([0.0]))[0]) - 1.0) > 1e-12:
        raise DomainError("kernel must satisfy w(0) = 1")
    if abs(vals[-1]) > 1e-8:
        raise DomainError("kernel must satisfy w(1) = 0")
    if check_range and (vals.min() < -1e-12 or vals.max() > 1.0 + 1e-12):
        raise DomainError("kernel values must lie in [0, 1]")
    return WeightKernel(name, fn, False)


_BUILTIN = {BARTLETT: bartlett, QUADRATIC: quadratic}


def by_name(name: str) -> WeightKernel:
    """Look up a built-in kernel by id (used by the CLI and tables)."""
    try:
        return _BUILTIN[name.lower()]()
    except KeyError:
        raise DomainError(f"unknown kernel {name!r}; expected one of "
                          f"{sorted(_BUILTIN)}") from None
