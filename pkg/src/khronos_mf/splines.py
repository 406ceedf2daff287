"""Univariate B-spline mathematics.

Two families live here:

* the symmetric cardinal quadratic B-spline ``psi`` used as the compact
  activation inside each KHRONOS atom, supported on ``[-3/2, 3/2]``;
* clamped B-spline bases evaluated with the Cox-de Boor recursion, used by the
  airfoil geometry fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError

SUPPORT = 1.5


def eval_quadratic_kernel(d):
    """Cardinal quadratic B-spline.

    ``3/4 - d**2`` for ``|d| <= 1/2``, ``(3/2 - |d|)**2 / 2`` for
    ``1/2 < |d| < 3/2`` and exactly zero beyond. Accepts scalars or arrays.
    """
    a = np.abs(np.asarray(d, dtype=float))
    t = np.clip(SUPPORT - a, 0.0, None)
    out = np.where(a <= 0.5, 0.75 - a * a, 0.5 * t * t)
    return out[()] if out.ndim == 0 else out


def eval_quadratic_kernel_deriv(d):
    """Derivative of :func:`eval_quadratic_kernel` with respect to ``d``."""
    d = np.asarray(d, dtype=float)
    t = np.clip(SUPPORT - np.abs(d), 0.0, None)
    out = np.where(np.abs(d) <= 0.5, -2.0 * d, -np.sign(d) * t)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class ClampedBasis:
    """Clamped B-spline basis of a given degree on ``[0, 1]``."""

    degree: int
    knots: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        p = self.degree
        if p < 0:
            raise ConfigurationError("degree must be nonnegative")
        if knots.ndim != 1 or knots.size < 2 * (p + 1):
            raise ConfigurationError("knot vector too short for the degree")
        if np.any(np.diff(knots) < 0):
            raise ConfigurationError("knots must be nondecreasing")
        if np.any(knots[: p + 1] != knots[0]) or np.any(knots[-(p + 1):] != knots[-1]):
            raise ConfigurationError(f"ends must be repeated {p + 1} times")
        object.__setattr__(self, "knots", knots)

    @property
    def n(self) -> int:
        return self.knots.size - self.degree - 1

    @classmethod
    def uniform(cls, n: int, degree: int = 3) -> "ClampedBasis":
        """Clamped knot vector on [0, 1] with uniform interior knots."""
        if n < degree + 1:
            raise ConfigurationError(f"need at least {degree + 1} basis functions, got {n}")
        interior = np.linspace(0.0, 1.0, n - degree + 1)[1:-1]
        knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
        return cls(degree, knots)

    def find_span(self, zeta: float) -> int:
        U = self.knots
        if zeta >= U[self.n]:
            return self.n - 1
        return int(np.searchsorted(U, zeta, side="right")) - 1


def cox_de_boor_eval(basis: ClampedBasis, zeta):
    """Evaluate every basis function at ``zeta``.

    Returns a vector of length ``basis.n`` for a scalar ``zeta`` and an
    ``(len(zeta), n)`` matrix for an array. Only the ``degree + 1`` functions
    that are nonzero on the containing knot span are computed, using the
    triangular form of the Cox-de Boor recursion.
    """
    z = np.asarray(zeta, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(~np.isfinite(z)) or np.any(z < 0.0) or np.any(z > 1.0):
        raise DomainError("zeta must lie in [0, 1]")

    p, U = basis.degree, basis.knots
    out = np.zeros((z.size, basis.n))
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    for row, u in enumerate(z):
        span = basis.find_span(u)
        N = np.zeros(p + 1)
        N[0] = 1.0
        for j in range(1, p + 1):
            left[j] = u - U[span + 1 - j]
            right[j] = U[span + j] - u
            saved = 0.0
            for r in range(j):
                tmp = N[r] / (right[r + 1] + left[j - r])
                N[r] = saved + right[r + 1] * tmp
                saved = left[j - r] * tmp
            N[j] = saved
        out[row, span - p: span + 1] = N
    return out[0] if scalar else out
