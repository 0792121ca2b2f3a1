"""Natural cubic splines in radial form, their design matrices, and the roughness functional.

A natural cubic spline with knots Z_1..Z_n is written

    g(z) = a0 + a1 z + (1/12) sum_i delta_i |z - Z_i|^3,
    sum_i delta_i = 0,   sum_i delta_i Z_i = 0.

The two constraints kill the quadratic growth of the sum, so g is linear
outside the knot range (naturality).  This form needs no sorting of the
knots and no rescaling of z, which keeps the bookkeeping between the design
matrices and the instrument weight matrix trivial.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SizeError


def _sign_plus(u: np.ndarray) -> np.ndarray:
    """sign(u) with the convention sign(0) = +1."""
    return np.where(u >= 0, 1.0, -1.0)


@dataclass(frozen=True)
class DesignMatrices:
    """Design blocks built once per z vector, rows in dataset order.

    linear       n x 2, columns (1, z_i)
    cubic        n x n, entries |z_i - z_j|^3 / 12          (value map and roughness form)
    cubic_deriv  n x n, entries sign(z_i - z_j) (z_i - z_j)^2 / 4   (derivative map)
    linear_deriv n x 2, rows (0, 1)
    """

    linear: np.ndarray
    cubic: np.ndarray
    cubic_deriv: np.ndarray
    linear_deriv: np.ndarray


def build_design(z: np.ndarray) -> DesignMatrices:
    z = np.asarray(z, dtype=float).reshape(-1)
    n = z.shape[0]
    if n < 3:
        raise SizeError(f"design matrices need at least 3 knots, got {n}")
    diff = z[:, None] - z[None, :]
    return DesignMatrices(
        linear=np.column_stack([np.ones(n), z]),
        cubic=np.abs(diff) ** 3 / 12.0,
        cubic_deriv=_sign_plus(diff) * diff**2 / 4.0,
        linear_deriv=np.column_stack([np.zeros(n), np.ones(n)]),
    )


@dataclass(frozen=True)
class SplineFit:
    """Coefficients of a fitted natural cubic spline plus solve diagnostics.

    ``a`` holds the intercept and slope, ``delta`` the radial coefficients
    (one per knot, satisfying the two natural-spline constraints), ``knots``
    the z values in dataset order.  ``diagnostics`` records the criterion
    value, the roughness, the constraint residual, and any weight-matrix
    jitter of the solve that produced the fit.
    """

    a: np.ndarray
    delta: np.ndarray
    knots: np.ndarray
    lam: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(2)
        delta = np.asarray(self.delta, dtype=float).reshape(-1)
        knots = np.asarray(self.knots, dtype=float).reshape(-1)
        if delta.shape != knots.shape:
            raise ValueError("delta and knots must have equal length")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "knots", knots)

    @property
    def n(self) -> int:
        return self.knots.shape[0]

    def constraint_residual(self) -> float:
        """max(|sum delta|, |sum delta * knots|), the natural-spline constraint violation."""
        return float(
            max(abs(self.delta.sum()), abs(np.dot(self.delta, self.knots)))
        )


def evaluate(fit: SplineFit, z) -> np.ndarray | float:
    """Spline value at z (scalar or array); linear extrapolation beyond the knots."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    diff = z_arr[:, None] - fit.knots[None, :]
    out = fit.a[0] + fit.a[1] * z_arr + (np.abs(diff) ** 3 @ fit.delta) / 12.0
    return float(out[0]) if np.isscalar(z) or np.asarray(z).ndim == 0 else out


def evaluate_derivative(fit: SplineFit, z) -> np.ndarray | float:
    """First derivative a1 + (1/4) sum_i delta_i sign(z - Z_i) (z - Z_i)^2.

    sign(0) = +1 by convention; the squared factor makes the choice
    numerically irrelevant but fixes bit-level reproducibility.
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    diff = z_arr[:, None] - fit.knots[None, :]
    out = fit.a[1] + ((_sign_plus(diff) * diff**2) @ fit.delta) / 4.0
    return float(out[0]) if np.isscalar(z) or np.asarray(z).ndim == 0 else out


def evaluate_second_derivative(fit: SplineFit, z) -> np.ndarray | float:
    """Second derivative (1/2) sum_i delta_i |z - Z_i|; zero outside the knot range."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    out = (np.abs(z_arr[:, None] - fit.knots[None, :]) @ fit.delta) / 2.0
    return float(out[0]) if np.isscalar(z) or np.asarray(z).ndim == 0 else out


def roughness(delta: np.ndarray, cubic: np.ndarray) -> float:
    """Quadratic form delta' E delta = integral of g''(z)^2 over the real line.

    The identity requires delta to satisfy the two natural-spline
    constraints; on that subspace the cubic design is positive semidefinite.
    """
    delta = np.asarray(delta, dtype=float).reshape(-1)
    if cubic.shape != (delta.shape[0], delta.shape[0]):
        raise ValueError(
            f"cubic design of order {cubic.shape} does not match delta length {delta.shape[0]}"
        )
    return float(delta @ cubic @ delta)
