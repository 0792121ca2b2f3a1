"""Penalized criterion solver: block linear system and closed-form fitted values.

Minimizing  (Y - Za - E delta)' Omega (Y - Za - E delta) + lam * delta' E delta
over the natural-spline constraint Z' delta = 0 reduces to one linear solve:

    [[E + lam Omega^-1, Z], [Z', 0]] (delta; a) = (Y; 0),

where Z is the n x 2 linear design and E the cubic design.  Fitted values
also have a closed hat-matrix form through the oblique projection
P = Z (Z' Et^-1 Z)^-1 Z' Et^-1 with Et = E + lam Omega^-1; the two routes are
kept as independent code paths so they can cross-check each other.

Note Et is symmetric but in general indefinite: the cubic design is positive
semidefinite only on the constraint subspace (order-2 conditional positive
definiteness of |d|^3), so Et is factored by LU rather than Cholesky.  The
saddle-point system itself is nonsingular whenever the linear design has
rank 2 and the weight matrix is positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .datamodel import Dataset
from .errors import CollinearityError, ConditioningError
from .kernel import KernelSpec, WeightMatrix, build_weight_matrix, moment_criterion
from .spline import DesignMatrices, SplineFit, build_design, roughness

_REFINEMENT_STEPS = 2  # fixed-count iterative refinement keeps extreme-lambda solves accurate


@dataclass(frozen=True)
class BlockSystem:
    """Assembled penalized system: Et = E + lam Omega^-1, the bordered matrix, and (Y; 0)."""

    penalized_cubic: np.ndarray
    kkt: np.ndarray
    rhs: np.ndarray


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not (np.isfinite(lam) and lam > 0.0):
        raise ValueError(f"regularization parameter must be positive, got {lam}")
    return lam


def _check_rank(z: np.ndarray) -> None:
    if np.unique(z).size < 2:
        raise CollinearityError(
            "linear design is rank deficient: needs at least two distinct z values"
        )


def _assemble(design: DesignMatrices, omega: WeightMatrix, y: np.ndarray, lam: float) -> BlockSystem:
    n = y.shape[0]
    penalized = design.cubic + lam * omega.inverse()
    penalized = 0.5 * (penalized + penalized.T)
    kkt = np.zeros((n + 2, n + 2))
    kkt[:n, :n] = penalized
    kkt[:n, n:] = design.linear
    kkt[n:, :n] = design.linear.T
    rhs = np.zeros(n + 2)
    rhs[:n] = y
    return BlockSystem(penalized_cubic=penalized, kkt=kkt, rhs=rhs)


def build_block_system(ds: Dataset, lam: float, spec: KernelSpec = KernelSpec()) -> BlockSystem:
    lam = _check_lambda(lam)
    _check_rank(ds.z)
    design = build_design(ds.z)
    omega = build_weight_matrix(ds.w, spec)
    return _assemble(design, omega, ds.y, lam)


def _condition_estimate(lu: np.ndarray, anorm: float) -> float:
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or rcond <= 0.0:
        return float("inf")
    return 1.0 / float(rcond)


def _solve_kkt(system: BlockSystem, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    """LU solve with fixed-count refinement; returns (solution, condition estimate)."""
    lu, piv = scipy.linalg.lu_factor(system.kkt)
    cond = _condition_estimate(lu, np.linalg.norm(system.kkt, 1))
    sol = scipy.linalg.lu_solve((lu, piv), rhs)
    for _ in range(_REFINEMENT_STEPS):
        residual = rhs - system.kkt @ sol
        sol = sol + scipy.linalg.lu_solve((lu, piv), residual)
    if not np.all(np.isfinite(sol)):
        raise ConditioningError(
            f"block solve produced non-finite values (condition estimate {cond:.3e})",
            condition_estimate=cond,
        )
    return sol, cond


def fit(ds: Dataset, lam: float, spec: KernelSpec = KernelSpec()) -> SplineFit:
    """Solve the penalized program and return the fitted natural cubic spline.

    Diagnostics carry the criterion value at the solution, the roughness
    delta' E delta, the natural-spline constraint residual, the weight-matrix
    jitter, and a 1-norm condition estimate of the bordered system.
    """
    lam = _check_lambda(lam)
    _check_rank(ds.z)
    design = build_design(ds.z)
    omega = build_weight_matrix(ds.w, spec)
    system = _assemble(design, omega, ds.y, lam)
    sol, cond = _solve_kkt(system, system.rhs)
    delta, a = sol[: ds.n], sol[ds.n :]
    residuals = ds.y - design.linear @ a - design.cubic @ delta
    rough = roughness(delta, design.cubic)
    crit = moment_criterion(residuals, omega)
    return SplineFit(
        a=a,
        delta=delta,
        knots=ds.z,
        lam=lam,
        diagnostics={
            "criterion": crit,
            "roughness": rough,
            "objective": crit + lam * rough,
            "constraint_residual": float(np.abs(design.linear.T @ delta).max()),
            "jitter_applied": omega.jitter_applied,
            "kkt_condition_estimate": cond,
        },
    )


def fitted_values(ds: Dataset, lam: float, spec: KernelSpec = KernelSpec()) -> np.ndarray:
    """Fitted values by the closed hat-matrix form [P + E Et^-1 (I - P)] Y.

    Independent of :func:`fit`'s bordered solve; the two agree to solver
    precision and are cross-checked in the test suite.
    """
    lam = _check_lambda(lam)
    _check_rank(ds.z)
    design = build_design(ds.z)
    omega = build_weight_matrix(ds.w, spec)
    penalized = design.cubic + lam * omega.inverse()
    penalized = 0.5 * (penalized + penalized.T)
    try:
        lu = scipy.linalg.lu_factor(penalized)
        einv_z = scipy.linalg.lu_solve(lu, design.linear)
        einv_y = scipy.linalg.lu_solve(lu, ds.y)
        gram = design.linear.T @ einv_z
        proj_y = design.linear @ np.linalg.solve(gram, design.linear.T @ einv_y)
        ghat = proj_y + design.cubic @ scipy.linalg.lu_solve(lu, ds.y - proj_y)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise ConditioningError(f"closed-form solve failed: {exc}") from exc
    if not np.all(np.isfinite(ghat)):
        raise ConditioningError("closed-form solve produced non-finite fitted values")
    return ghat


def hat_diagnostics(ds: Dataset, lam: float, spec: KernelSpec = KernelSpec()) -> dict:
    """Numerical health check of the bordered system against its analytic inverse.

    The analytic inverse is assembled from the blocks

        [[Et^-1 (I-P),            Et^-1 Z (Z' Et^-1 Z)^-1],
         [(Z' Et^-1 Z)^-1 Z' Et^-1,   -(Z' Et^-1 Z)^-1   ]]

    and ``block_inverse_check`` reports the max-norm residual of that inverse
    times the bordered matrix minus the identity.
    """
    lam = _check_lambda(lam)
    _check_rank(ds.z)
    design = build_design(ds.z)
    omega = build_weight_matrix(ds.w, spec)
    system = _assemble(design, omega, ds.y, lam)
    n = ds.n

    lu, piv = scipy.linalg.lu_factor(system.kkt)
    cond = _condition_estimate(lu, np.linalg.norm(system.kkt, 1))

    lu_pen = scipy.linalg.lu_factor(system.penalized_cubic)
    einv = scipy.linalg.lu_solve(lu_pen, np.eye(n))
    einv = 0.5 * (einv + einv.T)
    einv_z = einv @ design.linear
    gram_inv = np.linalg.inv(design.linear.T @ einv_z)
    inverse = np.zeros((n + 2, n + 2))
    inverse[:n, :n] = einv - einv_z @ gram_inv @ einv_z.T
    inverse[:n, n:] = einv_z @ gram_inv
    inverse[n:, :n] = gram_inv @ einv_z.T
    inverse[n:, n:] = -gram_inv
    check = float(np.abs(inverse @ system.kkt - np.eye(n + 2)).max())
    return {
        "kkt_condition_estimate": cond,
        "block_inverse_check": check,
        "jitter_applied": omega.jitter_applied,
    }


def kkt_solve_columns(ds: Dataset, lam: float, spec: KernelSpec = KernelSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Restriction of the bordered system's inverse to the outcome block.

    Returns (delta_block, a_block): delta_block[:, j] and a_block[:, j] are the
    coefficients of the fit to the j-th unit outcome vector.  Used to build
    linear-smoother representations such as the derivative smoother.
    """
    lam = _check_lambda(lam)
    _check_rank(ds.z)
    design = build_design(ds.z)
    omega = build_weight_matrix(ds.w, spec)
    system = _assemble(design, omega, np.zeros(ds.n), lam)
    rhs = np.zeros((ds.n + 2, ds.n))
    rhs[: ds.n] = np.eye(ds.n)
    lu, piv = scipy.linalg.lu_factor(system.kkt)
    cond = _condition_estimate(lu, np.linalg.norm(system.kkt, 1))
    sol = scipy.linalg.lu_solve((lu, piv), rhs)
    for _ in range(_REFINEMENT_STEPS):
        residual = rhs - system.kkt @ sol
        sol = sol + scipy.linalg.lu_solve((lu, piv), residual)
    if not np.all(np.isfinite(sol)):
        raise ConditioningError(
            f"multi-column block solve produced non-finite values (condition estimate {cond:.3e})",
            condition_estimate=cond,
        )
    return sol[: ds.n], sol[ds.n :]


class PathSolver:
    """Exact coefficients along a lambda path for fixed data.

    The change of variables delta = L u with Omega = L L' turns the penalized
    block into (S + lam I) u + Zt a = yt, S = L' E L symmetric, so one
    eigendecomposition of S gives every lambda in O(n) work.  Algebraically
    identical to :func:`fit`; used where many lambda values are solved on the
    same data (cross-validation grids).
    """

    def __init__(self, ds: Dataset, spec: KernelSpec = KernelSpec()):
        _check_rank(ds.z)
        design = build_design(ds.z)
        omega = build_weight_matrix(ds.w, spec)
        chol = omega.chol
        s_mat = chol.T @ design.cubic @ chol
        s_mat = 0.5 * (s_mat + s_mat.T)
        evals, vecs = scipy.linalg.eigh(s_mat)
        self._evals = evals
        self._zt = vecs.T @ (chol.T @ design.linear)
        self._yt = vecs.T @ (chol.T @ ds.y)
        self._map = chol @ vecs  # v -> delta
        self._scale = max(1.0, float(np.abs(evals).max()))
        self.knots = ds.z
        self.jitter_applied = omega.jitter_applied

    def coefficients(self, lam: float) -> tuple[np.ndarray, np.ndarray] | None:
        """(delta, a) at this lambda, or None when the shifted spectrum is numerically singular."""
        lam = _check_lambda(lam)
        shifted = self._evals + lam
        if np.abs(shifted).min() <= 1e-10 * self._scale:
            return None
        inv = 1.0 / shifted
        gram = self._zt.T @ (inv[:, None] * self._zt)
        try:
            a = np.linalg.solve(gram, self._zt.T @ (inv * self._yt))
        except np.linalg.LinAlgError:
            return None
        v = inv * (self._yt - self._zt @ a)
        delta = self._map @ v
        if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(a))):
            return None
        return delta, a
