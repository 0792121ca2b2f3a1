"""Cross-validated choice of the regularization parameter.

The data are split at random into folds (two by default).  For each
candidate lambda, a fit on the complement of each fold predicts that fold's
points; the stitched out-of-fold prediction vector is scored by the moment
criterion with the full-sample weight matrix, and the minimizing lambda
wins, ties going to the smallest candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datamodel import Dataset
from .errors import IvsplineError, SelectionError, SizeError
from .kernel import KernelSpec, build_weight_matrix
from .solver import PathSolver

GRID_SIZE = 400
GRID_P_LOW = 1e-5
GRID_P_HIGH = 0.7

# Criterion gaps below this relative threshold count as ties (noise-free data
# produce pure-roundoff criteria that must resolve to the smallest lambda).
TIE_RTOL = 1e-12


def default_grid() -> np.ndarray:
    """The 400-point candidate grid {p/(1-p) : p = 1e-5 + k (0.7 - 1e-5)/399}."""
    p = GRID_P_LOW + np.arange(GRID_SIZE) * (GRID_P_HIGH - GRID_P_LOW) / (GRID_SIZE - 1)
    return p / (1.0 - p)


@dataclass(frozen=True)
class CvConfig:
    """Fold count, candidate grid, and the seed of the random fold split."""

    folds: int = 2
    grid: np.ndarray = field(default_factory=default_grid)
    seed: int = 0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).reshape(-1)
        if grid.size == 0:
            raise ValueError("candidate grid must be nonempty")
        if not np.all(np.isfinite(grid) & (grid > 0)):
            raise ValueError("candidate grid must be strictly positive and finite")
        object.__setattr__(self, "grid", grid)
        if self.folds < 2:
            raise ValueError("need at least 2 folds")

    @property
    def canonical_two_fold(self) -> bool:
        """True for the plain 2-fold scheme; other fold counts are a flagged extension."""
        return self.folds == 2


@dataclass(frozen=True)
class CvResult:
    lambda_star: float
    curve: np.ndarray  # (grid length, 2) columns (lambda, criterion); invalid lambdas carry inf
    fold_assignment: np.ndarray
    criterion_weight_matrix: str = "full-sample"
    canonical_two_fold: bool = True


def _fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Seeded random partition; the first ceil(n/folds) permuted rows go to fold 0, and so on."""
    perm = np.random.default_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=int)
    sizes = [(n + folds - 1 - k) // folds for k in range(folds)]
    start = 0
    for fold_id, size in enumerate(sizes):
        assignment[perm[start : start + size]] = fold_id
        start += size
    return assignment


def cross_validate(ds: Dataset, spec: KernelSpec = KernelSpec(), cfg: CvConfig = CvConfig()) -> CvResult:
    """Score every grid lambda by 2-fold (or k-fold) cross-validation and return the winner.

    Each fold fit uses the fold's own weight matrix, but the out-of-fold
    prediction vector is scored against the full-sample weight matrix.  A
    fold-level solve failure marks that lambda invalid; if every lambda is
    invalid a :class:`SelectionError` is raised.
    """
    if ds.n < 3 * cfg.folds:
        raise SizeError(
            f"cross-validation with {cfg.folds} folds needs at least {3 * cfg.folds} rows, got {ds.n}"
        )
    assignment = _fold_assignment(ds.n, cfg.folds, cfg.seed)
    omega_full = build_weight_matrix(ds.w, spec)

    grid = cfg.grid
    tilde = np.zeros((grid.size, ds.n))
    valid = np.ones(grid.size, dtype=bool)
    for fold_id in range(cfg.folds):
        held_out = assignment == fold_id
        train = ~held_out
        sub = Dataset(y=ds.y[train], z=ds.z[train], w=ds.w[train])
        try:
            solver = PathSolver(sub, spec)
        except IvsplineError:
            raise SelectionError(
                f"fold {fold_id}: training subsample cannot be fitted"
            ) from None
        z_out = ds.z[held_out]
        basis = np.abs(z_out[:, None] - sub.z[None, :]) ** 3 / 12.0
        for j, lam in enumerate(grid):
            if not valid[j]:
                continue
            coeffs = solver.coefficients(lam)
            if coeffs is None:
                valid[j] = False
                continue
            delta, a = coeffs
            tilde[j, held_out] = a[0] + a[1] * z_out + basis @ delta

    if not valid.any():
        raise SelectionError("every candidate lambda failed on at least one fold")

    criteria = np.full(grid.size, np.inf)
    for j in np.flatnonzero(valid):
        r = ds.y - tilde[j]
        criteria[j] = float(r @ omega_full.values @ r)

    # Tie-break toward the smallest lambda, with ties measured against the
    # natural scale of the criterion (y' Omega y) so that pure-roundoff
    # criteria on noise-free data resolve deterministically.
    scale = float(ds.y @ omega_full.values @ ds.y)
    best = criteria.min()
    winner = int(np.flatnonzero(criteria <= best + TIE_RTOL * max(1.0, scale, best))[0])

    return CvResult(
        lambda_star=float(grid[winner]),
        curve=np.column_stack([grid, criteria]),
        fold_assignment=assignment,
        canonical_two_fold=cfg.canonical_two_fold,
    )
