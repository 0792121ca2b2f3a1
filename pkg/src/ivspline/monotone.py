"""Monotonicity by weight tilting: reweight observations, then refit.

The fitted spline is linear in the outcome vector, so its knot derivatives
are too: a matrix L maps Y to (g'(Z_1), ..., g'(Z_n)).  Monotonicity at the
knots is imposed by tilting the empirical distribution -- replacing the
uniform observation weights 1/n by a simplex vector p chosen as close to
uniform as possible, measured by the root divergence n - sum sqrt(n p_i),
subject to the reweighted fit having correctly signed knot derivatives:

    min  n - sum_i sqrt(n p_i)
    s.t. sum p_i = 1,  p_i >= 0,  s * L (p o Y) >= 0 componentwise,

with s = +1 for increasing and -1 for decreasing.  The program is smooth and
strictly convex on the simplex, solved here by a primal log-barrier Newton
method.  The refit replaces each Y_i by its tilted relative weight n p_i
times Y_i, so uniform weights reproduce the unconstrained fit exactly.

The solver works in relative weights q = n p (simplex scaled to sum q = n),
which keeps gradients O(1).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .datamodel import Dataset
from .errors import InfeasibleConstraintsError, SolverStallError
from .kernel import KernelSpec
from .solver import fit, kkt_solve_columns
from .spline import SplineFit, build_design

MU_INITIAL = 1.0
MU_SHRINK = 0.2
MU_FLOOR = 1e-10
DECREMENT_TOL = 1e-10
OUTER_CAP = 200
INNER_CAP = 50
ACTIVE_SLACK_RTOL = 1e-6


class MonotoneDirection(enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"

    @property
    def sign(self) -> float:
        return 1.0 if self is MonotoneDirection.INCREASING else -1.0

    @classmethod
    def from_string(cls, text: str) -> "MonotoneDirection":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(
                f"direction must be 'increasing' or 'decreasing', got {text!r}"
            ) from None


@dataclass(frozen=True)
class TiltWeights:
    """Optimal simplex weights of the tilting program plus optimality certificates.

    ``objective`` is n - sum sqrt(n p_i), zero exactly at uniform weights.
    ``kkt_residual`` is the max of the stationarity residual (with fitted
    nonnegative multipliers), the complementarity products, and the simplex
    equality violation, all measured on the sum-q = n normalization.
    ``active_constraints`` lists knot indices whose derivative constraint has
    (relatively) vanishing slack at the optimum.
    """

    p: np.ndarray
    objective: float
    kkt_residual: float
    active_constraints: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def derivative_smoother_matrix(ds: Dataset, lam: float, spec: KernelSpec = KernelSpec()) -> np.ndarray:
    """n x n matrix L with L @ Y = fitted first derivative at every knot.

    Built by pushing the n unit outcome vectors through the block solve and
    applying the derivative designs to the resulting coefficients.
    """
    delta_block, a_block = kkt_solve_columns(ds, lam, spec)
    design = build_design(ds.z)
    return design.cubic_deriv @ delta_block + design.linear_deriv @ a_block


def _phi(fval, mu, slacks):
    return fval - mu * float(np.sum(np.log(slacks)))


def _newton_stage(x, mu, fval, fgrad, fhess, rows, eq, eq_rhs, tol, cap):
    """Damped Newton on f(x) - mu sum log(rows @ x) over the hyperplane eq'x = eq_rhs.

    ``x`` must be strictly feasible (rows @ x > 0).  Returns the new iterate,
    whether the stage converged, and the step count.  Convergence means the
    Newton decrement fell below ``tol``, or the decrement stagnated inside
    the quadratic region at the float-representable optimum (with nearly
    active constraints the Hessian stiffness grows like 1/mu and a fixed
    decrement target becomes unrepresentable).
    """
    m = x.size
    converged = False
    steps = 0
    prev_dec = np.inf
    stagnant = 0
    for _ in range(cap):
        s = rows @ x
        w = mu / s**2
        hess = fhess(x) + (rows.T * w) @ rows
        grad = fgrad(x) - rows.T @ (mu / s)
        try:
            cho = scipy.linalg.cho_factor(hess)
            hinv_g = scipy.linalg.cho_solve(cho, grad)
            hinv_e = scipy.linalg.cho_solve(cho, eq)
            nu = -float(eq @ hinv_g) / float(eq @ hinv_e)
            # with the multiplier in hand, solve against the projected
            # gradient directly: the difference of the two O(1) solves above
            # cancels catastrophically near convergence
            projected_grad = grad + nu * eq
            dx = -scipy.linalg.cho_solve(cho, projected_grad)
            # refinement passes; late-stage Hessians are stiff enough
            # (condition ~ 1/mu near active constraints) that the raw solve
            # error would dominate the Newton decrement
            for _ in range(3):
                dx += scipy.linalg.cho_solve(cho, -projected_grad - hess @ dx)
        except scipy.linalg.LinAlgError:
            bordered = np.zeros((m + 1, m + 1))
            bordered[:m, :m] = hess
            bordered[:m, m] = eq
            bordered[m, :m] = eq
            rhs = np.concatenate([-grad, [0.0]])
            sol = np.linalg.solve(bordered, rhs)
            dx, nu = sol[:m], float(sol[m])
            projected_grad = grad + nu * eq
        dec2 = max(float(-projected_grad @ dx), 0.0)
        dec = dec2**0.5
        if dec < tol:
            converged = True
            break
        steps += 1

        ds_dir = rows @ dx
        alpha = 1.0
        shrink = ds_dir < 0
        if shrink.any():
            alpha = min(alpha, 0.99 * float(np.min(-s[shrink] / ds_dir[shrink])))

        def projected(step):
            # candidate re-projected onto the equality hyperplane; Newton
            # preserves it only to solve precision and drift would accumulate
            cand = x + step * dx
            return cand + (eq_rhs - eq @ cand) / (eq @ eq) * eq

        if dec < 1e-3:
            # quadratic region: objective decreases per step are below the
            # floating-point resolution of phi, so an Armijo test is
            # meaningless; take damped pure-Newton polish steps and exit
            # once an already-small decrement stops improving (the
            # float-representable optimum for this barrier parameter)
            if dec >= 0.9 * prev_dec:
                stagnant += 1
                if stagnant >= 3:
                    converged = True
                    break
            else:
                stagnant = 0
            prev_dec = dec
            step = alpha
            cand = projected(step)
            for _ in range(60):
                if np.all(rows @ cand > 0):
                    break
                step *= 0.5
                cand = projected(step)
            else:
                break
            x = cand
            continue

        prev_dec = dec
        phi0 = _phi(fval(x), mu, s)
        accepted = False
        step = alpha
        for _ in range(60):
            cand = projected(step)
            s_cand = rows @ cand
            if np.all(s_cand > 0):
                phi_cand = _phi(fval(cand), mu, s_cand)
                if phi_cand <= phi0 - 0.01 * step * dec2:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            # no measurable decrease; the damped full step is safe in-domain
            cand = projected(alpha)
            if not np.all(rows @ cand > 0):
                break
        x = cand
    return x, converged, steps


def _barrier_path(x, fval, fgrad, fhess, rows, eq, eq_rhs, mu_floor, final_tol):
    """Follow the central path mu -> 0; returns (x, mu_final, total steps, stalled).

    A stage that misses its tolerance within the inner cap is retried at the
    same barrier parameter on the next outer round, so a poorly centered
    start spends outer budget instead of failing outright.
    """
    mu = MU_INITIAL
    total = 0
    for _ in range(OUTER_CAP):
        last = mu < mu_floor
        tol = final_tol if last else max(final_tol, 1e-3 * mu)
        x, converged, steps = _newton_stage(
            x, mu, fval, fgrad, fhess, rows, eq, eq_rhs, tol, INNER_CAP
        )
        total += steps
        if converged:
            if last:
                return x, mu, total, False
            mu *= MU_SHRINK
        elif steps == 0:
            break  # line search cannot move; retrying would spin
    return x, mu, total, True


def _drop_null_rows(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Remove vanishing constraint rows (0 >= 0 for every p) and normalize the rest.

    Row normalization leaves the feasible set untouched but balances the
    barrier Hessian: near-interpolating smoothers produce rows of wildly
    different norms, which otherwise drives the late-stage conditioning.
    """
    if a.size == 0:
        return a, np.array([], dtype=int)
    scale = np.abs(a).max()
    if scale == 0.0:
        return a[:0], np.array([], dtype=int)
    keep = np.flatnonzero(np.abs(a).max(axis=1) > 1e-14 * scale)
    kept = a[keep]
    return kept / np.linalg.norm(kept, axis=1, keepdims=True), keep


def _phase_one(a: np.ndarray, eq_rhs: float):
    """Maximize the minimum slack of A q >= 0 over the scaled simplex.

    Returns a strictly feasible q, or raises naming the most violated
    constraint if the optimum margin is nonpositive.  Exits as soon as the
    iterate is comfortably strictly feasible: the margin maximizer itself is
    badly centered for the main objective (it can zero out coordinates), so
    an early near-uniform feasible point is the better start.
    """
    k, m = a.shape
    scale = max(1.0, float(np.abs(a).sum(axis=1).max()))
    q0 = np.ones(m)
    u0 = float((a @ q0).min()) - 1.0
    x = np.concatenate([q0, [u0]])
    rows = np.zeros((m + k, m + 1))
    rows[:m, :m] = np.eye(m)
    rows[m:, :m] = a
    rows[m:, m] = -1.0
    eq = np.concatenate([np.ones(m), [0.0]])

    grad_vec = np.zeros(m + 1)
    grad_vec[m] = -1.0
    zero_hess = np.zeros((m + 1, m + 1))
    early_exit = 1e-6 * scale
    mu = MU_INITIAL
    while mu >= 1e-8:
        x, _, _ = _newton_stage(
            x, mu, lambda x: -x[m], lambda x: grad_vec, lambda x: zero_hess,
            rows, eq, eq_rhs, max(1e-8, 1e-3 * mu), INNER_CAP,
        )
        if float((a @ x[:m]).min()) > early_exit:
            return x[:m]
        mu *= MU_SHRINK

    q, margin = x[:m], float(x[m])
    slack = a @ q
    feas_tol = 1e-10 * scale
    if margin <= feas_tol or slack.min() <= 0:
        worst = int(np.argmin(slack))
        raise InfeasibleConstraintsError(
            f"monotonicity constraints are infeasible; most violated at knot index {worst} "
            f"(best attainable margin {margin:.3e})",
            worst_constraint=worst,
        )
    return q


def _kkt_certificate(q, mu, a, active):
    """Optimality certificate: stationarity with fitted nonnegative multipliers,
    complementarity products, and the equality violation, all max-combined.

    Multipliers on rows that are active or nearly active are refitted by
    nonnegative least squares (the intercept multiplier enters sign-split);
    the rest keep their exact barrier values mu/slack.  This reports the
    certificate a generic NLP solver would, without the floating-point floor
    of the raw barrier gradient in stiff directions; complementarity keeps
    the refit honest.
    """
    m = q.size
    grad_f = -0.5 / np.sqrt(q)
    mult_q = mu / q
    base = grad_f - mult_q
    slack = a @ q if a.size else np.zeros(0)
    barrier_mult = mu / slack if slack.size else np.zeros(0)
    eq_violation = abs(float(q.sum()) - m) / m

    def score(refit):
        mult_c = barrier_mult.copy()
        if refit.size:
            cols = np.column_stack([-a[refit].T, np.ones(m), -np.ones(m)])
            sol, _ = scipy.optimize.nnls(cols, -base)
            mult_c[refit] = sol[:-2]
            nu = float(sol[-2] - sol[-1])
        else:
            nu = -float(base.mean())
        r_stat = base - (a.T @ mult_c if a.size else 0.0) + nu
        comp = max(
            float((mult_q * q).max()),
            float((mult_c * slack).max()) if slack.size else 0.0,
        )
        return max(float(np.abs(r_stat).max()), comp, eq_violation)

    if not slack.size:
        return score(np.array([], dtype=int))
    # any nonnegative multiplier vector certifies; report the better of the
    # active-set and the nearly-active-set fits
    top = max(1.0, float(slack.max()))
    return min(
        score(np.flatnonzero(slack <= rtol * top)) for rtol in (1e-6, 1e-3)
    )


def _uniform_result(n: int, slack: np.ndarray, kept: np.ndarray, diagnostics: dict) -> TiltWeights:
    active = np.array([], dtype=int)
    if slack.size:
        active = kept[np.flatnonzero(slack <= ACTIVE_SLACK_RTOL * max(1.0, float(slack.max())))]
    return TiltWeights(
        p=np.full(n, 1.0 / n),
        objective=0.0,
        kkt_residual=0.0,
        active_constraints=active,
        diagnostics=diagnostics,
    )


def tilt(
    ds: Dataset,
    lam: float,
    spec: KernelSpec = KernelSpec(),
    direction: MonotoneDirection = MonotoneDirection.INCREASING,
    start: np.ndarray | None = None,
) -> TiltWeights:
    """Solve the tilting program and return the optimal simplex weights.

    If uniform weights already satisfy the sign constraints they are returned
    immediately: uniform maximizes the objective over the whole simplex, so
    feasibility implies optimality.  Otherwise a phase-I pass (maximizing the
    minimum slack) finds a strictly feasible start and the log-barrier Newton
    path is followed to the optimum.

    ``start`` optionally supplies a strictly feasible simplex vector to start
    the barrier from instead of the phase-I point; the program is strictly
    convex, so every start reaches the same optimum.
    """
    smoother = derivative_smoother_matrix(ds, lam, spec)
    a_full = direction.sign * smoother * ds.y[None, :]
    a_rows, kept = _drop_null_rows(a_full)
    n = ds.n

    uniform_slack = a_rows @ np.ones(n) if a_rows.size else np.zeros(0)
    if a_rows.size == 0 or uniform_slack.min() >= 0.0:
        return _uniform_result(
            n, uniform_slack, kept, {"phase1": False, "newton_steps": 0, "mu_final": 0.0}
        )

    used_phase1 = False
    q0 = None
    if start is not None:
        cand = n * np.asarray(start, dtype=float).reshape(-1)
        if cand.size == n and np.all(cand > 0) and np.all(a_rows @ cand > 0):
            q0 = n * cand / cand.sum()
    if q0 is None:
        q0 = _phase_one(a_rows, float(n))
        used_phase1 = True

    rows = np.vstack([np.eye(n), a_rows])
    q, mu_final, steps, stalled = _barrier_path(
        q0,
        fval=lambda q: n - float(np.sum(np.sqrt(q))),
        fgrad=lambda q: -0.5 / np.sqrt(q),
        fhess=lambda q: np.diag(0.25 * q**-1.5),
        rows=rows,
        eq=np.ones(n),
        eq_rhs=float(n),
        mu_floor=MU_FLOOR,
        final_tol=DECREMENT_TOL,
    )
    if stalled:
        raise SolverStallError(
            "tilt solver hit its iteration cap before converging",
            diagnostics={"mu": mu_final, "newton_steps": steps, "q": q},
        )

    slack = a_rows @ q
    active_local = np.flatnonzero(slack <= ACTIVE_SLACK_RTOL * max(1.0, float(slack.max())))
    residual = _kkt_certificate(q, mu_final, a_rows, active_local)
    return TiltWeights(
        p=q / n,
        objective=float(n - np.sum(np.sqrt(q))),
        kkt_residual=residual,
        active_constraints=kept[active_local],
        diagnostics={
            "phase1": used_phase1,
            "newton_steps": steps,
            "mu_final": mu_final,
            "slack": slack,
        },
    )


def fit_monotone(
    ds: Dataset,
    lam: float,
    spec: KernelSpec = KernelSpec(),
    direction: MonotoneDirection = MonotoneDirection.INCREASING,
) -> SplineFit:
    """Tilt the observation weights, then refit with the reweighted outcomes.

    Each outcome is scaled by its relative weight n p_i (the ratio of the
    tilted weight to the uniform 1/n), so uniform tilting reproduces the
    unconstrained fit exactly and the refit's knot derivatives inherit the
    sign constraint from the tilting program.
    """
    weights = tilt(ds, lam, spec, direction)
    refit = fit(ds.replace_y(ds.n * weights.p * ds.y), lam, spec)
    refit.diagnostics["tilt_objective"] = weights.objective
    refit.diagnostics["tilt_kkt_residual"] = weights.kkt_residual
    refit.diagnostics["tilt_active_constraints"] = [int(i) for i in weights.active_constraints]
    return refit
