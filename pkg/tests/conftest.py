"""Shared instance factories and independent oracles used across test modules."""

import numpy as np
import pytest
import scipy.integrate

import ivspline as ivs


def random_instance(seed, n=8, noise=0.3, instrument_noise=0.6):
    """Generic instance: relevant instrument, smooth signal, moderate noise."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(n)
    z = 0.8 * w + instrument_noise * rng.standard_normal(n)
    y = np.sin(2 * z) + 0.5 * z + noise * rng.standard_normal(n)
    return ivs.Dataset(y=y, z=z, w=w)


def separated_instance(seed, n=10, noise=0.1):
    """Instance with well-separated knots, for interpolation-limit checks.

    Near-tied knots make the exact natural interpolant arbitrarily violent,
    which the small-lambda limit inherits; a jittered equispaced design keeps
    that limit numerically meaningful.
    """
    rng = np.random.default_rng(seed)
    z = np.linspace(-1.5, 1.5, n) + rng.uniform(-0.1, 0.1, n)
    rng.shuffle(z)
    w = z + 0.5 * rng.standard_normal(n)
    y = np.sin(2 * z) + 0.5 * z + noise * rng.standard_normal(n)
    return ivs.Dataset(y=y, z=z, w=w)


def wiggly_instance(seed, n=8, slope=0.6, noise=0.8):
    """Noisy weak-trend instance; increasing-direction tilts often have active constraints."""
    rng = np.random.default_rng(seed)
    z = np.sort(rng.uniform(-1.5, 1.5, n))
    rng.shuffle(z)
    w = z + 0.4 * rng.standard_normal(n)
    y = slope * z + noise * rng.standard_normal(n)
    return ivs.Dataset(y=y, z=z, w=w)


def qp_oracle(ds, lam, spec=None):
    """Solve the penalized program by its direct first-order system.

    Assembles the quadratic form of the original objective in (delta, a) --
    weight matrix applied to the value map, penalty on the cubic block -- and
    solves the stationarity-plus-constraints system in one dense solve.
    Shares no code path with the production solver.
    """
    spec = spec or ivs.KernelSpec()
    om = ivs.build_weight_matrix(ds.w, spec)
    d = ivs.build_design(ds.z)
    n = ds.n
    x_map = np.hstack([d.cubic, d.linear])
    block_pen = np.zeros((n + 2, n + 2))
    block_pen[:n, :n] = d.cubic
    q = x_map.T @ om.values @ x_map + lam * block_pen
    c = np.zeros((2, n + 2))
    c[:, :n] = d.linear.T
    kkt = np.zeros((n + 4, n + 4))
    kkt[: n + 2, : n + 2] = 2 * q
    kkt[: n + 2, n + 2 :] = c.T
    kkt[n + 2 :, : n + 2] = c
    rhs = np.concatenate([2 * x_map.T @ om.values @ ds.y, np.zeros(2)])
    sol = np.linalg.solve(kkt, rhs)
    delta, a = sol[:n], sol[n : n + 2]
    r = ds.y - x_map @ sol[: n + 2]
    objective = float(r @ om.values @ r + lam * delta @ d.cubic @ delta)
    return delta, a, objective


def criterion_quadrature_oracle(residuals, w, variance=1.0):
    """Integral form of the moment criterion for scalar instruments.

    Expands |n^-1 sum_i r_i exp(i w_i t)|^2 into pair cosines and integrates
    each against the Cauchy(0, 1/b) mixing density with Fourier-weighted
    adaptive quadrature; the total is scaled by the weight function's value
    at zero.  Never evaluates the Laplace closed form it is checking.
    """
    r = np.asarray(residuals, float)
    w = np.asarray(w, float).reshape(-1)
    n = r.size
    b = np.sqrt(variance / 2.0)
    gamma = 1.0 / b

    def density(t):
        return gamma / (np.pi * (t * t + gamma * gamma))

    total = float(np.sum(r * r))
    for i in range(n):
        for j in range(i + 1, n):
            gap = abs(w[i] - w[j])
            if gap == 0.0:
                pair = 1.0
            else:
                val = scipy.integrate.quad(
                    density, 0, np.inf, weight="cos", wvar=gap,
                    epsabs=1e-14, limit=400, full_output=1,
                )[0]
                pair = 2.0 * val
            total += 2.0 * r[i] * r[j] * pair
    return total / (2.0 * b) / n**2


def roughness_exact_integral(fit):
    """Exact integral of the squared second derivative over the knot range.

    The second derivative is piecewise linear between sorted knots, so each
    interval [z0, z1] contributes (z1 - z0)/3 (f0^2 + f0 f1 + f1^2).
    """
    zs = np.sort(fit.knots)
    f = ivs.evaluate_second_derivative(fit, zs)
    h = np.diff(zs)
    return float(np.sum(h / 3.0 * (f[:-1] ** 2 + f[:-1] * f[1:] + f[1:] ** 2)))


def natural_interpolant(z, values):
    """Natural cubic spline through (z_i, values_i) via the unpenalized bordered system."""
    z = np.asarray(z, float)
    n = z.size
    d = ivs.build_design(z)
    kkt = np.zeros((n + 2, n + 2))
    kkt[:n, :n] = d.cubic
    kkt[:n, n:] = d.linear
    kkt[n:, :n] = d.linear.T
    sol = np.linalg.solve(kkt, np.concatenate([values, np.zeros(2)]))
    return ivs.SplineFit(a=sol[n:], delta=sol[:n], knots=z, lam=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
