"""Reusable optimization kernels.

All routines are pure and re-entrant: singular value thresholding (the
nuclear-norm prox), best rank-1 approximation, accelerated proximal
gradient with backtracking line search and function-value restart, and
first-order descent on the Stiefel manifold St(3,2) with polar retraction.
"""

from dataclasses import dataclass

import numpy as np

from .camera import CameraMat, polar_retract, polar_rows
from .errors import DataError, NumericalError


@dataclass(frozen=True)
class ProxConfig:
    """Settings for the accelerated proximal gradient loop.

    mu is the inverse step length; backtracking multiplies it until the
    sufficient-decrease condition holds. alpha is the nonsmooth weight
    handed to the prox.
    """

    alpha: float = 0.0
    mu0: float = 2.0
    backtrack_factor: float = 2.0
    max_inner_iters: int = 500
    tol_rel: float = 1e-6

    def __post_init__(self):
        if self.alpha < 0:
            raise DataError("alpha must be >= 0")
        if not self.mu0 > 0:
            raise DataError("mu0 must be > 0")
        if not self.backtrack_factor > 1:
            raise DataError("backtrack_factor must be > 1")
        if self.max_inner_iters < 1:
            raise DataError("max_inner_iters must be >= 1")
        if not self.tol_rel > 0:
            raise DataError("tol_rel must be > 0")


def svt(mat, tau):
    """Singular value thresholding: prox of tau * nuclear norm at mat.

    Shrinks every singular value by tau, clamping at zero; the unique
    minimizer of 0.5*|X - M|_F^2 + tau*|X|_*.
    """
    mat = np.asarray(mat, dtype=float)
    if tau < 0:
        raise DataError("tau must be >= 0")
    if tau == 0:
        return mat.copy()
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    return (u * s) @ vt


def rank1_approx(mat):
    """Frobenius-nearest rank-1 matrix (leading singular triple).

    The all-zero matrix maps to itself (degenerate but well-defined).
    """
    mat = np.asarray(mat, dtype=float)
    if not np.all(np.isfinite(mat)):
        raise DataError("rank1_approx: non-finite input")
    if not mat.any():
        return np.zeros_like(mat)
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    return s[0] * np.outer(u[:, 0], vt[0])


def apg_minimize(grad_f, f, prox, x0, cfg, nonsmooth=None):
    """Accelerated proximal gradient with backtracking and restart.

    Minimizes f(X) + g(X) where g is handled by `prox`: prox(V, mu) must
    return argmin_X mu/2 * |X - V|_F^2 + g(X). `nonsmooth` evaluates g for
    objective tracking (omit for g == 0 up to a constant along iterates).
    Momentum follows the (k-1)/(k+2) schedule and is reset whenever the
    composite objective would increase; backtracking on mu enforces the
    sufficient-decrease condition, so accepted iterations never increase
    the objective.
    """
    x = np.array(x0, dtype=float)
    if nonsmooth is None:
        nonsmooth = lambda _: 0.0

    def composite(z, fz=None):
        return (f(z) if fz is None else fz) + nonsmooth(z)

    mu = cfg.mu0
    x_prev = x
    obj = composite(x)
    if not np.isfinite(obj):
        raise NumericalError("non-finite objective at the initial point")
    k = 0
    for it in range(cfg.max_inner_iters):
        beta = (k - 1.0) / (k + 2.0) if k >= 1 else 0.0
        restarted = False
        while True:
            y = x + beta * (x - x_prev)
            fy = f(y)
            gy = grad_f(y)
            if not (np.isfinite(fy) and np.all(np.isfinite(gy))):
                raise NumericalError(f"non-finite smooth term at iteration {it}")
            while True:
                x_new = prox(y - gy / mu, mu)
                diff = x_new - y
                quad = fy + np.vdot(gy, diff) + 0.5 * mu * np.vdot(diff, diff)
                f_new = f(x_new)
                if f_new <= quad + 1e-12 * max(1.0, abs(quad)):
                    break
                mu *= cfg.backtrack_factor
                if mu > 1e18:
                    raise NumericalError(
                        f"backtracking failed (mu overflow) at iteration {it}")
            obj_new = composite(x_new, f_new)
            if obj_new <= obj + 1e-12 * max(1.0, abs(obj)) or restarted or beta == 0.0:
                break
            # momentum overshoot: restart from the last iterate
            k = 0
            beta = 0.0
            restarted = True
        x_prev, x = x, x_new
        k += 1
        done = abs(obj - obj_new) <= cfg.tol_rel * max(1.0, abs(obj))
        obj = min(obj, obj_new)
        if done:
            break
    return x


def stiefel_tangent(camera_rows, egrad):
    """Project a Euclidean gradient onto the tangent space at R in St(3,2)."""
    x = np.asarray(camera_rows, dtype=float).T  # (3, 2), orthonormal columns
    e = np.asarray(egrad, dtype=float).T
    xte = x.T @ e
    return (e - x @ ((xte + xte.T) / 2.0)).T


def stiefel_step(camera, egrad, step):
    """One retracted gradient step on St(3,2).

    Projects egrad to the tangent space at the camera, moves by `step`
    against it and retracts back with the polar factor.
    """
    if not step > 0:
        raise DataError("step must be > 0")
    tangent = stiefel_tangent(camera.rows, egrad)
    return polar_retract(camera.rows - step * tangent)


def minimize_stiefel_rows(f, egrad, rows0, max_steps=50, grad_tol=1e-8,
                          initial_step=1.0):
    """Armijo-backtracked gradient descent on St(3,2), raw-array hot path.

    f and egrad take a (2, 3) array. Stops when the tangent-gradient norm
    drops below grad_tol or after max_steps accepted steps. The objective
    never increases.
    """
    rows = np.asarray(rows0, dtype=float)
    fval = f(rows)
    step = initial_step
    for _ in range(max_steps):
        tangent = stiefel_tangent(rows, egrad(rows))
        gnorm2 = float(np.vdot(tangent, tangent))
        if gnorm2 <= grad_tol ** 2:
            break
        accepted = False
        while step > 1e-16:
            trial = polar_rows(rows - step * tangent)
            ftrial = f(trial)
            if ftrial <= fval - 1e-4 * step * gnorm2:
                rows, fval = trial, ftrial
                step *= 2.0
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    return rows, fval


def minimize_stiefel(f, egrad, camera0, max_steps=50, grad_tol=1e-8,
                     initial_step=1.0):
    """CameraMat-typed wrapper around minimize_stiefel_rows."""
    rows, fval = minimize_stiefel_rows(
        lambda r: f(CameraMat(r)), lambda r: egrad(CameraMat(r)),
        camera0.rows, max_steps, grad_tol, initial_step)
    return CameraMat(rows), fval
