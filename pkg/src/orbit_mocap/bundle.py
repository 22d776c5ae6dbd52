"""Multi-frame bundle adjustment.

Block-coordinate descent over the pose sequence S (accelerated proximal
gradient with singular value thresholding on the stacked shape matrix),
the cameras R (Armijo steps on the Stiefel manifold, per frame) and the
auxiliary rank-1 limb-length matrix L (closed-form SVD truncation). Each
block update is non-increasing in the composite objective

    sum_t |(W_t - R_t S_t) diag(w_t)|_F^2
        + gamma * |ell(S) - L|_F^2 + alpha * |S#|_*

where column t of S# is the vectorized pose of frame t.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import CameraSeq
from .errors import DataError, NumericalError
from .numopt import (ProxConfig, apg_minimize, minimize_stiefel_rows,
                     rank1_approx, svt)
from .skeleton import PoseSeq2D, PoseSeq3D, _frozen_array, limb_lengths_sq


@dataclass(frozen=True)
class BAConfig:
    """Bundle-adjustment weights and loop limits.

    alpha=None resolves to alpha_scale * sigma1 of the initialization's
    stacked shape matrix (at the solver's normalized scale). The default
    scale 0.1 suits noisy detections; for clean tracks the nuclear term
    only needs to break rank ties and a much smaller scale (1e-6) avoids
    biasing the unobserved depth directions. joint_weights is an optional
    (p, n) matrix carried over from the robust initializer; default
    all-ones.
    """

    alpha: float = None
    alpha_scale: float = 0.1
    gamma: float = 1.0
    outer_iters: int = 50
    tol_rel: float = 1e-6
    joint_weights: np.ndarray = None
    inner_iters: int = 500
    inner_tol: float = 1e-6
    mu0: float = 2.0
    backtrack_factor: float = 2.0
    threads: int = 1

    def __post_init__(self):
        if self.alpha is not None and self.alpha < 0:
            raise DataError("alpha must be >= 0")
        if self.alpha_scale < 0:
            raise DataError("alpha_scale must be >= 0")
        if self.gamma < 0:
            raise DataError("gamma must be >= 0")
        if not self.tol_rel > 0:
            raise DataError("tol_rel must be > 0")
        if self.joint_weights is not None:
            object.__setattr__(self, "joint_weights",
                               _frozen_array(self.joint_weights))


@dataclass
class BAState:
    """Solver state: poses, cameras, rank-1 limb matrix and objective trace."""

    S: PoseSeq3D
    R: CameraSeq
    L: np.ndarray
    objective_trace: list = field(default_factory=list)


def stack_shape(coords):
    """(n, 3, p) pose array -> (3p, n) matrix, column t = vec(S_t)."""
    n = coords.shape[0]
    return coords.reshape(n, -1).T


def unstack_shape(mat, p):
    return np.ascontiguousarray(mat.T).reshape(-1, 3, p)


def _weights(cfg, n, p):
    if cfg.joint_weights is None:
        return np.ones((n, p))
    w = np.asarray(cfg.joint_weights, dtype=float)
    if w.shape != (p, n):
        raise DataError(f"joint_weights must be (p, n)=({p}, {n}), got {w.shape}")
    return w.T.copy()


def resolve_alpha(cfg, init_coords):
    """Fill in the data-scaled default alpha = alpha_scale * sigma1(S0#)."""
    if cfg.alpha is not None:
        return cfg
    sigma1 = float(np.linalg.svd(stack_shape(init_coords), compute_uv=False)[0])
    return replace(cfg, alpha=cfg.alpha_scale * sigma1)


def _reproj_residual(coords2, rows, coords3, w):
    return (np.einsum("nij,njp->nip", rows, coords3) - coords2) * w[:, None, :]


def objective(state, seq2d, skeleton, cfg):
    """Composite objective at the given state (alpha must be resolved)."""
    if cfg.alpha is None:
        raise DataError("objective needs a concrete alpha (use resolve_alpha)")
    coords3 = state.S.coords
    n, _, p = coords3.shape
    if seq2d.coords.shape != (n, 2, p) or state.R.rows.shape != (n, 2, 3):
        raise DataError("objective: inconsistent W/S/R shapes")
    w = _weights(cfg, n, p)
    res = _reproj_residual(seq2d.coords, state.R.rows, coords3, w)
    total = float(np.vdot(res, res))
    if cfg.gamma > 0:
        art = limb_lengths_sq(state.S, skeleton) - state.L
        total += cfg.gamma * float(np.vdot(art, art))
    if cfg.alpha > 0:
        total += cfg.alpha * float(
            np.linalg.svd(stack_shape(coords3), compute_uv=False).sum())
    return total


def _smooth_terms(seq2d, rows, skeleton, cfg, L, w):
    """f and grad_f of the smooth part, on the stacked (3p, n) variable."""
    p = seq2d.n_joints
    edges = skeleton.edge_array()
    ei, ej = edges[:, 0], edges[:, 1]
    w2 = w ** 2

    def f(x):
        coords3 = unstack_shape(x, p)
        res = _reproj_residual(seq2d.coords, rows, coords3, w)
        val = float(np.vdot(res, res))
        if cfg.gamma > 0:
            diff = coords3[:, :, ei] - coords3[:, :, ej]
            ell = np.einsum("nim,nim->nm", diff, diff)
            art = ell - L.T
            val += cfg.gamma * float(np.vdot(art, art))
        return val

    def grad(x):
        coords3 = unstack_shape(x, p)
        res = (np.einsum("nij,njp->nip", rows, coords3) - seq2d.coords) * w2[:, None, :]
        g = 2.0 * np.einsum("nji,njp->nip", rows, res)
        if cfg.gamma > 0:
            diff = coords3[:, :, ei] - coords3[:, :, ej]
            ell = np.einsum("nim,nim->nm", diff, diff)
            coeff = 4.0 * cfg.gamma * (ell - L.T)  # (n, m)
            contrib = coeff[:, None, :] * diff
            for e in range(len(ei)):
                g[:, :, ei[e]] += contrib[:, :, e]
                g[:, :, ej[e]] -= contrib[:, :, e]
        return stack_shape(g)

    return f, grad


def update_S(state, seq2d, skeleton, cfg):
    """Pose-block update: APG with nuclear-norm prox on the stacked shape."""
    if cfg.alpha is None:
        raise DataError("update_S needs a concrete alpha (use resolve_alpha)")
    coords3 = state.S.coords
    n, _, p = coords3.shape
    w = _weights(cfg, n, p)
    f, grad = _smooth_terms(seq2d, state.R.rows, skeleton, cfg, state.L, w)
    if cfg.alpha > 0:
        prox = lambda v, mu: svt(v, cfg.alpha / mu)
        nonsmooth = lambda x: cfg.alpha * float(
            np.linalg.svd(x, compute_uv=False).sum())
    else:
        prox = lambda v, mu: v
        nonsmooth = None
    pcfg = ProxConfig(alpha=cfg.alpha, mu0=cfg.mu0,
                      backtrack_factor=cfg.backtrack_factor,
                      max_inner_iters=cfg.inner_iters, tol_rel=cfg.inner_tol)
    x = apg_minimize(grad, f, prox, stack_shape(coords3), pcfg, nonsmooth=nonsmooth)
    return PoseSeq3D(unstack_shape(x, p), state.S.fps)


def update_R(state, seq2d, cfg):
    """Camera-block update: per-frame Armijo descent on St(3,2)."""
    coords3 = state.S.coords
    n, _, p = coords3.shape
    w = _weights(cfg, n, p)

    def solve(t):
        pose, target, wt = coords3[t], seq2d.coords[t], w[t]
        wt2 = wt ** 2

        def f(r):
            res = (target - r @ pose) * wt
            return float(np.vdot(res, res))

        def egrad(r):
            return 2.0 * ((r @ pose - target) * wt2) @ pose.T

        rows, _ = minimize_stiefel_rows(f, egrad, state.R.rows[t],
                                        max_steps=50, grad_tol=1e-8)
        return rows

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(solve, range(n)))
    else:
        rows = [solve(t) for t in range(n)]
    return CameraSeq(np.stack(rows))


def update_L(state, skeleton):
    """Closed-form rank-1 approximation of the squared limb-length matrix."""
    return rank1_approx(limb_lengths_sq(state.S, skeleton))


def solve(seq2d, init_S, init_R, skeleton, cfg=None):
    """Alternate S, R and L updates until the objective stalls.

    The problem is solved at a normalized scale (2D tracks rescaled to
    unit RMS, initialization rescaled to match) so that gamma=1 balances
    the articulation term against reprojection independent of input units;
    the returned poses are mapped back to the input scale. alpha, when
    given explicitly, applies at the normalized scale.

    Raises NumericalError (with the trace attached) if an outer round
    increases the objective beyond slack, which the per-block guarantees
    rule out absent numerical trouble.
    """
    if seq2d.n_joints != init_S.n_joints:
        raise DataError("tracks and initialization disagree on joint count")
    if seq2d.n_frames != init_S.n_frames or seq2d.n_frames != init_R.n_frames:
        raise DataError("tracks and initialization disagree on frame count")
    rms = float(np.sqrt(np.mean(seq2d.coords ** 2)))
    if rms <= 0:
        raise DataError("2D tracks are identically zero")
    seq2d = PoseSeq2D(seq2d.coords / rms, seq2d.conf, seq2d.fps,
                      centralized=seq2d.centralized)
    init_S = PoseSeq3D(init_S.coords / rms, init_S.fps)
    cfg = resolve_alpha(cfg or BAConfig(), init_S.coords)
    state = BAState(init_S, init_R, np.zeros((skeleton.n_edges, seq2d.n_frames)))
    state.L = update_L(state, skeleton)
    state.objective_trace = [objective(state, seq2d, skeleton, cfg)]
    for _ in range(cfg.outer_iters):
        state.S = update_S(state, seq2d, skeleton, cfg)
        state.R = update_R(state, seq2d, cfg)
        state.L = update_L(state, skeleton)
        obj = objective(state, seq2d, skeleton, cfg)
        prev = state.objective_trace[-1]
        state.objective_trace.append(obj)
        if obj > prev + 1e-9 * max(1.0, abs(prev)):
            raise NumericalError(
                f"objective increased ({prev:.6e} -> {obj:.6e})",
                trace=state.objective_trace)
        if abs(prev - obj) <= cfg.tol_rel * max(1.0, abs(prev)):
            break
    state.S = PoseSeq3D(state.S.coords * rms, state.S.fps)
    state.L = state.L * rms ** 2
    return state
