"""Pose-dictionary learning and robust single-frame initialization.

A dictionary is a mean pose plus orthonormal basis shapes learned by PCA
from an aligned 3D pose corpus. Each 2D frame is lifted by alternating
sparse coefficient estimation (accelerated proximal gradient with
soft-thresholding), camera updates on the Stiefel manifold and
Geman-McClure reweighting of per-joint residuals, multi-started over
azimuth-seeded rotations.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraMat, CameraSeq, _rot_y
from .errors import DataError
from .numopt import minimize_stiefel_rows
from .skeleton import Pose3D, PoseSeq3D, _frozen_array, limb_lengths_sq

_DEPTH_FLIP = np.diag([1.0, 1.0, -1.0])


@dataclass(frozen=True)
class PoseDictionary:
    """Mean pose plus k basis shapes, orthonormal under the Frobenius inner
    product, with joint names for compatibility checks."""

    mean: np.ndarray  # (3, p)
    bases: np.ndarray  # (k, 3, p)
    joint_names: tuple
    explained_variance: np.ndarray = field(default=None)  # (k,) ratios

    def __post_init__(self):
        mean = _frozen_array(self.mean)
        bases = _frozen_array(self.bases)
        p = len(self.joint_names)
        if mean.shape != (3, p):
            raise DataError(f"dictionary mean must be (3, {p}), got {mean.shape}")
        if bases.ndim != 3 or bases.shape[1:] != (3, p) or bases.shape[0] < 1:
            raise DataError(f"dictionary bases must be (k, 3, {p}), got {bases.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(bases))):
            raise DataError("dictionary contains non-finite values")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "bases", bases)
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        if self.explained_variance is not None:
            object.__setattr__(self, "explained_variance",
                               _frozen_array(self.explained_variance))

    @property
    def n_bases(self):
        return self.bases.shape[0]

    @property
    def n_joints(self):
        return self.mean.shape[1]

    def compose(self, coeffs):
        """Pose coordinates mean + sum_i coeffs[i] * bases[i]."""
        return self.mean + np.tensordot(coeffs, self.bases, axes=(0, 0))


@dataclass(frozen=True)
class FrameEstimate:
    """Single-frame lifting result: pose, camera, sparse coefficients,
    robust per-joint weights and the final weighted objective."""

    S: Pose3D
    R: CameraMat
    coeffs: np.ndarray
    weights: np.ndarray
    objective: float


@dataclass(frozen=True)
class InitConfig:
    """Knobs for per-frame initialization.

    Restarts are first screened with `screen_iters` cheap alternation
    rounds; the best `keep_restarts` candidates run to convergence.
    """

    lambda1: float = None  # None: 0.01 * sigma1 of the frame's data term
    restarts: int = 8
    reweight_rounds: int = 3
    alt_iters: int = 10
    coeff_iters: int = 80
    screen_iters: int = 2
    keep_restarts: int = 2
    threads: int = 1


def _kabsch(src, dst):
    """Rotation Q (det +1) minimizing |Q src - dst|_F for centered (3, p)."""
    u, _, vt = np.linalg.svd(dst @ src.T)
    d = np.sign(np.linalg.det(u @ vt))
    return (u * np.array([1.0, 1.0, d])) @ vt


def learn_dictionary(corpus, k, skeleton, align=True, normalize_scale=True):
    """PCA pose dictionary from a 3D corpus.

    Poses are centered, divided by their mean limb length (decoupling
    subject size), rotationally aligned to the first pose, then the top-k
    principal components of the vectorized residuals become the bases. The
    mean and bases are scaled back to the corpus' average size so
    reconstructions stay metric. `align`/`normalize_scale` can be disabled
    for corpora that are already consistently oriented and sized (their
    exact linear span is then preserved).
    """
    coords = np.stack([p.coords if isinstance(p, Pose3D) else np.asarray(p, float)
                       for p in corpus])
    n, _, p = coords.shape
    if p != skeleton.n_joints:
        raise DataError(f"corpus has {p} joints, skeleton has {skeleton.n_joints}")
    if k < 1:
        raise DataError("k must be >= 1")
    if n < k:
        raise DataError(f"corpus size {n} smaller than k={k}")

    centered = coords - coords.mean(axis=2, keepdims=True)
    if normalize_scale:
        lengths = np.sqrt(limb_lengths_sq(PoseSeq3D(centered, 1.0), skeleton))
        scales = lengths.mean(axis=0)  # mean limb length per pose
        if np.any(scales <= 0):
            raise DataError("corpus contains a pose with all joints coincident")
        centered = centered / scales[:, None, None]
        scale_back = float(scales.mean())
    else:
        scale_back = 1.0
    if align:
        ref = centered[0]
        centered = np.stack([_kabsch(x, ref) @ x for x in centered])

    mean = centered.mean(axis=0)
    data = (centered - mean).reshape(n, -1).T  # (3p, n)
    u, s, _ = np.linalg.svd(data, full_matrices=False)
    rank = int(np.sum(s > max(s[0], 1e-300) * 1e-10)) if s.size else 0
    if k > rank:
        raise DataError(
            f"requested k={k} bases but the aligned corpus has rank {rank}")
    bases = u[:, :k].T.reshape(k, 3, p)  # kept unit-norm; coeffs carry scale
    var = s ** 2
    explained = var[:k] / var.sum()
    return PoseDictionary(mean * scale_back, bases, skeleton.joint_names,
                          explained_variance=explained)


def _check_centralized_frame(coords, conf):
    wsum = conf.sum()
    if wsum <= 0:
        raise DataError("all joint confidences are zero")
    cent = coords @ conf / wsum
    scale = max(np.max(np.abs(coords)), 1.0)
    if np.linalg.norm(cent) > 1e-6 * scale:
        raise DataError("2D frame is not centralized")


def _weighted_reproj(coords, rows, pose, w):
    res = (coords - rows @ pose) * w
    return float(np.vdot(res, res))


def _solve_coeffs(coords, conf_w, rows, dictionary, lambda1, coeffs0, iters):
    """Lasso step: sparse coefficients for fixed camera and weights.

    Accelerated proximal gradient (soft-threshold prox) on the normal-
    equation form; the exact Lipschitz constant makes backtracking
    unnecessary. Momentum restarts whenever the objective would increase,
    so the returned coefficients never score worse than the warm start.
    """
    k = dictionary.n_bases
    proj_bases = np.einsum("ij,kjp->kip", rows, dictionary.bases)  # (k, 2, p)
    a = (proj_bases * conf_w[None, None, :]).reshape(k, -1).T  # (2p, k)
    b = ((coords - rows @ dictionary.mean) * conf_w).ravel()
    if lambda1 == 0:
        return np.linalg.lstsq(a, b, rcond=None)[0]
    ata = a.T @ a
    atb = a.T @ b
    lip = 2.0 * float(np.linalg.eigvalsh(ata)[-1])
    step = 1.0 / max(lip, 1e-300)
    thr = lambda1 * step

    def objective(c):
        return float(c @ (ata @ c) - 2.0 * (atb @ c)) + lambda1 * np.abs(c).sum()

    c = coeffs0.copy()
    c_prev = c
    obj = objective(c)
    t_k = 0
    for _ in range(iters):
        beta = (t_k - 1.0) / (t_k + 2.0) if t_k >= 1 else 0.0
        y = c + beta * (c - c_prev)
        z = y - step * 2.0 * (ata @ y - atb)
        c_new = np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)
        obj_new = objective(c_new)
        if obj_new > obj and beta != 0.0:  # overshoot: restart momentum
            t_k = 0
            z = c - step * 2.0 * (ata @ c - atb)
            c_new = np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)
            obj_new = objective(c_new)
        c_prev, c = c, c_new
        t_k += 1
        if abs(obj - obj_new) <= 1e-12 * max(1.0, abs(obj)):
            obj = min(obj, obj_new)
            break
        obj = min(obj, obj_new)
    return c


def _geman_mcclure(residual_norms):
    """Redescending weights sigma^2 / (sigma^2 + r^2), sigma = 1.5 * median r."""
    sigma = 1.5 * np.median(residual_norms)
    sigma = max(sigma, 1e-8 * max(residual_norms.max(), 1.0))
    return sigma ** 2 / (sigma ** 2 + residual_norms ** 2)


def _alternate(coords, dictionary, rows0, lambda1, weights,
               alt_iters, coeff_iters, coeffs0=None, stiefel_steps=12):
    """Coefficient/camera alternation at fixed robust weights.

    Returns (coeffs, camera rows, pose, objective trace); the traced
    weighted objective is nonincreasing.
    """
    rows = np.asarray(rows0, dtype=float)
    coeffs = np.zeros(dictionary.n_bases) if coeffs0 is None else coeffs0.copy()
    w = weights
    w2 = w ** 2
    trace = []
    pose = dictionary.compose(coeffs)
    for _ in range(alt_iters):
        coeffs = _solve_coeffs(coords, w, rows, dictionary, lambda1,
                               coeffs, coeff_iters)
        pose = dictionary.compose(coeffs)

        def f(r, pose=pose):
            return _weighted_reproj(coords, r, pose, w)

        def egrad(r, pose=pose):
            return 2.0 * ((r @ pose - coords) * w2) @ pose.T

        rows, _ = minimize_stiefel_rows(f, egrad, rows, max_steps=stiefel_steps)
        obj = (_weighted_reproj(coords, rows, pose, w)
               + lambda1 * np.abs(coeffs).sum())
        trace.append(obj)
        if len(trace) >= 2 and abs(trace[-2] - trace[-1]) <= 1e-9 * max(1.0, trace[-2]):
            break
    return coeffs, rows, pose, trace


def default_lambda1(coords, conf, dictionary, rows):
    """0.01 * largest singular value of the frame's weighted design matrix."""
    proj = np.einsum("ij,kjp->kip", rows, dictionary.bases)
    a = (proj * conf[None, None, :]).reshape(dictionary.n_bases, -1)
    return 0.01 * float(np.linalg.svd(a, compute_uv=False)[0])


def estimate_frame(frame, dictionary, lambda1=None, restarts=8,
                   reweight_rounds=3, alt_iters=10, coeff_iters=80,
                   screen_iters=2, keep_restarts=2):
    """Lift one centralized 2D frame to 3D against the dictionary.

    Minimizes |(W - R(mean + sum_i c_i B_i)) diag(w)|_F^2 + lambda1*|c|_1 by
    alternation, with Geman-McClure reweighting of per-joint residuals
    between rounds and a multi-start over equiangular azimuth rotations
    (cheap screening pass first, survivors run to convergence).
    """
    coords, conf = frame.coords, np.clip(frame.conf, 0.0, 1.0)
    if frame.n_joints != dictionary.n_joints:
        raise DataError(
            f"frame has {frame.n_joints} joints, dictionary {dictionary.n_joints}")
    _check_centralized_frame(coords, conf)
    if lambda1 is None:
        lambda1 = default_lambda1(coords, conf, dictionary, np.eye(3)[:2])

    restarts = max(restarts, 1)
    seeds = [_rot_y(2.0 * np.pi * a / restarts)[:2] for a in range(restarts)]
    if screen_iters > 0 and keep_restarts < restarts:
        screened = []
        for rows0 in seeds:
            coeffs, rows, _, trace = _alternate(
                coords, dictionary, rows0, lambda1, conf,
                screen_iters, coeff_iters)
            screened.append((trace[-1], rows, coeffs))
        screened.sort(key=lambda item: item[0])
        candidates = [(rows, coeffs)
                      for _, rows, coeffs in screened[:max(keep_restarts, 1)]]
    else:
        candidates = [(rows0, None) for rows0 in seeds]

    best = None
    for rows, coeffs in candidates:
        w = conf.copy()
        for _ in range(max(reweight_rounds, 1)):
            coeffs, rows, pose, trace = _alternate(
                coords, dictionary, rows, lambda1, w,
                alt_iters, coeff_iters, coeffs0=coeffs)
            residual = np.linalg.norm(coords - rows @ pose, axis=0)
            w = conf * _geman_mcclure(residual)
        obj = trace[-1]
        if best is None or obj < best.objective:
            best = FrameEstimate(Pose3D(pose), CameraMat(rows), coeffs,
                                 np.clip(w, 0.0, 1.0), float(obj))
    return best


def _flip(estimate):
    """Equal-objective mirrored solution (depth flip of camera and pose)."""
    return FrameEstimate(Pose3D(_DEPTH_FLIP @ estimate.S.coords),
                         CameraMat(estimate.R.rows @ _DEPTH_FLIP),
                         estimate.coeffs, estimate.weights, estimate.objective)


def initialize_sequence(seq, dictionary, cfg=None):
    """Per-frame lifting of a centralized 2D sequence.

    Frames are estimated independently (parallel map, deterministic
    output); the per-frame depth-flip ambiguity is resolved by picking the
    candidate whose pose is closest (Frobenius) to the previous frame's,
    a criterion that stays well conditioned where camera comparison does
    not (the flip leaves the camera rows unchanged at azimuths where the
    view axis has no lateral component).

    Returns (PoseSeq3D, CameraSeq, weights) with weights of shape (p, n).
    """
    cfg = cfg or InitConfig()
    if not seq.centralized:
        raise DataError("initialize_sequence requires a centralized sequence")
    if seq.n_joints != dictionary.n_joints:
        raise DataError(
            f"tracks have {seq.n_joints} joints, dictionary {dictionary.n_joints}")

    def solve(t):
        try:
            return estimate_frame(seq.frame(t), dictionary,
                                  lambda1=cfg.lambda1, restarts=cfg.restarts,
                                  reweight_rounds=cfg.reweight_rounds,
                                  alt_iters=cfg.alt_iters,
                                  coeff_iters=cfg.coeff_iters,
                                  screen_iters=cfg.screen_iters,
                                  keep_restarts=cfg.keep_restarts)
        except DataError as exc:
            raise DataError(f"frame {t}: {exc}") from exc

    n = seq.n_frames
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            estimates = list(pool.map(solve, range(n)))
    else:
        estimates = [solve(t) for t in range(n)]

    chosen = [estimates[0]]  # tie-breaking keeps the original candidate
    for t in range(1, n):
        cand = estimates[t]
        flipped = _flip(cand)
        prev = chosen[-1].S.coords
        if (np.linalg.norm(flipped.S.coords - prev)
                < np.linalg.norm(cand.S.coords - prev)):
            cand = flipped
        chosen.append(cand)

    poses = PoseSeq3D(np.stack([e.S.coords for e in chosen]), seq.fps)
    cams = CameraSeq(np.stack([e.R.rows for e in chosen]))
    weights = np.stack([e.weights for e in chosen], axis=1)  # (p, n)
    return poses, cams, weights
