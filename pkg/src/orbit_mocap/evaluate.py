"""Procrustes-aligned reconstruction error and the camera-speed sweep.

The error metric is the mean per-joint Euclidean distance between an
estimate and ground truth after a closed-form least-squares similarity
alignment (rotation, isotropic scale, translation; reflection excluded by
default).
"""

from dataclasses import dataclass, replace

import numpy as np

from . import bundle
from .camera import OrbitSpec, synthesize_tracks
from .errors import DataError
from .posedict import InitConfig, initialize_sequence
from .skeleton import Pose3D, centralize

METHOD_INITIAL = "Initial"
METHOD_BA = "BA"
METHOD_BA_NO_ART = "BA-no-art"


@dataclass(frozen=True)
class SimilarityTransform:
    """x -> scale * rotation @ x + translation."""

    rotation: np.ndarray  # (3, 3)
    scale: float
    translation: np.ndarray  # (3,)

    def apply(self, coords):
        return self.scale * self.rotation @ coords + self.translation[:, None]


@dataclass(frozen=True)
class ErrorReport:
    per_frame: np.ndarray  # (n,) mm
    per_joint: np.ndarray  # mm, one entry per evaluated joint
    joints: np.ndarray  # evaluated joint indices
    mean: float
    sequence_id: str = ""


@dataclass(frozen=True)
class SweepResult:
    """Aggregated and per-sequence mean errors of the velocity sweep."""

    rows: tuple  # (velocity, method, mean error mm), averaged over sequences
    details: tuple  # (sequence_id, velocity, method, mean error mm)


def procrustes_align(est, gt, allow_reflection=False):
    """Least-squares similarity aligning `est` onto `gt` (Umeyama).

    Returns (transform, aligned estimate). Reflections are rejected unless
    allowed; degenerate ground truth (zero variance) is an error.
    """
    x = est.coords if isinstance(est, Pose3D) else np.asarray(est, dtype=float)
    y = gt.coords if isinstance(gt, Pose3D) else np.asarray(gt, dtype=float)
    if x.shape != y.shape:
        raise DataError(f"pose shapes differ: {x.shape} vs {y.shape}")
    p = x.shape[1]
    mu_x = x.mean(axis=1)
    mu_y = y.mean(axis=1)
    xc = x - mu_x[:, None]
    yc = y - mu_y[:, None]
    var_x = np.vdot(xc, xc) / p
    if np.vdot(yc, yc) / p <= 1e-300:
        raise DataError("degenerate ground truth: all joints coincident")
    if var_x <= 1e-300:
        raise DataError("degenerate estimate: all joints coincident")
    cov = yc @ xc.T / p
    u, s, vt = np.linalg.svd(cov)
    d = np.ones(3)
    if not allow_reflection and np.linalg.det(u @ vt) < 0:
        d[-1] = -1.0
    rot = (u * d) @ vt
    scale = float(s @ d) / var_x
    trans = mu_y - scale * rot @ mu_x
    tf = SimilarityTransform(rot, scale, trans)
    return tf, Pose3D(tf.apply(x))


def reconstruction_error(est, gt, joints=None, allow_reflection=False,
                         sequence_id=""):
    """Per-frame Procrustes alignment followed by mean joint distances.

    `joints` selects the evaluated subset (default: all); alignment is
    computed on the selected joints only, matching the error definition.
    """
    if est.n_frames != gt.n_frames:
        raise DataError(
            f"frame count mismatch: est {est.n_frames}, gt {gt.n_frames}")
    if est.n_joints != gt.n_joints:
        raise DataError(
            f"joint count mismatch: est {est.n_joints}, gt {gt.n_joints}")
    joints = (np.arange(est.n_joints) if joints is None
              else np.asarray(joints, dtype=int))
    n = est.n_frames
    dists = np.empty((n, joints.size))
    for t in range(n):
        e = est.coords[t][:, joints]
        g = gt.coords[t][:, joints]
        _, aligned = procrustes_align(e, g, allow_reflection=allow_reflection)
        dists[t] = np.linalg.norm(aligned.coords - g, axis=0)
    per_frame = dists.mean(axis=1)
    return ErrorReport(per_frame=per_frame, per_joint=dists.mean(axis=0),
                       joints=joints, mean=float(per_frame.mean()),
                       sequence_id=sequence_id)


@dataclass(frozen=True)
class SweepConfig:
    """Everything the velocity sweep needs besides the data."""

    skeleton: object
    orbit: OrbitSpec = OrbitSpec()
    init: InitConfig = InitConfig()
    ba: bundle.BAConfig = bundle.BAConfig()
    joints: np.ndarray = None
    carry_weights: bool = True
    allow_reflection: bool = False


DEFAULT_VELOCITIES = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0)


def run_sweep(gt_sequences, velocities, dictionary, cfg):
    """Synthesize, reconstruct and score every (sequence, velocity) cell.

    For each cell the Initial, BA (articulated) and BA-no-art methods are
    evaluated; results are deterministic given the orbit seed.
    """
    if not gt_sequences or not len(list(velocities)):
        raise DataError("run_sweep needs at least one sequence and one velocity")
    details = []
    for v in velocities:
        for si, gt in enumerate(gt_sequences):
            sid = f"seq{si}"
            try:
                details.extend(_sweep_cell(gt, v, sid, dictionary, cfg))
            except DataError as exc:
                raise DataError(f"sequence {sid}, velocity {v}: {exc}") from exc
    rows = []
    for v in velocities:
        for method in (METHOD_INITIAL, METHOD_BA, METHOD_BA_NO_ART):
            errs = [e for (_, dv, m, e) in details if dv == v and m == method]
            rows.append((float(v), method, float(np.mean(errs))))
    return SweepResult(rows=tuple(rows), details=tuple(details))


def _sweep_cell(gt, velocity, sequence_id, dictionary, cfg):
    spec = replace(cfg.orbit, angular_velocity=float(velocity))
    tracks, _ = synthesize_tracks(gt, spec)
    tracks = centralize(tracks)
    gt_cut = type(gt)(gt.coords[:spec.n_frames], gt.fps)

    init_S, init_R, weights = initialize_sequence(tracks, dictionary, cfg.init)
    out = [(sequence_id, float(velocity), METHOD_INITIAL,
            reconstruction_error(init_S, gt_cut, cfg.joints,
                                 cfg.allow_reflection, sequence_id).mean)]
    ba_cfg = cfg.ba
    if cfg.carry_weights:
        ba_cfg = replace(ba_cfg, joint_weights=weights)
    for method, gamma in ((METHOD_BA, ba_cfg.gamma), (METHOD_BA_NO_ART, 0.0)):
        state = bundle.solve(tracks, init_S, init_R, cfg.skeleton,
                             replace(ba_cfg, gamma=gamma))
        err = reconstruction_error(state.S, gt_cut, cfg.joints,
                                   cfg.allow_reflection, sequence_id)
        out.append((sequence_id, float(velocity), method, err.mean))
    return out
