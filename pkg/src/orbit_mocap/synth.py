"""Synthetic articulated motion with a planted low-rank structure.

Sequences are produced by forward kinematics on the default body model
(per-limb rotation angles driven by a few shared harmonics, so limb
lengths are exactly constant), then truncated to a planted rank-r
subspace of the stacked shape matrix. The truncation error is tiny, so
the result is simultaneously low-rank and near-perfectly articulated,
which is the regime the reconstruction pipeline targets.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .skeleton import Pose3D, PoseSeq3D, _frozen_array, default_skeleton

# Rest pose for the default 15-joint skeleton, millimeters, y-up,
# subject height ~1700 mm, slightly non-planar.
_REST = {
    "pelvis": (0, 1000, 0),
    "neck": (0, 1450, 0),
    "head": (0, 1650, 30),
    "l_shoulder": (180, 1420, 0),
    "l_elbow": (330, 1180, 60),
    "l_wrist": (400, 950, 120),
    "r_shoulder": (-180, 1420, 0),
    "r_elbow": (-330, 1180, 60),
    "r_wrist": (-400, 950, 120),
    "l_hip": (90, 980, 0),
    "l_knee": (100, 520, 40),
    "l_ankle": (110, 80, 0),
    "r_hip": (-90, 980, 0),
    "r_knee": (-100, 520, 40),
    "r_ankle": (-110, 80, 0),
}


def rest_pose(skeleton=None):
    """Rest-pose coordinates (3, p) for the default joint names."""
    skeleton = skeleton or default_skeleton()
    try:
        cols = [_REST[name] for name in skeleton.joint_names]
    except KeyError as exc:
        raise DataError(f"no rest-pose entry for joint {exc}") from exc
    return np.array(cols, dtype=float).T


def _parent_order(skeleton, root=0):
    """BFS edge order (parent, child) turning the limb graph into a tree."""
    adj = {k: [] for k in range(skeleton.n_joints)}
    for i, j in skeleton.edges:
        adj[i].append(j)
        adj[j].append(i)
    order, seen, queue = [], {root}, [root]
    while queue:
        node = queue.pop(0)
        for nb in sorted(adj[node]):
            if nb not in seen:
                seen.add(nb)
                order.append((node, nb))
                queue.append(nb)
    return order


def _axis_angle(axis, angle):
    axis = axis / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def _fk_pose(rest, tree, axes, angles):
    """Forward kinematics: rotate each limb about its own random axis,
    accumulating rotations down the tree. Limb lengths are preserved."""
    pose = rest.copy()
    acc = [np.eye(3)] * rest.shape[1]
    for e, (parent, child) in enumerate(tree):
        rot = acc[parent] @ _axis_angle(axes[e], angles[e])
        acc[child] = rot
        pose[:, child] = pose[:, parent] + rot @ (rest[:, child] - rest[:, parent])
    return pose


@dataclass(frozen=True)
class PlantedSequence:
    """Ground-truth sequence plus the planted affine subspace it lies in."""

    seq: PoseSeq3D
    mean: np.ndarray  # (3, p)
    bases: np.ndarray  # (r-1, 3, p), orthonormal directions
    coeffs: np.ndarray  # (n, r-1)

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen_array(self.mean))
        object.__setattr__(self, "bases", _frozen_array(self.bases))
        object.__setattr__(self, "coeffs", _frozen_array(self.coeffs))


def _renorm_limbs(coords, tree, lengths):
    """Rescale every limb to its target length, walking the tree root-down.

    coords is (n, 3, p); the operation preserves each limb's direction, so
    poses move very little while becoming exactly articulated.
    """
    out = coords.copy()
    for e, (parent, child) in enumerate(tree):
        d = out[:, :, child] - out[:, :, parent]
        norm = np.linalg.norm(d, axis=1, keepdims=True)
        out[:, :, child] = out[:, :, parent] + d * (lengths[e] / norm)
    return out


def _truncate_rank(coords, rank):
    """Project the stacked sequence onto its top-(rank-1) modes plus mean."""
    n = coords.shape[0]
    flat = coords.reshape(n, -1)
    mean = flat.mean(axis=0)
    u, s, vt = np.linalg.svd(flat - mean, full_matrices=False)
    r = min(rank - 1, s.size)
    coeffs = u[:, :r] * s[:r]
    return (mean + coeffs @ vt[:r]).reshape(coords.shape), mean, vt[:r], coeffs


def planted_sequence(n_frames, fps=24.0, rank=10, amplitude=0.35,
                     harmonics=3, seed=0, skeleton=None, refine_iters=200):
    """Random articulated motion living in a rank-`rank` shape subspace.

    Per-limb rotation angles mix `harmonics` shared sinusoids; the FK
    sequence is then pushed onto the intersection of the rank-`rank`
    constraint and the constant-limb-length constraint by alternating
    projections (`refine_iters` rounds, ending with the rank projection so
    the planted rank is exact and the residual limb wobble is tiny).
    Deterministic under `seed`.
    """
    skeleton = skeleton or default_skeleton()
    if rank < 2:
        raise DataError("rank must be >= 2 (mean plus at least one mode)")
    rng = np.random.default_rng(seed)
    rest = rest_pose(skeleton)
    tree = _parent_order(skeleton)
    m = len(tree)
    axes = rng.normal(size=(m, 3))
    mixing = rng.normal(scale=amplitude / np.sqrt(harmonics), size=(m, harmonics))
    freqs = rng.uniform(0.5, 2.0, size=harmonics)
    phases = rng.uniform(0, 2 * np.pi, size=harmonics)
    t = np.arange(n_frames) / n_frames
    drivers = np.sin(2 * np.pi * freqs[None, :] * t[:, None] + phases[None, :])
    angles = drivers @ mixing.T  # (n, m)

    coords = np.stack([_fk_pose(rest, tree, axes, angles[i])
                       for i in range(n_frames)])
    lengths = np.array([np.linalg.norm(rest[:, c] - rest[:, p_])
                        for p_, c in tree])
    coords, mean, bases, coeffs = _truncate_rank(coords, rank)
    for _ in range(max(refine_iters, 0)):
        coords = _renorm_limbs(coords, tree, lengths)
        coords, mean, bases, coeffs = _truncate_rank(coords, rank)
    p = skeleton.n_joints
    r = bases.shape[0]
    return PlantedSequence(
        seq=PoseSeq3D(coords, fps),
        mean=mean.reshape(3, p),
        bases=bases.reshape(r, 3, p),
        coeffs=coeffs,
    )


def planted_corpus(planted, n_poses, seed=0, coeff_scale=1.0):
    """Poses sampled from a planted subspace, for dictionary learning.

    Coefficients are Gaussian with per-mode scales matching the sequence's
    own coefficient spread (times coeff_scale).
    """
    rng = np.random.default_rng(seed)
    scales = planted.coeffs.std(axis=0) * coeff_scale
    coeffs = rng.normal(size=(n_poses, scales.size)) * scales
    p = planted.mean.shape[1]
    poses = planted.mean.reshape(-1) + coeffs @ planted.bases.reshape(len(scales), -1)
    return [Pose3D(x.reshape(3, p)) for x in poses]


def fk_corpus(n_poses, amplitude=0.35, seed=0, skeleton=None):
    """Independent forward-kinematics poses (full articulated variability),
    for learning generic cross-sequence dictionaries."""
    skeleton = skeleton or default_skeleton()
    rng = np.random.default_rng(seed)
    rest = rest_pose(skeleton)
    tree = _parent_order(skeleton)
    m = len(tree)
    poses = []
    for _ in range(n_poses):
        axes = rng.normal(size=(m, 3))
        angles = rng.normal(scale=amplitude, size=m)
        poses.append(Pose3D(_fk_pose(rest, tree, axes, angles)))
    return poses
