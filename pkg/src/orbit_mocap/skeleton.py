"""Articulated body model, pose containers and the squared limb-length map.

Poses are stored joint-per-column: a 3D pose is a (3, p) array in
millimeters, a 2D pose a (2, p) array in arbitrary-but-consistent units.
Sequences stack frames along the leading axis. All containers are frozen
value objects backed by read-only arrays, so they can be shared freely
between threads.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


def _frozen_array(x, dtype=float):
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Skeleton:
    """Joint names plus the limb edge list the length map is defined over."""

    joint_names: tuple
    edges: tuple

    def __init__(self, joint_names, edges):
        names = tuple(str(n) for n in joint_names)
        p = len(names)
        if p < 2:
            raise DataError("skeleton needs at least 2 joints")
        canon = []
        seen = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise DataError(f"self-edge on joint {i}")
            if not (0 <= i < p and 0 <= j < p):
                raise DataError(f"edge ({i},{j}) out of range for {p} joints")
            if i > j:
                i, j = j, i
            if (i, j) in seen:
                raise DataError(f"duplicate edge ({i},{j})")
            seen.add((i, j))
            canon.append((i, j))
        if not canon:
            raise DataError("skeleton needs at least 1 edge")
        # connectivity: every joint reachable through limbs
        adj = {k: set() for k in range(p)}
        for i, j in canon:
            adj[i].add(j)
            adj[j].add(i)
        stack, reached = [0], {0}
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in reached:
                    reached.add(nb)
                    stack.append(nb)
        if len(reached) != p:
            missing = sorted(set(range(p)) - reached)
            raise DataError(f"edge graph not connected; unreachable joints {missing}")
        object.__setattr__(self, "joint_names", names)
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def n_joints(self):
        return len(self.joint_names)

    @property
    def n_edges(self):
        return len(self.edges)

    def edge_array(self):
        return np.array(self.edges, dtype=int)


@dataclass(frozen=True)
class Pose3D:
    """Single-frame 3D pose, (3, p) in millimeters."""

    coords: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.coords)
        if arr.ndim != 2 or arr.shape[0] != 3:
            raise DataError(f"Pose3D coords must be (3, p), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("Pose3D coords contain non-finite values")
        object.__setattr__(self, "coords", arr)

    @property
    def n_joints(self):
        return self.coords.shape[1]


@dataclass(frozen=True)
class PoseSeq3D:
    """3D pose sequence, (n, 3, p) stacked frames plus frame rate."""

    coords: np.ndarray
    fps: float = 24.0

    def __post_init__(self):
        arr = _frozen_array(self.coords)
        if arr.ndim != 3 or arr.shape[1] != 3 or arr.shape[0] < 1:
            raise DataError(f"PoseSeq3D coords must be (n, 3, p), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("PoseSeq3D coords contain non-finite values")
        if not self.fps > 0:
            raise DataError(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "coords", arr)
        object.__setattr__(self, "fps", float(self.fps))

    @property
    def n_frames(self):
        return self.coords.shape[0]

    @property
    def n_joints(self):
        return self.coords.shape[2]

    def frame(self, t):
        return Pose3D(self.coords[t])

    @classmethod
    def from_frames(cls, frames, fps=24.0):
        return cls(np.stack([f.coords for f in frames]), fps)


@dataclass(frozen=True)
class Pose2D:
    """Single-frame 2D pose, (2, p) coordinates with per-joint confidences."""

    coords: np.ndarray
    conf: np.ndarray = None

    def __post_init__(self):
        arr = _frozen_array(self.coords)
        if arr.ndim != 2 or arr.shape[0] != 2:
            raise DataError(f"Pose2D coords must be (2, p), got {arr.shape}")
        conf = self.conf
        if conf is None:
            conf = np.ones(arr.shape[1])
        conf = _frozen_array(conf)
        if conf.shape != (arr.shape[1],):
            raise DataError(f"Pose2D conf must be (p,), got {conf.shape}")
        if not (np.all(np.isfinite(arr)) and np.all(np.isfinite(conf))):
            raise DataError("Pose2D contains non-finite values")
        if np.any(conf < 0):
            raise DataError("Pose2D conf must be nonnegative")
        object.__setattr__(self, "coords", arr)
        object.__setattr__(self, "conf", conf)

    @property
    def n_joints(self):
        return self.coords.shape[1]


@dataclass(frozen=True)
class PoseSeq2D:
    """2D track sequence: (n, 2, p) coordinates, (n, p) confidences.

    `centralized` marks that each frame had its confidence-weighted centroid
    removed; the removed centroids are kept for round-tripping.
    """

    coords: np.ndarray
    conf: np.ndarray = None
    fps: float = 24.0
    centralized: bool = False
    centroids: np.ndarray = field(default=None)

    def __post_init__(self):
        arr = _frozen_array(self.coords)
        if arr.ndim != 3 or arr.shape[1] != 2 or arr.shape[0] < 1:
            raise DataError(f"PoseSeq2D coords must be (n, 2, p), got {arr.shape}")
        n, _, p = arr.shape
        conf = self.conf
        if conf is None:
            conf = np.ones((n, p))
        conf = _frozen_array(conf)
        if conf.shape != (n, p):
            raise DataError(f"PoseSeq2D conf must be (n, p), got {conf.shape}")
        if not (np.all(np.isfinite(arr)) and np.all(np.isfinite(conf))):
            raise DataError("PoseSeq2D contains non-finite values")
        if np.any(conf < 0):
            raise DataError("PoseSeq2D conf must be nonnegative")
        if not self.fps > 0:
            raise DataError(f"fps must be positive, got {self.fps}")
        centroids = self.centroids
        if centroids is not None:
            centroids = _frozen_array(centroids)
            if centroids.shape != (n, 2):
                raise DataError(f"centroids must be (n, 2), got {centroids.shape}")
        if self.centralized:
            scale = max(np.max(np.abs(arr)), 1.0)
            wsum = conf.sum(axis=1)
            cent = np.einsum("nip,np->ni", arr, conf) / np.maximum(wsum, 1e-300)[:, None]
            if np.max(np.linalg.norm(cent, axis=1)) > 1e-6 * scale:
                raise DataError("centralized flag set but weighted centroids are nonzero")
        object.__setattr__(self, "coords", arr)
        object.__setattr__(self, "conf", conf)
        object.__setattr__(self, "fps", float(self.fps))
        object.__setattr__(self, "centroids", centroids)

    @property
    def n_frames(self):
        return self.coords.shape[0]

    @property
    def n_joints(self):
        return self.coords.shape[2]

    def frame(self, t):
        return Pose2D(self.coords[t], self.conf[t])


# Default 15-joint body model. Torso chain pelvis-neck-head plus two
# 3-segment arms and legs; 14 limbs total.
_DEFAULT_JOINTS = (
    "pelvis", "neck", "head",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_hip", "l_knee", "l_ankle",
    "r_hip", "r_knee", "r_ankle",
)
_DEFAULT_EDGES = (
    (0, 1), (1, 2),
    (1, 3), (3, 4), (4, 5),
    (1, 6), (6, 7), (7, 8),
    (0, 9), (9, 10), (10, 11),
    (0, 12), (12, 13), (13, 14),
)

# Joints scored in error reports: wrists, elbows, shoulders, hips, knees,
# ankles (12 joints).
EVAL_JOINT_NAMES = (
    "l_wrist", "r_wrist", "l_elbow", "r_elbow", "l_shoulder", "r_shoulder",
    "l_hip", "r_hip", "l_knee", "r_knee", "l_ankle", "r_ankle",
)


def default_skeleton():
    return Skeleton(_DEFAULT_JOINTS, _DEFAULT_EDGES)


def eval_joint_indices(skeleton):
    """Indices of the standard 12-joint evaluation set, by name lookup.

    Joints missing from the skeleton are skipped; returns all joints if
    none of the standard names are present.
    """
    idx = [skeleton.joint_names.index(n) for n in EVAL_JOINT_NAMES
           if n in skeleton.joint_names]
    return np.array(idx if idx else range(skeleton.n_joints), dtype=int)


def centralize(seq):
    """Subtract each frame's confidence-weighted centroid from every joint.

    Idempotent; the removed centroids are stored on the result so the
    original coordinates can be recovered.
    """
    wsum = seq.conf.sum(axis=1)
    bad = np.nonzero(wsum <= 0)[0]
    if bad.size:
        raise DataError(f"frame {bad[0]}: all joint confidences are zero")
    cent = np.einsum("nip,np->ni", seq.coords, seq.conf) / wsum[:, None]
    coords = seq.coords - cent[:, :, None]
    prev = seq.centroids if seq.centroids is not None else np.zeros((seq.n_frames, 2))
    return PoseSeq2D(coords, seq.conf, seq.fps, centralized=True,
                     centroids=prev + cent)


def limb_lengths_sq(seq, skeleton):
    """Squared limb lengths, (m, n): entry (e, t) is |S_t[:,i] - S_t[:,j]|^2."""
    coords = seq.coords if isinstance(seq, PoseSeq3D) else np.asarray(seq, dtype=float)
    if coords.ndim == 2:
        coords = coords[None]
    if coords.shape[2] != skeleton.n_joints:
        raise DataError(
            f"pose has {coords.shape[2]} joints, skeleton has {skeleton.n_joints}")
    e = skeleton.edge_array()
    diff = coords[:, :, e[:, 0]] - coords[:, :, e[:, 1]]  # (n, 3, m)
    return np.einsum("nim,nim->nm", diff, diff).T


def limb_lengths_sq_grad(pose, skeleton, residual):
    """Gradient of sum_e residual_e * ell_e(S) with respect to the (3, p) pose.

    Per edge (i, j): +2*r*(s_i - s_j) accumulated at column i, the negative
    at column j. Zero-length limbs contribute a zero gradient (the squared
    map stays smooth there).
    """
    coords = pose.coords if isinstance(pose, Pose3D) else np.asarray(pose, dtype=float)
    if coords.shape != (3, skeleton.n_joints):
        raise DataError(f"pose shape {coords.shape} does not match skeleton")
    residual = np.asarray(residual, dtype=float)
    if residual.shape != (skeleton.n_edges,):
        raise DataError(
            f"residual must have one entry per edge ({skeleton.n_edges}), "
            f"got {residual.shape}")
    e = skeleton.edge_array()
    diff = coords[:, e[:, 0]] - coords[:, e[:, 1]]  # (3, m)
    contrib = 2.0 * residual[None, :] * diff
    grad = np.zeros_like(coords)
    np.add.at(grad.T, e[:, 0], contrib.T)
    np.subtract.at(grad.T, e[:, 1], contrib.T)
    return grad
