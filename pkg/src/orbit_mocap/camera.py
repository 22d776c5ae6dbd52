"""Orthographic camera model and the virtual orbiting-camera synthesizer.

A camera is the first two rows of a world-to-camera rotation, i.e. a point
on the Stiefel manifold St(3,2). Projection of a centered 3D pose is then
just a matrix product; translation is removed by centralization and the
orthographic scale is absorbed into the reconstruction.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from .skeleton import Pose2D, PoseSeq2D, _frozen_array

STIEFEL_TOL = 1e-9


@dataclass(frozen=True)
class CameraMat:
    """2x3 row-orthonormal camera matrix (first two rotation rows)."""

    rows: np.ndarray

    def __post_init__(self):
        rows = _frozen_array(self.rows)
        if rows.shape != (2, 3):
            raise DataError(f"CameraMat must be (2, 3), got {rows.shape}")
        err = np.max(np.abs(rows @ rows.T - np.eye(2)))
        if not np.isfinite(err) or err > STIEFEL_TOL:
            raise DataError(f"camera rows not orthonormal (deviation {err:.3e})")
        object.__setattr__(self, "rows", rows)


@dataclass(frozen=True)
class CameraSeq:
    """Per-frame camera matrices, (n, 2, 3)."""

    rows: np.ndarray

    def __post_init__(self):
        rows = _frozen_array(self.rows)
        if rows.ndim != 3 or rows.shape[1:] != (2, 3) or rows.shape[0] < 1:
            raise DataError(f"CameraSeq must be (n, 2, 3), got {rows.shape}")
        gram = np.einsum("nik,njk->nij", rows, rows)
        err = np.max(np.abs(gram - np.eye(2)))
        if not np.isfinite(err) or err > STIEFEL_TOL:
            raise DataError(f"camera rows not orthonormal (max deviation {err:.3e})")
        object.__setattr__(self, "rows", rows)

    @property
    def n_frames(self):
        return self.rows.shape[0]

    def frame(self, t):
        return CameraMat(self.rows[t])


@dataclass(frozen=True)
class OrbitSpec:
    """Virtual orbiting-camera parameters for synthetic 2D tracks."""

    angular_velocity: float = 25.0  # deg/s about the world vertical axis
    fps: float = 24.0
    duration: float = 10.0  # seconds
    elevation: float = 0.0  # deg, fixed tilt
    noise_sigma: float = 0.0  # 2D units
    outlier_rate: float = 0.0
    outlier_magnitude: float = 0.0  # 2D units
    rng_seed: int = 0

    def __post_init__(self):
        if not self.fps > 0:
            raise DataError(f"fps must be positive, got {self.fps}")
        if not self.duration > 0:
            raise DataError(f"duration must be positive, got {self.duration}")
        if not 0 <= self.outlier_rate < 1:
            raise DataError(f"outlier_rate must be in [0, 1), got {self.outlier_rate}")
        if self.noise_sigma < 0 or self.outlier_magnitude < 0:
            raise DataError("noise_sigma and outlier_magnitude must be nonnegative")

    @property
    def n_frames(self):
        return int(round(self.fps * self.duration))


def _rot_y(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_x(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def project(camera, pose):
    """Orthographic projection W = R S of a centered pose; unit confidence."""
    return Pose2D(camera.rows @ pose.coords, np.ones(pose.n_joints))


def polar_rows(mat):
    """Closed-form polar factor of a full-row-rank 2x3 matrix.

    (M M^T)^{-1/2} M via the analytic 2x2 symmetric square root; falls back
    to SVD near rank deficiency. Returns a plain array (hot-path helper).
    """
    m = np.asarray(mat, dtype=float)
    g = m @ m.T
    a, b, c = g[0, 0], g[0, 1], g[1, 1]
    det = a * c - b * b
    tr = a + c
    if det <= 1e-24 * max(tr * tr, 1e-300) or not np.isfinite(det):
        u, s, vt = np.linalg.svd(m, full_matrices=False)
        if s[-1] <= 1e-12 * max(s[0], 1e-300):
            raise NumericalError("polar retraction of a rank-deficient matrix")
        return u @ vt
    s = np.sqrt(det)
    t = np.sqrt(tr + 2.0 * s)
    inv_sqrt = np.array([[c + s, -b], [-b, a + s]]) / (t * s)
    r = inv_sqrt @ m
    # one Newton-Schulz sweep keeps orthonormality at machine precision
    return 1.5 * r - 0.5 * (r @ r.T) @ r


def polar_retract(mat):
    """Nearest row-orthonormal matrix in Frobenius norm (polar factor)."""
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (2, 3):
        raise DataError(f"expected (2, 3) matrix, got {mat.shape}")
    return CameraMat(polar_rows(mat))


def orbit_cameras(spec):
    """Cameras of a constant-rate orbit about the world vertical (y) axis.

    Frame t has azimuth angular_velocity * t / fps composed with the fixed
    elevation tilt; each camera is the first two rotation rows.
    """
    tilt = _rot_x(np.deg2rad(spec.elevation))
    omega = np.deg2rad(spec.angular_velocity)
    frames = np.empty((spec.n_frames, 2, 3))
    for t in range(spec.n_frames):
        frames[t] = (tilt @ _rot_y(omega * t / spec.fps))[:2]
    return CameraSeq(frames)


def synthesize_tracks(gt, spec, return_outlier_mask=False):
    """Project ground-truth 3D poses through an orbiting camera.

    Poses are centered (3D centroid removed) before projection, then
    corrupted by isotropic Gaussian noise and, at rate outlier_rate, by
    uniform offsets of magnitude up to outlier_magnitude. Outliers keep
    confidence 1, as in real detector output. Deterministic under rng_seed.
    """
    n = spec.n_frames
    if gt.n_frames < n:
        raise DataError(
            f"ground truth has {gt.n_frames} frames, orbit needs {n}")
    if abs(gt.fps - spec.fps) > 1e-9:
        raise DataError(f"fps mismatch: ground truth {gt.fps}, orbit {spec.fps}")
    cams = orbit_cameras(spec)
    coords3 = gt.coords[:n]
    centered = coords3 - coords3.mean(axis=2, keepdims=True)
    tracks = np.einsum("nij,njp->nip", cams.rows, centered)

    rng = np.random.default_rng(spec.rng_seed)
    p = gt.n_joints
    if spec.noise_sigma > 0:
        tracks = tracks + rng.normal(0.0, spec.noise_sigma, size=tracks.shape)
    mask = np.zeros((n, p), dtype=bool)
    if spec.outlier_rate > 0:
        mask = rng.random((n, p)) < spec.outlier_rate
        direction = rng.normal(size=(n, 2, p))
        norm = np.linalg.norm(direction, axis=1, keepdims=True)
        direction = direction / np.maximum(norm, 1e-12)
        magnitude = rng.random((n, 1, p)) * spec.outlier_magnitude
        tracks = np.where(mask[:, None, :], tracks + direction * magnitude, tracks)
    seq = PoseSeq2D(tracks, np.ones((n, p)), fps=spec.fps)
    if return_outlier_mask:
        return seq, cams, mask
    return seq, cams


def complete_rotation(rows):
    """Extend a 2x3 row-orthonormal matrix to the full rotation (det +1)."""
    rows = np.asarray(rows, dtype=float)
    return np.vstack([rows, np.cross(rows[0], rows[1])])


def geodesic_distance(rows_a, rows_b):
    """Geodesic angle (radians) between the completed rotations of two cameras."""
    qa = complete_rotation(rows_a)
    qb = complete_rotation(rows_b)
    cos = (np.trace(qa.T @ qb) - 1.0) / 2.0
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))
