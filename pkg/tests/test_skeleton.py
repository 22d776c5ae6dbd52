"""Body model, pose containers and the squared limb-length map."""

import numpy as np
import pytest

from orbit_mocap.errors import DataError
from orbit_mocap.skeleton import (EVAL_JOINT_NAMES, Pose2D, Pose3D, PoseSeq2D,
                                  PoseSeq3D, Skeleton, centralize,
                                  default_skeleton, eval_joint_indices,
                                  limb_lengths_sq, limb_lengths_sq_grad)


def test_default_skeleton_shape():
    sk = default_skeleton()
    assert sk.n_joints == 15
    assert sk.n_edges == 14
    assert len(set(sk.joint_names)) == 15


def test_skeleton_canonicalizes_edges():
    sk = Skeleton(["a", "b", "c"], [(1, 0), (2, 1)])
    assert sk.edges == ((0, 1), (1, 2))


def test_skeleton_rejects_bad_graphs():
    with pytest.raises(DataError):
        Skeleton(["a", "b"], [(0, 0)])  # self edge
    with pytest.raises(DataError):
        Skeleton(["a", "b"], [(0, 1), (1, 0)])  # duplicate after canon
    with pytest.raises(DataError):
        Skeleton(["a", "b", "c"], [(0, 1)])  # c unreachable
    with pytest.raises(DataError):
        Skeleton(["a", "b"], [(0, 2)])  # out of range
    with pytest.raises(DataError):
        Skeleton(["a"], [])


def test_pose_containers_validate():
    with pytest.raises(DataError):
        Pose3D(np.zeros((2, 5)))
    with pytest.raises(DataError):
        Pose3D(np.full((3, 5), np.nan))
    with pytest.raises(DataError):
        Pose2D(np.zeros((2, 5)), conf=-np.ones(5))
    with pytest.raises(DataError):
        PoseSeq3D(np.zeros((4, 3, 5)), fps=0.0)
    with pytest.raises(DataError):
        PoseSeq2D(np.zeros((4, 2, 5)), conf=np.zeros((4, 4)))


def test_pose_arrays_are_read_only():
    pose = Pose3D(np.zeros((3, 5)))
    with pytest.raises(ValueError):
        pose.coords[0, 0] = 1.0


def test_eval_joint_indices():
    sk = default_skeleton()
    idx = eval_joint_indices(sk)
    assert idx.size == 12
    assert [sk.joint_names[i] for i in idx] == list(EVAL_JOINT_NAMES)
    # pelvis, neck, head excluded
    assert 0 not in idx and 1 not in idx and 2 not in idx
    # skeleton without the standard names falls back to all joints
    other = Skeleton(["j0", "j1", "j2"], [(0, 1), (1, 2)])
    assert eval_joint_indices(other).tolist() == [0, 1, 2]


def test_centralize_weighted_centroid_oracle():
    rng = np.random.default_rng(0)
    coords = rng.normal(size=(6, 2, 15)) * 100 + 40
    conf = rng.uniform(0.1, 1.0, size=(6, 15))
    seq = centralize(PoseSeq2D(coords, conf, fps=24.0))
    assert seq.centralized
    for t in range(6):
        cent = seq.coords[t] @ seq.conf[t] / seq.conf[t].sum()
        assert np.linalg.norm(cent) < 1e-9
        # removed centroid is retained and reverses the shift
        orig = seq.coords[t] + seq.centroids[t][:, None]
        assert np.allclose(orig, coords[t])


def test_centralize_idempotent():
    rng = np.random.default_rng(1)
    seq = PoseSeq2D(rng.normal(size=(3, 2, 15)), fps=24.0)
    once = centralize(seq)
    twice = centralize(once)
    assert np.allclose(once.coords, twice.coords)
    assert np.allclose(once.centroids, twice.centroids)


def test_centralize_rejects_zero_confidence_frame():
    conf = np.ones((3, 15))
    conf[1] = 0.0
    with pytest.raises(DataError, match="frame 1"):
        centralize(PoseSeq2D(np.zeros((3, 2, 15)), conf))


def test_limb_lengths_sq_matches_bruteforce():
    sk = default_skeleton()
    rng = np.random.default_rng(2)
    coords = rng.normal(size=(7, 3, 15)) * 300
    ell = limb_lengths_sq(PoseSeq3D(coords, 24.0), sk)
    assert ell.shape == (sk.n_edges, 7)
    for t in range(7):
        for e, (i, j) in enumerate(sk.edges):
            d = coords[t, :, i] - coords[t, :, j]
            assert ell[e, t] == pytest.approx(d @ d, rel=1e-12)


def test_limb_lengths_sq_grad_finite_difference():
    sk = default_skeleton()
    rng = np.random.default_rng(3)
    pose = rng.normal(size=(3, 15)) * 200
    residual = rng.normal(size=sk.n_edges)

    def scalar(x):
        ell = limb_lengths_sq(x[None], sk)[:, 0]
        return float(residual @ ell)

    grad = limb_lengths_sq_grad(pose, sk, residual)
    h = 1e-6
    for i in range(3):
        for j in range(15):
            e = np.zeros_like(pose)
            e[i, j] = h
            num = (scalar(pose + e) - scalar(pose - e)) / (2 * h)
            assert grad[i, j] == pytest.approx(num, abs=1e-4)


def test_limb_lengths_sq_grad_shared_joint_accumulates():
    # neck (joint 1) touches 4 edges in the default body; a duplicated-index
    # bug would drop contributions there
    sk = default_skeleton()
    degree = sum(1 for i, j in sk.edges if 1 in (i, j))
    assert degree == 4
    pose = np.zeros((3, 15))
    pose[0] = np.arange(15.0)
    grad = limb_lengths_sq_grad(pose, sk, np.ones(sk.n_edges))
    expect = sum(2.0 * (pose[:, 1] - pose[:, j]) for i, j in sk.edges if i == 1)
    expect = expect + sum(2.0 * (pose[:, 1] - pose[:, i])
                          for i, j in sk.edges if j == 1)
    assert np.allclose(grad[:, 1], expect)
