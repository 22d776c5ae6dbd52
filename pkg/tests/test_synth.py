"""Synthetic articulated sequences with a planted low-rank subspace."""

import numpy as np
import pytest

from orbit_mocap.errors import DataError
from orbit_mocap.skeleton import PoseSeq3D, default_skeleton, limb_lengths_sq
from orbit_mocap.synth import (fk_corpus, planted_corpus, planted_sequence,
                               rest_pose)


def test_rest_pose_is_plausible():
    rest = rest_pose()
    assert rest.shape == (3, 15)
    height = rest[1].max() - rest[1].min()
    assert 1500 < height < 1900  # mm
    # left/right mirror symmetry in x
    sk = default_skeleton()
    li = sk.joint_names.index("l_wrist")
    ri = sk.joint_names.index("r_wrist")
    assert rest[0, li] == -rest[0, ri]


def test_planted_sequence_exact_rank():
    ps = planted_sequence(120, rank=10, seed=0)
    x = ps.seq.coords.reshape(120, -1)
    s = np.linalg.svd(x - x.mean(axis=0), compute_uv=False)
    rank = np.sum(s > s[0] * 1e-9)
    assert rank <= 9  # mean removed: at most rank-1 modes remain
    # and the full stacked shape matrix has rank <= 10
    s2 = np.linalg.svd(x, compute_uv=False)
    assert np.sum(s2 > s2[0] * 1e-9) <= 10


def test_planted_sequence_limb_lengths_near_constant():
    sk = default_skeleton()
    ps = planted_sequence(120, rank=10, seed=1)
    ell = np.sqrt(limb_lengths_sq(ps.seq, sk))
    spread = (ell.max(axis=1) - ell.min(axis=1)) / ell.mean(axis=1)
    assert spread.max() < 0.01  # rank truncation perturbs lengths < 1%


def test_planted_sequence_moves():
    ps = planted_sequence(60, rank=8, seed=2)
    step = np.linalg.norm(np.diff(ps.seq.coords, axis=0), axis=1)
    assert step.max() > 1.0  # actual motion, in mm


def test_planted_sequence_deterministic():
    a = planted_sequence(30, rank=6, seed=5)
    b = planted_sequence(30, rank=6, seed=5)
    assert np.array_equal(a.seq.coords, b.seq.coords)
    c = planted_sequence(30, rank=6, seed=6)
    assert not np.array_equal(a.seq.coords, c.seq.coords)


def test_planted_sequence_validates_rank():
    with pytest.raises(DataError):
        planted_sequence(30, rank=1)


def test_planted_corpus_spans_planted_subspace():
    ps = planted_sequence(100, rank=10, seed=3)
    corpus = planted_corpus(ps, 50, seed=4)
    assert len(corpus) == 50
    basis = ps.bases.reshape(ps.bases.shape[0], -1)
    for pose in corpus[:10]:
        resid = pose.coords.ravel() - ps.mean.ravel()
        # residual lies in the span of the planted bases
        proj = basis.T @ (basis @ resid)
        assert np.linalg.norm(resid - proj) < 1e-9 * max(np.linalg.norm(resid), 1)


def test_fk_corpus_preserves_limb_lengths():
    sk = default_skeleton()
    poses = fk_corpus(20, seed=0)
    rest = np.sqrt(limb_lengths_sq(rest_pose()[None], sk))[:, 0]
    for pose in poses:
        ell = np.sqrt(limb_lengths_sq(pose.coords[None], sk))[:, 0]
        assert np.allclose(ell, rest, rtol=1e-9)
    seq = PoseSeq3D(np.stack([p.coords for p in poses]), 24.0)
    assert np.std(seq.coords) > 10.0  # poses actually vary
