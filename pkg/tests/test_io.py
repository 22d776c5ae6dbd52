"""File formats: round trips, byte determinism and malformed inputs."""

import json

import numpy as np
import pytest

from orbit_mocap import io
from orbit_mocap.camera import OrbitSpec, orbit_cameras
from orbit_mocap.errors import DataError
from orbit_mocap.evaluate import ErrorReport, SweepResult
from orbit_mocap.posedict import PoseDictionary
from orbit_mocap.skeleton import PoseSeq2D, PoseSeq3D, default_skeleton


def test_skeleton_roundtrip(tmp_path):
    sk = default_skeleton()
    path = tmp_path / "skeleton.json"
    io.write_skeleton(path, sk)
    back = io.load_skeleton(path)
    assert back.joint_names == sk.joint_names
    assert back.edges == sk.edges
    payload = json.loads(path.read_text())
    assert set(payload) == {"joints", "edges"}


def test_skeleton_load_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(DataError, match="invalid JSON"):
        io.load_skeleton(path)
    path.write_text('{"joints": ["a", "b"]}')
    with pytest.raises(DataError, match="malformed"):
        io.load_skeleton(path)
    with pytest.raises(DataError):
        io.load_skeleton(tmp_path / "missing.json")


def test_poses3d_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(0)
    seq = PoseSeq3D(rng.normal(size=(7, 3, 15)) * 123.456, fps=24.0)
    path = tmp_path / "poses3d.csv"
    io.write_poses3d(path, seq)
    back = io.load_poses3d(path, fps=24.0)
    # repr round-trip makes the floats bit-exact
    assert np.array_equal(back.coords, seq.coords)
    assert path.read_text().splitlines()[0] == "frame,joint,x,y,z"


def test_tracks2d_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(1)
    seq = PoseSeq2D(rng.normal(size=(5, 2, 15)), rng.uniform(size=(5, 15)),
                    fps=30.0)
    path = tmp_path / "tracks2d.csv"
    io.write_tracks2d(path, seq)
    back = io.load_tracks2d(path, fps=30.0)
    assert np.array_equal(back.coords, seq.coords)
    assert np.array_equal(back.conf, seq.conf)
    assert back.fps == 30.0


def test_cameras_roundtrip_exact(tmp_path):
    cams = orbit_cameras(OrbitSpec(angular_velocity=25.0, fps=24.0,
                                   duration=0.5))
    path = tmp_path / "cameras.csv"
    io.write_cameras(path, cams)
    back = io.load_cameras(path)
    assert np.array_equal(back.rows, cams.rows)


def test_dictionary_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(2)
    sk = default_skeleton()
    bases = rng.normal(size=(4, 3, 15))
    bases /= np.linalg.norm(bases.reshape(4, -1), axis=1)[:, None, None]
    d = PoseDictionary(rng.normal(size=(3, 15)), bases, sk.joint_names,
                       explained_variance=np.array([0.5, 0.3, 0.15, 0.05]))
    path = tmp_path / "dict.csv"
    io.write_dictionary(path, d)
    back = io.load_dictionary(path)
    assert np.array_equal(back.mean, d.mean)
    assert np.array_equal(back.bases, d.bases)
    assert back.joint_names == d.joint_names
    assert np.allclose(back.explained_variance, d.explained_variance)
    # first line is a standalone JSON header
    header = json.loads(path.read_text().splitlines()[0])
    assert header["k"] == 4 and header["p"] == 15


def test_csv_write_is_byte_deterministic(tmp_path):
    seq = PoseSeq3D(np.random.default_rng(3).normal(size=(4, 3, 15)), 24.0)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    io.write_poses3d(a, seq)
    io.write_poses3d(b, seq)
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()  # LF only


def test_csv_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "poses3d.csv"
    path.write_text("frame,joint,x,y,z\n0,0,1.0,2.0,oops\n")
    with pytest.raises(DataError, match="line 2"):
        io.load_poses3d(path)
    path.write_text("wrong,header\n")
    with pytest.raises(DataError, match="line 1"):
        io.load_poses3d(path)
    path.write_text("frame,joint,x,y,z\n0,0,1.0,2.0\n")
    with pytest.raises(DataError, match="line 2"):
        io.load_poses3d(path)
    path.write_text("frame,joint,x,y,z\n")
    with pytest.raises(DataError, match="no data rows"):
        io.load_poses3d(path)
    path.write_text("")
    with pytest.raises(DataError, match="empty file"):
        io.load_poses3d(path)


def test_incomplete_grid_rejected(tmp_path):
    path = tmp_path / "poses3d.csv"
    rows = ["frame,joint,x,y,z"]
    rows += [f"0,{j},0.0,0.0,0.0" for j in range(3)]
    rows += ["1,0,0.0,0.0,0.0"]  # frame 1 missing joints 1, 2
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(DataError):
        io.load_poses3d(path)
    # duplicate entry with a compensating omission
    rows = ["frame,joint,x,y,z",
            "0,0,0.0,0.0,0.0", "0,0,1.0,1.0,1.0"]
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(DataError):
        io.load_poses3d(path)


def test_cameras_require_ordered_frames(tmp_path):
    path = tmp_path / "cameras.csv"
    path.write_text("frame,r11,r12,r13,r21,r22,r23\n"
                    "1,1.0,0.0,0.0,0.0,1.0,0.0\n")
    with pytest.raises(DataError, match="0..n-1"):
        io.load_cameras(path)


def test_orbit_spec_json_roundtrip():
    spec = OrbitSpec(angular_velocity=25.0, fps=24.0, duration=10.0,
                     elevation=5.0, noise_sigma=1.5, outlier_rate=0.05,
                     outlier_magnitude=40.0, rng_seed=3)
    block = io.orbit_spec_to_json(spec)
    assert block["omega-deg-s"] == 25.0
    assert block["seed"] == 3
    assert io.orbit_spec_from_json(block) == spec
    with pytest.raises(DataError, match="unknown orbit config keys"):
        io.orbit_spec_from_json({"omega": 25.0})


def test_write_errors_csv(tmp_path):
    sk = default_skeleton()
    report = ErrorReport(per_frame=np.array([1.0, 2.0]),
                         per_joint=np.array([1.25, 1.75]),
                         joints=np.array([5, 8]), mean=1.5)
    path = tmp_path / "errors.csv"
    io.write_errors_csv(path, report, joint_names=sk.joint_names)
    lines = path.read_text().splitlines()
    assert lines[0] == "record,index,label,error_mm"
    assert lines[1] == "frame,0,,1.0"
    assert lines[3] == "joint,5,l_wrist,1.25"
    assert lines[-1] == "mean,,,1.5"


def test_write_sweep_csv(tmp_path):
    result = SweepResult(
        rows=((0.0, "Initial", 10.0), (0.0, "BA", 8.0)),
        details=(("seq0", 0.0, "Initial", 10.0), ("seq0", 0.0, "BA", 8.0)))
    path = tmp_path / "sweep.csv"
    io.write_sweep_csv(path, result)
    lines = path.read_text().splitlines()
    assert lines[0] == "sequence,velocity_deg_s,method,mean_error_mm"
    assert lines[1].startswith("all,")
    assert lines[3].startswith("seq0,")


def test_write_json_stable(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    io.write_json(a, {"b": 1, "a": [1.5, 2.5]})
    io.write_json(b, {"a": [1.5, 2.5], "b": 1})
    assert a.read_bytes() == b.read_bytes()
    assert io.load_json(a) == {"a": [1.5, 2.5], "b": 1}
