"""Command-line interface: the full pipeline, exit codes and determinism."""

import json

import pytest

from orbit_mocap import io
from orbit_mocap.cli import main
from orbit_mocap.skeleton import default_skeleton
from orbit_mocap.synth import planted_sequence


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Ground truth, skeleton and a small corpus on disk."""
    root = tmp_path_factory.mktemp("cli")
    sk = default_skeleton()
    io.write_skeleton(root / "skeleton.json", sk)
    ps = planted_sequence(24, rank=10, seed=0, fps=24.0)
    io.write_poses3d(root / "gt.csv", ps.seq)
    corpus = root / "corpus"
    corpus.mkdir()
    for i, seed in enumerate((1, 2)):
        seq = planted_sequence(30, rank=10, seed=seed, fps=24.0).seq
        io.write_poses3d(corpus / f"seq{i}.csv", seq)
    # pre-build the pipeline artifacts the tests share
    assert main(["synth", "--poses3d", str(root / "gt.csv"),
                 "--out", str(root / "synth"), "--omega-deg-s", "45",
                 "--duration-s", "1", "--fps", "24"]) == 0
    assert main(["learn-dict", "--corpus", str(corpus),
                 "--skeleton", str(root / "skeleton.json"),
                 "--k", "9", "--out", str(root / "dict.csv"),
                 "--no-align", "--no-normalize"]) == 0
    return root


def test_synth_writes_tracks_and_cameras(workspace):
    out = workspace / "synth"
    rc = main(["synth", "--poses3d", str(workspace / "gt.csv"),
               "--out", str(out), "--omega-deg-s", "45",
               "--duration-s", "1", "--fps", "24"])
    assert rc == 0
    tracks = io.load_tracks2d(out / "tracks2d.csv")
    cams = io.load_cameras(out / "cameras_gt.csv")
    assert tracks.n_frames == 24 and cams.n_frames == 24
    spec = json.loads((out / "spec.json").read_text())
    assert spec["omega-deg-s"] == 45.0


def test_synth_config_file_and_flag_precedence(workspace, capsys):
    cfg = workspace / "config.json"
    cfg.write_text(json.dumps({"orbit": {"omega-deg-s": 10.0,
                                         "duration-s": 1.0, "fps": 24.0}}))
    out = workspace / "synth_cfg"
    rc = main(["synth", "--poses3d", str(workspace / "gt.csv"),
               "--out", str(out), "--config", str(cfg),
               "--omega-deg-s", "20"])  # flag overrides the config block
    assert rc == 0
    spec = json.loads((out / "spec.json").read_text())
    assert spec["omega-deg-s"] == 20.0
    assert spec["duration-s"] == 1.0


def test_learn_dict(workspace, capsys):
    out = workspace / "dict.csv"
    rc = main(["learn-dict", "--corpus", str(workspace / "corpus"),
               "--skeleton", str(workspace / "skeleton.json"),
               "--k", "9", "--out", str(out),
               "--no-align", "--no-normalize"])
    assert rc == 0
    d = io.load_dictionary(out)
    assert d.n_bases == 9
    assert "explained_var" in capsys.readouterr().out


def test_reconstruct_and_eval(workspace, capsys):
    out = workspace / "recon"
    rc = main(["reconstruct", "--tracks", str(workspace / "synth/tracks2d.csv"),
               "--skeleton", str(workspace / "skeleton.json"),
               "--dict", str(workspace / "dict.csv"),
               "--out", str(out), "--outer-iters", "3"])
    assert rc == 0
    poses = io.load_poses3d(out / "poses3d.csv")
    assert poses.n_frames == 24
    report = json.loads((out / "report.json").read_text())
    assert report["stage"] == "bundle"
    assert report["seconds"] > 0
    assert report["config"]["outer_iters"] == 3

    ev = workspace / "eval"
    rc = main(["eval", "--est", str(out / "poses3d.csv"),
               "--gt", str(workspace / "gt.csv"),
               "--skeleton", str(workspace / "skeleton.json"),
               "--out", str(ev)])
    assert rc == 0
    lines = (ev / "errors.csv").read_text().splitlines()
    assert lines[0] == "record,index,label,error_mm"
    assert lines[-1].startswith("mean,")
    rep = json.loads((ev / "report.json").read_text())
    assert len(rep["joints"]) == 12
    assert "mean reconstruction error" in capsys.readouterr().out


def test_reconstruct_skip_ba(workspace):
    out = workspace / "recon_init"
    rc = main(["reconstruct", "--tracks", str(workspace / "synth/tracks2d.csv"),
               "--skeleton", str(workspace / "skeleton.json"),
               "--dict", str(workspace / "dict.csv"),
               "--out", str(out), "--skip-ba"])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["stage"] == "initial"


def test_reconstruct_outputs_deterministic(workspace):
    args = ["reconstruct", "--tracks", str(workspace / "synth/tracks2d.csv"),
            "--skeleton", str(workspace / "skeleton.json"),
            "--dict", str(workspace / "dict.csv"), "--outer-iters", "2"]
    out_a, out_b = workspace / "det_a", workspace / "det_b"
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(["--threads", "3"] + args + ["--out", str(out_b)]) == 0
    for name in ("poses3d.csv", "cameras.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_threads_env_var(workspace, monkeypatch):
    out = workspace / "env_threads"
    monkeypatch.setenv("ORBIT_MOCAP_THREADS", "2")
    rc = main(["reconstruct", "--tracks", str(workspace / "synth/tracks2d.csv"),
               "--skeleton", str(workspace / "skeleton.json"),
               "--dict", str(workspace / "dict.csv"),
               "--out", str(out), "--skip-ba"])
    assert rc == 0
    monkeypatch.setenv("ORBIT_MOCAP_THREADS", "zebra")
    assert main(["reconstruct", "--tracks", "x", "--skeleton", "y",
                 "--dict", "z", "--out", "w"]) == 1


def test_exit_codes(workspace, capsys, tmp_path):
    # usage error: unknown flag
    assert main(["synth", "--nope"]) == 1
    assert "usage error" in capsys.readouterr().err
    # usage error: missing subcommand arguments
    assert main(["reconstruct"]) == 1
    # data error: missing file
    assert main(["eval", "--est", str(tmp_path / "none.csv"),
                 "--gt", str(workspace / "gt.csv"),
                 "--skeleton", str(workspace / "skeleton.json"),
                 "--out", str(tmp_path / "o")]) == 2
    assert "data error" in capsys.readouterr().err
    # data error: malformed csv
    bad = tmp_path / "bad.csv"
    bad.write_text("frame,joint,x,y,z\n0,0,a,b,c\n")
    assert main(["eval", "--est", str(bad), "--gt", str(workspace / "gt.csv"),
                 "--skeleton", str(workspace / "skeleton.json"),
                 "--out", str(tmp_path / "o2")]) == 2


def test_sweep_and_check_trend_failure(workspace, capsys):
    out = workspace / "sweep"
    base = ["sweep", "--corpus", str(workspace / "corpus"),
            "--skeleton", str(workspace / "skeleton.json"),
            "--dict", str(workspace / "dict.csv"),
            "--duration-s", "0.5", "--fps", "24",
            "--outer-iters", "2", "--restarts", "4"]
    rc = main(base + ["--velocities", "0,45", "--out", str(out)])
    assert rc == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "sequence,velocity_deg_s,method,mean_error_mm"
    # 2 velocities x 3 methods aggregated + 2 sequences x same in detail
    assert sum(1 for l in lines[1:] if l.startswith("all,")) == 6
    assert sum(1 for l in lines[1:] if l.startswith("seq")) == 12
    report = json.loads((out / "report.json").read_text())
    assert report["velocities"] == [0.0, 45.0]
    capsys.readouterr()

    # bad velocity list is a usage error
    assert main(base + ["--velocities", "0,abc",
                        "--out", str(workspace / "sweep_bad")]) == 1
    capsys.readouterr()
