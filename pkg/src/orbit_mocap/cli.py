"""Command-line interface.

Subcommands: synth, learn-dict, reconstruct, eval, sweep. Exit codes:
0 success, 1 usage error, 2 data error, 3 numerical failure (including a
failed --check-trend). Config precedence is CLI flags > JSON config file >
defaults; the effective configuration is echoed into every report.
"""

import argparse
import os
import sys
import time
from pathlib import Path

from . import bundle, io
from .camera import synthesize_tracks
from .errors import DataError, NumericalError, UsageError
from .estimators import MonocularSequenceReconstructor, PoseDictionaryLearner
from .evaluate import SweepConfig, reconstruction_error, run_sweep
from .posedict import InitConfig
from .skeleton import eval_joint_indices


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _threads_default():
    env = os.environ.get("ORBIT_MOCAP_THREADS")
    if env is None:
        return 1
    try:
        return max(int(env), 1)
    except ValueError:
        raise UsageError(f"ORBIT_MOCAP_THREADS must be an integer, got {env!r}")


def _load_config(path):
    if path is None:
        return {}
    cfg = io.load_json(path)
    if not isinstance(cfg, dict):
        raise DataError(f"{path}: config must be a JSON object")
    return cfg


def _orbit_from_args(args, config):
    """Orbit spec from defaults <- config file block <- CLI flags."""
    block = dict(config.get("orbit", {}))
    flag_map = {
        "omega-deg-s": args.omega_deg_s, "fps": args.fps,
        "duration-s": args.duration_s, "elevation-deg": args.elevation_deg,
        "noise": args.noise, "outlier-rate": args.outlier_rate,
        "outlier-mag": args.outlier_mag, "seed": args.seed,
    }
    for key, val in flag_map.items():
        if val is not None:
            block[key] = val
    return io.orbit_spec_from_json(block)


def _add_orbit_flags(sub):
    sub.add_argument("--omega-deg-s", type=float, default=None,
                     help="orbit angular velocity, degrees/second")
    sub.add_argument("--fps", type=float, default=None)
    sub.add_argument("--duration-s", type=float, default=None)
    sub.add_argument("--elevation-deg", type=float, default=None)
    sub.add_argument("--noise", type=float, default=None,
                     help="2D Gaussian noise sigma")
    sub.add_argument("--outlier-rate", type=float, default=None)
    sub.add_argument("--outlier-mag", type=float, default=None)
    sub.add_argument("--seed", type=int, default=None)


def _outdir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser():
    parser = _Parser(prog="orbit-mocap",
                     description="3D human pose reconstruction from "
                                 "orbiting-camera 2D joint tracks")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (env ORBIT_MOCAP_THREADS)")
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("synth", parents=[], help="synthesize 2D tracks "
                         "from 3D ground truth with a virtual orbit")
    sp.add_argument("--poses3d", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--config", default=None)
    _add_orbit_flags(sp)

    sp = subs.add_parser("learn-dict", help="learn a pose dictionary from "
                         "a directory of 3D pose CSVs")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--skeleton", required=True)
    sp.add_argument("--k", type=int, default=64)
    sp.add_argument("--out", required=True)
    sp.add_argument("--fps", type=float, default=24.0)
    sp.add_argument("--no-align", action="store_true")
    sp.add_argument("--no-normalize", action="store_true")

    sp = subs.add_parser("reconstruct", help="lift 2D tracks to 3D poses")
    sp.add_argument("--tracks", required=True)
    sp.add_argument("--skeleton", required=True)
    sp.add_argument("--dict", dest="dictionary", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--fps", type=float, default=24.0)
    sp.add_argument("--skip-ba", action="store_true",
                    help="stop after single-frame initialization")
    sp.add_argument("--gamma", type=float, default=1.0,
                    help="articulation weight (0 disables)")
    sp.add_argument("--alpha", type=float, default=None,
                    help="nuclear-norm weight (default: data-scaled)")
    sp.add_argument("--alpha-scale", type=float, default=0.1,
                    help="fraction of sigma1 used when --alpha is omitted")
    sp.add_argument("--lambda1", type=float, default=None)
    sp.add_argument("--restarts", type=int, default=8)
    sp.add_argument("--outer-iters", type=int, default=50)
    sp.add_argument("--tol-rel", type=float, default=1e-6)
    sp.add_argument("--seed", type=int, default=0)

    sp = subs.add_parser("eval", help="score a reconstruction against "
                         "ground truth")
    sp.add_argument("--est", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--skeleton", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--all-joints", action="store_true",
                    help="evaluate every joint, not the 12-joint subset")

    sp = subs.add_parser("sweep", help="camera angular-velocity sweep on a "
                         "ground-truth corpus")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--skeleton", required=True)
    sp.add_argument("--dict", dest="dictionary", required=True)
    sp.add_argument("--velocities", required=True,
                    help="comma-separated degrees/second, e.g. 0,10,25")
    sp.add_argument("--out", required=True)
    sp.add_argument("--config", default=None)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--alpha-scale", type=float, default=0.1,
                    help="fraction of sigma1 used when --alpha is omitted")
    sp.add_argument("--restarts", type=int, default=8)
    sp.add_argument("--outer-iters", type=int, default=50)
    sp.add_argument("--check-trend", action="store_true",
                    help="fail (exit 3) unless BA error at the fastest "
                         "velocity is below the slowest")
    _add_orbit_flags(sp)
    return parser


def cmd_synth(args, threads):
    config = _load_config(args.config)
    spec = _orbit_from_args(args, config)
    gt = io.load_poses3d(args.poses3d, fps=spec.fps)
    tracks, cams = synthesize_tracks(gt, spec)
    out = _outdir(args.out)
    io.write_tracks2d(out / "tracks2d.csv", tracks)
    io.write_cameras(out / "cameras_gt.csv", cams)
    io.write_json(out / "spec.json", io.orbit_spec_to_json(spec))
    print(f"wrote {tracks.n_frames} frames to {out}")
    return 0


def cmd_learn_dict(args, threads):
    skeleton = io.load_skeleton(args.skeleton)
    corpus_dir = Path(args.corpus)
    files = sorted(corpus_dir.glob("*.csv"))
    if not files:
        raise DataError(f"{corpus_dir}: no CSV files")
    poses = []
    for f in files:
        seq = io.load_poses3d(f, fps=args.fps)
        poses.extend(seq.coords)
    learner = PoseDictionaryLearner(skeleton=skeleton, n_bases=args.k,
                                    align=not args.no_align,
                                    normalize_scale=not args.no_normalize)
    learner.fit(poses)
    io.write_dictionary(args.out, learner.dictionary_)
    print("basis  explained_var  cumulative")
    cum = 0.0
    for i, ev in enumerate(learner.explained_variance_ratio_):
        cum += ev
        print(f"{i:5d}  {ev:13.6f}  {cum:10.6f}")
    print(f"wrote {args.k} bases ({len(poses)} corpus poses) to {args.out}")
    return 0


def cmd_reconstruct(args, threads):
    skeleton = io.load_skeleton(args.skeleton)
    dictionary = io.load_dictionary(args.dictionary)
    if tuple(dictionary.joint_names) != tuple(skeleton.joint_names):
        raise DataError("joint names of dictionary and skeleton disagree")
    tracks = io.load_tracks2d(args.tracks, fps=args.fps)
    if tracks.n_joints != skeleton.n_joints:
        raise DataError(f"tracks have {tracks.n_joints} joints, skeleton "
                        f"{skeleton.n_joints}")
    t0 = time.perf_counter()
    model = MonocularSequenceReconstructor(
        dictionary=dictionary, skeleton=skeleton, lambda1=args.lambda1,
        restarts=args.restarts, alpha=args.alpha,
        alpha_scale=args.alpha_scale, gamma=args.gamma,
        outer_iters=args.outer_iters, tol_rel=args.tol_rel,
        run_bundle=not args.skip_ba, threads=threads)
    model.fit(tracks)
    elapsed = time.perf_counter() - t0
    out = _outdir(args.out)
    io.write_poses3d(out / "poses3d.csv", model.poses_)
    io.write_cameras(out / "cameras.csv", model.cameras_)
    report = dict(model.report_)
    report["seconds"] = round(elapsed, 3)
    report["config"] = {
        "skip_ba": args.skip_ba, "gamma": args.gamma, "alpha": args.alpha,
        "alpha_scale": args.alpha_scale,
        "lambda1": args.lambda1, "restarts": args.restarts,
        "outer_iters": args.outer_iters, "tol_rel": args.tol_rel,
        "seed": args.seed, "threads": threads, "fps": args.fps,
    }
    io.write_json(out / "report.json", report)
    print(f"reconstructed {model.poses_.n_frames} frames in {elapsed:.1f}s "
          f"-> {out}")
    return 0


def cmd_eval(args, threads):
    skeleton = io.load_skeleton(args.skeleton)
    est = io.load_poses3d(args.est)
    gt = io.load_poses3d(args.gt)
    joints = None if args.all_joints else eval_joint_indices(skeleton)
    report = reconstruction_error(est, gt, joints=joints)
    out = _outdir(args.out)
    io.write_errors_csv(out / "errors.csv", report,
                        joint_names=skeleton.joint_names)
    io.write_json(out / "report.json", {
        "mean_error_mm": report.mean,
        "n_frames": int(report.per_frame.size),
        "joints": [skeleton.joint_names[j] for j in report.joints],
        "config": {"all_joints": args.all_joints},
    })
    print(f"mean reconstruction error: {report.mean:.2f} mm")
    return 0


def cmd_sweep(args, threads):
    skeleton = io.load_skeleton(args.skeleton)
    dictionary = io.load_dictionary(args.dictionary)
    config = _load_config(args.config)
    orbit = _orbit_from_args(args, config)
    try:
        velocities = [float(v) for v in args.velocities.split(",") if v]
    except ValueError as exc:
        raise UsageError(f"bad --velocities: {exc}")
    if not velocities:
        raise UsageError("--velocities must list at least one value")
    files = sorted(Path(args.corpus).glob("*.csv"))
    if not files:
        raise DataError(f"{args.corpus}: no CSV files")
    sequences = [io.load_poses3d(f, fps=orbit.fps) for f in files]
    cfg = SweepConfig(
        skeleton=skeleton, orbit=orbit,
        init=InitConfig(restarts=args.restarts, threads=threads),
        ba=bundle.BAConfig(alpha=args.alpha, alpha_scale=args.alpha_scale,
                           gamma=args.gamma,
                           outer_iters=args.outer_iters, threads=threads),
        joints=eval_joint_indices(skeleton))
    result = run_sweep(sequences, velocities, dictionary, cfg)
    out = _outdir(args.out)
    io.write_sweep_csv(out / "sweep.csv", result)
    io.write_json(out / "report.json", {
        "velocities": velocities,
        "rows": [{"velocity": v, "method": m, "mean_error_mm": e}
                 for v, m, e in result.rows],
        "config": {"orbit": io.orbit_spec_to_json(orbit),
                   "gamma": args.gamma, "alpha": args.alpha,
                   "alpha_scale": args.alpha_scale,
                   "restarts": args.restarts,
                   "outer_iters": args.outer_iters, "threads": threads},
    })
    for v, method, err in result.rows:
        print(f"omega={v:6.1f} deg/s  {method:10s}  {err:8.2f} mm")
    if args.check_trend and len(velocities) >= 2:
        ba = {v: e for v, m, e in result.rows if m == "BA"}
        lo, hi = min(velocities), max(velocities)
        if not ba[hi] < ba[lo]:
            raise NumericalError(
                f"trend check failed: BA error {ba[hi]:.2f} mm at "
                f"{hi} deg/s not below {ba[lo]:.2f} mm at {lo} deg/s")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "learn-dict": cmd_learn_dict,
    "reconstruct": cmd_reconstruct,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        threads = args.threads if args.threads is not None else _threads_default()
        if threads < 1:
            raise UsageError("--threads must be >= 1")
        return _COMMANDS[args.command](args, threads)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
