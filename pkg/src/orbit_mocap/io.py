"""File formats: skeleton JSON, pose/track/camera CSVs, dictionary files,
report JSON.

CSV files use the C locale, LF line endings and shortest round-trip float
formatting, so outputs are byte-reproducible and diff-friendly and every
file round-trips through its loader to an equal in-memory object.
"""

import csv
import json

import numpy as np

from .camera import CameraSeq, OrbitSpec
from .errors import DataError
from .posedict import PoseDictionary
from .skeleton import PoseSeq2D, PoseSeq3D, Skeleton


def _fmt(x):
    return repr(float(x))


def _open_read(path):
    try:
        return open(path, "r", newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc


# -- skeleton ---------------------------------------------------------------

def write_skeleton(path, skeleton):
    payload = {"joints": list(skeleton.joint_names),
               "edges": [list(e) for e in skeleton.edges]}
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_skeleton(path):
    with _open_read(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return Skeleton(payload["joints"], payload["edges"])
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: missing or malformed field {exc}") from exc


# -- CSV helpers ------------------------------------------------------------

def _read_csv_rows(path, expected_header):
    with _open_read(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if header != expected_header:
            raise DataError(
                f"{path}: line 1: expected header {','.join(expected_header)}, "
                f"got {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise DataError(
                    f"{path}: line {lineno}: expected {len(expected_header)} "
                    f"fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
    return rows


def _dense_by_frame_joint(rows, n_values, path):
    """Rows of (frame, joint, v...) -> (n, n_values, p) array; requires a
    complete zero-based grid."""
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.asarray(rows)
    frames = arr[:, 0].astype(int)
    joints = arr[:, 1].astype(int)
    n, p = frames.max() + 1, joints.max() + 1
    if len(rows) != n * p:
        raise DataError(f"{path}: expected {n}x{p} grid, got {len(rows)} rows")
    out = np.full((n, n_values, p), np.nan)
    out[frames, :, joints] = arr[:, 2:]
    if np.any(np.isnan(out)):
        raise DataError(f"{path}: duplicate or missing (frame, joint) entries")
    return out


# -- 3D poses ---------------------------------------------------------------

POSES3D_HEADER = ["frame", "joint", "x", "y", "z"]


def write_poses3d(path, seq):
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(POSES3D_HEADER)
        for t in range(seq.n_frames):
            for j in range(seq.n_joints):
                writer.writerow([t, j] + [_fmt(v) for v in seq.coords[t, :, j]])


def load_poses3d(path, fps=24.0):
    data = _dense_by_frame_joint(_read_csv_rows(path, POSES3D_HEADER), 3, path)
    return PoseSeq3D(data, fps)


# -- 2D tracks --------------------------------------------------------------

TRACKS2D_HEADER = ["frame", "joint", "u", "v", "conf"]


def write_tracks2d(path, seq):
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACKS2D_HEADER)
        for t in range(seq.n_frames):
            for j in range(seq.n_joints):
                writer.writerow([t, j]
                                + [_fmt(v) for v in seq.coords[t, :, j]]
                                + [_fmt(seq.conf[t, j])])


def load_tracks2d(path, fps=24.0):
    data = _dense_by_frame_joint(_read_csv_rows(path, TRACKS2D_HEADER), 3, path)
    return PoseSeq2D(data[:, :2], data[:, 2], fps)


# -- cameras ----------------------------------------------------------------

CAMERAS_HEADER = ["frame", "r11", "r12", "r13", "r21", "r22", "r23"]


def write_cameras(path, cams):
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CAMERAS_HEADER)
        for t in range(cams.n_frames):
            writer.writerow([t] + [_fmt(v) for v in cams.rows[t].ravel()])


def load_cameras(path):
    rows = _read_csv_rows(path, CAMERAS_HEADER)
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.asarray(rows)
    frames = arr[:, 0].astype(int)
    if not np.array_equal(frames, np.arange(len(rows))):
        raise DataError(f"{path}: frames must be 0..n-1 in order")
    return CameraSeq(arr[:, 1:].reshape(-1, 2, 3))


# -- pose dictionary --------------------------------------------------------

DICT_HEADER = ["basis", "joint", "x", "y", "z"]


def write_dictionary(path, dictionary):
    """JSON header line, then a CSV payload; basis -1 denotes the mean."""
    header = {"joints": list(dictionary.joint_names),
              "k": dictionary.n_bases, "p": dictionary.n_joints}
    if dictionary.explained_variance is not None:
        header["explained_variance"] = [float(v)
                                        for v in dictionary.explained_variance]
    with open(path, "w", newline="\n") as fh:
        fh.write(json.dumps(header) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DICT_HEADER)
        mats = [(-1, dictionary.mean)] + [(i, b) for i, b in
                                          enumerate(dictionary.bases)]
        for idx, mat in mats:
            for j in range(dictionary.n_joints):
                writer.writerow([idx, j] + [_fmt(v) for v in mat[:, j]])


def load_dictionary(path):
    with _open_read(path) as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: line 1: invalid JSON header ({exc})") from exc
        try:
            joints, k, p = header["joints"], int(header["k"]), int(header["p"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: malformed header field {exc}") from exc
        reader = csv.reader(fh)
        try:
            cols = next(reader)
        except StopIteration:
            raise DataError(f"{path}: missing CSV payload") from None
        if cols != DICT_HEADER:
            raise DataError(f"{path}: line 2: bad CSV header {','.join(cols)}")
        mats = np.full((k + 1, 3, p), np.nan)
        for lineno, row in enumerate(reader, start=3):
            if not row:
                continue
            try:
                b, j = int(row[0]), int(row[1])
                mats[b + 1, :, j] = [float(v) for v in row[2:5]]
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
    if np.any(np.isnan(mats)):
        raise DataError(f"{path}: incomplete dictionary payload")
    ev = header.get("explained_variance")
    return PoseDictionary(mats[0], mats[1:], tuple(joints),
                          explained_variance=None if ev is None else np.asarray(ev))


# -- orbit spec / config blocks ---------------------------------------------

_ORBIT_KEYS = {
    "omega-deg-s": "angular_velocity",
    "fps": "fps",
    "duration-s": "duration",
    "elevation-deg": "elevation",
    "noise": "noise_sigma",
    "outlier-rate": "outlier_rate",
    "outlier-mag": "outlier_magnitude",
    "seed": "rng_seed",
}


def orbit_spec_to_json(spec):
    return {key: getattr(spec, attr) for key, attr in _ORBIT_KEYS.items()}


def orbit_spec_from_json(block):
    unknown = set(block) - set(_ORBIT_KEYS)
    if unknown:
        raise DataError(f"unknown orbit config keys: {sorted(unknown)}")
    kwargs = {attr: block[key] for key, attr in _ORBIT_KEYS.items()
              if key in block}
    return OrbitSpec(**kwargs)


# -- reports ----------------------------------------------------------------

def write_json(path, payload):
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path):
    with _open_read(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from exc


def write_errors_csv(path, report, joint_names=None):
    """Per-frame and per-joint error rows: record,index,label,error_mm."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["record", "index", "label", "error_mm"])
        for t, err in enumerate(report.per_frame):
            writer.writerow(["frame", t, "", _fmt(err)])
        for j, err in zip(report.joints, report.per_joint):
            label = joint_names[j] if joint_names else ""
            writer.writerow(["joint", int(j), label, _fmt(err)])
        writer.writerow(["mean", "", "", _fmt(report.mean)])


def write_sweep_csv(path, result):
    """Aggregated rows first (sequence='all'), then per-sequence detail."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sequence", "velocity_deg_s", "method", "mean_error_mm"])
        for velocity, method, err in result.rows:
            writer.writerow(["all", _fmt(velocity), method, _fmt(err)])
        for sid, velocity, method, err in result.details:
            writer.writerow([sid, _fmt(velocity), method, _fmt(err)])
