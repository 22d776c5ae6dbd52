"""3D human pose reconstruction from monocular 2D joint tracks recorded by
an orbiting camera: robust dictionary-based single-frame initialization
plus multi-frame bundle adjustment with nuclear-norm shape regularization
and a rank-1 limb-length (articulation) constraint."""

from .bundle import BAConfig, BAState
from .camera import (CameraMat, CameraSeq, OrbitSpec, orbit_cameras,
                     polar_retract, project, synthesize_tracks)
from .errors import DataError, NumericalError, OrbitMocapError, UsageError
from .estimators import MonocularSequenceReconstructor, PoseDictionaryLearner
from .evaluate import (ErrorReport, SweepConfig, SweepResult,
                       procrustes_align, reconstruction_error, run_sweep)
from .numopt import ProxConfig, apg_minimize, rank1_approx, stiefel_step, svt
from .posedict import (FrameEstimate, InitConfig, PoseDictionary,
                       estimate_frame, initialize_sequence, learn_dictionary)
from .skeleton import (Pose2D, Pose3D, PoseSeq2D, PoseSeq3D, Skeleton,
                       centralize, default_skeleton, eval_joint_indices,
                       limb_lengths_sq, limb_lengths_sq_grad)

__version__ = "0.1.0"

__all__ = [
    "BAConfig", "BAState", "CameraMat", "CameraSeq", "DataError",
    "ErrorReport", "FrameEstimate", "InitConfig",
    "MonocularSequenceReconstructor", "NumericalError", "OrbitMocapError",
    "OrbitSpec", "Pose2D", "Pose3D", "PoseDictionary",
    "PoseDictionaryLearner", "PoseSeq2D", "PoseSeq3D", "ProxConfig",
    "Skeleton", "SweepConfig", "SweepResult", "UsageError", "apg_minimize",
    "centralize", "default_skeleton", "estimate_frame", "eval_joint_indices",
    "initialize_sequence", "learn_dictionary", "limb_lengths_sq",
    "limb_lengths_sq_grad", "orbit_cameras", "polar_retract",
    "procrustes_align", "project", "rank1_approx", "reconstruction_error",
    "run_sweep", "stiefel_step", "svt", "synthesize_tracks",
]
