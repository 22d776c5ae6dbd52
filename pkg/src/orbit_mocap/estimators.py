"""Scikit-learn style estimators wrapping the reconstruction pipeline.

These give the algorithms fit/predict surfaces with get_params/set_params,
so they compose with the wider ecosystem (grid search over alpha/gamma,
pipeline steps, cloning). The functional core lives in `posedict` and
`bundle`; the estimators only orchestrate it.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import bundle
from .errors import DataError
from .posedict import InitConfig, initialize_sequence, learn_dictionary
from .skeleton import centralize


class PoseDictionaryLearner(BaseEstimator):
    """Learns a PCA pose dictionary from a 3D pose corpus.

    Parameters mirror `learn_dictionary`; after fit the dictionary is in
    `dictionary_` and per-basis explained-variance ratios in
    `explained_variance_ratio_`.
    """

    def __init__(self, skeleton=None, n_bases=64, align=True,
                 normalize_scale=True):
        self.skeleton = skeleton
        self.n_bases = n_bases
        self.align = align
        self.normalize_scale = normalize_scale

    def fit(self, X, y=None):
        if self.skeleton is None:
            raise DataError("PoseDictionaryLearner needs a skeleton")
        self.dictionary_ = learn_dictionary(
            X, self.n_bases, self.skeleton,
            align=self.align, normalize_scale=self.normalize_scale)
        self.explained_variance_ratio_ = np.array(
            self.dictionary_.explained_variance)
        return self

    def transform(self, X):
        """Project poses onto the learned bases, returning (n, k) coefficients."""
        if not hasattr(self, "dictionary_"):
            raise NotFittedError("call fit first")
        d = self.dictionary_
        flat = np.stack([np.asarray(getattr(p, "coords", p), dtype=float).ravel()
                         for p in X])
        return (flat - d.mean.ravel()) @ d.bases.reshape(d.n_bases, -1).T


class MonocularSequenceReconstructor(BaseEstimator):
    """Full 2D-tracks-to-3D-poses reconstructor.

    fit(X) takes a PoseSeq2D (centralized or not), runs the robust
    per-frame dictionary initialization and, unless run_bundle is off, the
    multi-frame bundle adjustment. Results land in `poses_`, `cameras_`,
    `weights_` and `report_`; `predict` returns the poses.
    """

    def __init__(self, dictionary=None, skeleton=None, lambda1=None,
                 restarts=8, reweight_rounds=3, alpha=None, alpha_scale=0.1,
                 gamma=1.0, outer_iters=50, tol_rel=1e-6, run_bundle=True,
                 carry_weights=True, threads=1):
        self.dictionary = dictionary
        self.skeleton = skeleton
        self.lambda1 = lambda1
        self.restarts = restarts
        self.reweight_rounds = reweight_rounds
        self.alpha = alpha
        self.alpha_scale = alpha_scale
        self.gamma = gamma
        self.outer_iters = outer_iters
        self.tol_rel = tol_rel
        self.run_bundle = run_bundle
        self.carry_weights = carry_weights
        self.threads = threads

    def fit(self, X, y=None):
        if self.dictionary is None:
            raise DataError("MonocularSequenceReconstructor needs a dictionary")
        if self.run_bundle and self.skeleton is None:
            raise DataError("bundle adjustment needs a skeleton")
        tracks = X if X.centralized else centralize(X)
        init_cfg = InitConfig(lambda1=self.lambda1, restarts=self.restarts,
                              reweight_rounds=self.reweight_rounds,
                              threads=self.threads)
        poses, cams, weights = initialize_sequence(tracks, self.dictionary,
                                                   init_cfg)
        report = {"stage": "initial", "n_frames": tracks.n_frames}
        if self.run_bundle:
            cfg = bundle.BAConfig(
                alpha=self.alpha, alpha_scale=self.alpha_scale,
                gamma=self.gamma,
                outer_iters=self.outer_iters, tol_rel=self.tol_rel,
                joint_weights=weights if self.carry_weights else None,
                threads=self.threads)
            state = bundle.solve(tracks, poses, cams, self.skeleton, cfg)
            poses, cams = state.S, state.R
            report = {"stage": "bundle",
                      "n_frames": tracks.n_frames,
                      "iterations": len(state.objective_trace) - 1,
                      "objective_trace": [float(v)
                                          for v in state.objective_trace]}
        self.poses_ = poses
        self.cameras_ = cams
        self.weights_ = weights
        self.report_ = report
        return self

    def predict(self, X=None):
        if not hasattr(self, "poses_"):
            raise NotFittedError("call fit first")
        return self.poses_

    def fit_predict(self, X, y=None):
        return self.fit(X).predict()
