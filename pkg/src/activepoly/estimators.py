"""scikit-learn style wrappers around the fitting and detection stages."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import motion
from .active import ANALYZED_SEGMENTS
from .errors import GeometryError, ValidationError
from .imaging import EchoSequence
from .pipeline import PipelineConfig, process_echo
from .polyfit import FitProblem, fit_polynomial, fit_polynomial_svd, vandermonde

FEATURE_NAMES = ("lvef",) + tuple(f"ratio_{s}" for s in ANALYZED_SEGMENTS)


class RidgePolynomialRegressor(RegressorMixin, BaseEstimator):
    """Regularized polynomial regression of ``y`` on a single feature.

    Parameters
    ----------
    order : int
        Polynomial order.
    lam : float
        Tikhonov weight; the penalty is ``lam**2 * ||coef||**2``.
    method : {"normal", "svd"}
        Stacked least squares or the filtered SVD solution.
    """

    def __init__(self, order=4, lam=0.1, method="normal"):
        self.order = order
        self.lam = lam
        self.method = method

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2, y_numeric=True)
        if X.shape[1] != 1:
            raise ValidationError("RidgePolynomialRegressor takes a single feature")
        if self.method not in ("normal", "svd"):
            raise ValidationError(f"method must be 'normal' or 'svd', got {self.method!r}")
        problem = FitProblem(np.column_stack([X[:, 0], y]), int(self.order), float(self.lam))
        solve = fit_polynomial if self.method == "normal" else fit_polynomial_svd
        self.polynomial_ = solve(problem)
        self.coef_ = np.asarray(self.polynomial_.coef)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != 1:
            raise ValidationError("RidgePolynomialRegressor takes a single feature")
        return vandermonde(X[:, 0], len(self.coef_) - 1) @ self.coef_


def _echo_features(report, cfg: PipelineConfig) -> np.ndarray:
    """``[lvef, ratio_1, ..., ratio_7]`` ignoring the LVEF gates; NaN when unavailable."""
    row = np.full(len(FEATURE_NAMES), np.nan)
    if report.diagnosis is None:
        return row
    row[0] = report.diagnosis.lvef
    try:
        intervals = motion.min_pair_interval(report.models, cfg.pairing, cfg.n_s, cfg.norm)
        verdicts = motion.classify_segments(report.curves, intervals, cfg.pairing, cfg.threshold)
    except GeometryError:
        return row
    by_id = {v.segment_id: v.ratio for v in verdicts}
    row[1:] = [by_id.get(s, np.nan) for s in ANALYZED_SEGMENTS]
    return row


class ActivePolynomialTransformer(TransformerMixin, BaseEstimator):
    """Turn echo sequences into ``[lvef, six displacement ratios]`` feature rows.

    The transformer is stateless: ``fit`` only checks its parameters.  Rows
    of echos that cannot be processed are NaN.
    """

    def __init__(self, config=None, n_jobs=1):
        self.config = config
        self.n_jobs = n_jobs

    def _config(self) -> PipelineConfig:
        if self.config is None:
            return PipelineConfig()
        if isinstance(self.config, dict):
            return PipelineConfig.from_dict(self.config)
        return self.config

    def fit(self, X, y=None):
        self._config()
        self.n_features_out_ = len(FEATURE_NAMES)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_out_")
        config = self._config()
        rows = []
        for seq in X:
            if not isinstance(seq, EchoSequence):
                raise ValidationError("ActivePolynomialTransformer expects EchoSequence items")
            report = process_echo(seq, config, n_jobs=self.n_jobs)
            rows.append(_echo_features(report, config))
        return np.vstack(rows) if rows else np.empty((0, len(FEATURE_NAMES)))

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURE_NAMES, dtype=object)


class MIDetector(ClassifierMixin, BaseEstimator):
    """LVEF-gated threshold rule on ``[lvef, ratios]`` feature rows.

    Echos with ``lvef >= lvef_high`` are normal, those with
    ``lvef <= lvef_low`` are MI; in between an echo is MI iff some segment
    ratio falls below ``threshold``.  With ``threshold="auto"`` ``fit`` picks
    the threshold that maximizes training accuracy (ties go to the value
    closest to the default).
    """

    def __init__(self, threshold=motion.DEFAULT_THRESHOLD, lvef_high=motion.LVEF_HIGH,
                 lvef_low=motion.LVEF_LOW):
        self.threshold = threshold
        self.lvef_high = lvef_high
        self.lvef_low = lvef_low

    def _check_X(self, X):
        X = check_array(X, ensure_all_finite="allow-nan")
        if X.shape[1] != len(FEATURE_NAMES):
            raise ValidationError(f"expected {len(FEATURE_NAMES)} features, got {X.shape[1]}")
        if np.any(np.isnan(X[:, 0])):
            raise ValidationError("lvef feature is missing")
        return X

    def _segments(self, X, threshold):
        lvef = X[:, 0]
        ratios = X[:, 1:]
        seg = np.where(np.isnan(ratios), False, ratios < threshold)
        seg[lvef >= self.lvef_high] = False
        seg[lvef <= self.lvef_low] = True
        return seg

    def fit(self, X, y):
        X = self._check_X(X)
        y = np.asarray(y)
        if y.shape != (X.shape[0],):
            raise ValidationError("y must hold one label per row")
        bad = set(np.unique(y)) - {motion.MI, motion.NORMAL}
        if bad:
            raise ValidationError(f"labels must be 'MI' or 'normal', got {sorted(bad)}")
        if not 0 < self.lvef_low < self.lvef_high < 1:
            raise ValidationError("gates must satisfy 0 < lvef_low < lvef_high < 1")
        self.classes_ = np.array([motion.MI, motion.NORMAL], dtype=object)
        if isinstance(self.threshold, str):
            if self.threshold != "auto":
                raise ValidationError(f"threshold must be a number or 'auto', got {self.threshold!r}")
            self.threshold_ = self._tune(X, y == motion.MI)
        else:
            self.threshold_ = float(self.threshold)
            if not 0 < self.threshold_ < 1:
                raise ValidationError("threshold must lie in (0, 1)")
        self.n_features_in_ = X.shape[1]
        return self

    def _tune(self, X, positive):
        r = X[:, 1:]
        values = np.unique(r[np.isfinite(r)])
        cands = np.concatenate([[motion.DEFAULT_THRESHOLD], 0.5 * (values[1:] + values[:-1]),
                                values[:1] * 0.5, values[-1:] + 1e-6])
        cands = cands[(cands > 0) & (cands < 1)]
        best, best_key = motion.DEFAULT_THRESHOLD, None
        for c in cands:
            acc = np.mean(self._segments(X, c).any(axis=1) == positive)
            key = (acc, -abs(c - motion.DEFAULT_THRESHOLD))
            if best_key is None or key > best_key:
                best, best_key = float(c), key
        return best

    def predict_segments(self, X) -> np.ndarray:
        """Boolean ``(n, 6)`` infarction flags for segments 1, 2, 3, 5, 6, 7."""
        check_is_fitted(self, "threshold_")
        return self._segments(self._check_X(X), self.threshold_)

    def predict(self, X) -> np.ndarray:
        seg = self.predict_segments(X)
        return np.where(seg.any(axis=1), motion.MI, motion.NORMAL).astype(object)
