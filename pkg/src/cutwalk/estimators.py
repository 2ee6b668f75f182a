"""scikit-learn style wrappers around the functional API.

The core of the package (simulation, detection, races) is not fit/predict
shaped, so only three pieces are wrapped:

* :class:`CutFeatureTransformer` -- trajectories to cut-count features;
* :class:`LogGrowthRegressor` -- least squares against ``log x`` and friends;
* :class:`IncrementMomentEstimator` -- binned increment moments of a path.
"""
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._validation import check_hk, check_increasing
from .cuts import count_disjoint_cut_intervals, detect_cutpoints
from .experiments import FIT_MODELS, _transform, fit_log_growth
from .process import empirical_increment_moments
from .trajectory import VectorTrajectory, as_trajectory


class CutFeatureTransformer(TransformerMixin, BaseEstimator):
    """Map each trajectory to cut counts below a set of checkpoints.

    Parameters
    ----------
    checkpoints : sequence of float
        Increasing levels ``x``.
    h, k : float, int
        Cut-interval parameters.
    W : float, optional
        Confirmation window (default ``50 B``).
    confirmed : bool, default True
        Count only CONFIRMED structures (else CANDIDATE ones too).

    The output row for a trajectory is
    ``[#(Cs cap [0, x_1]), ..., #(Cs cap [0, x_m]), I(x_1), ..., I(x_m)]``
    where ``I`` counts disjoint (h, k) cut intervals.
    """

    def __init__(self, checkpoints=(128.0, 1024.0), h=1.0, k=1, W=None, confirmed=True):
        self.checkpoints = checkpoints
        self.h = h
        self.k = k
        self.W = W
        self.confirmed = confirmed

    def fit(self, X, y=None):
        self.checkpoints_ = check_increasing(self.checkpoints)
        check_hk(self.h, self.k)
        self.n_features_out_ = 2 * self.checkpoints_.size
        return self

    def transform(self, X):
        check_is_fitted(self, "checkpoints_")
        cps = self.checkpoints_
        rows = []
        for t in X:
            t = as_trajectory(t)
            if isinstance(t, VectorTrajectory):
                t = t.norms()
            rep = detect_cutpoints(t, self.W)
            keep = rep.cut_strong & (rep.cut_confirmed if self.confirmed else True)
            strong = np.searchsorted(np.sort(rep.cut_values[keep]), cps, side="right")
            conf, cand = count_disjoint_cut_intervals(t, self.h, self.k, cps, self.W)
            rows.append(np.concatenate([strong, conf if self.confirmed else cand]))
        return np.asarray(rows, dtype=np.float64).reshape(len(rows), self.n_features_out_)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "checkpoints_")
        return np.array([f"strong_le_{c:g}" for c in self.checkpoints_]
                        + [f"intervals_le_{c:g}" for c in self.checkpoints_], dtype=object)


class LogGrowthRegressor(RegressorMixin, BaseEstimator):
    """OLS of ``y`` on ``log x``, ``log log x`` or ``1/log^2 x``.

    Attributes
    ----------
    coef_, intercept_ : float
    r2_ : float
    ci_ : (float, float)
        95% slope interval.
    """

    def __init__(self, model="log"):
        self.model = model

    def fit(self, X, y):
        if self.model not in FIT_MODELS:
            raise ValueError(f"model must be one of {FIT_MODELS}")
        X, y = check_X_y(X, y, ensure_min_samples=3)
        if X.shape[1] != 1:
            raise ValueError("X must have a single column of levels")
        order = np.argsort(X[:, 0], kind="stable")
        fit = fit_log_growth(np.column_stack([X[order, 0], y[order]]), self.model)
        self.coef_, self.intercept_ = fit.slope, fit.intercept
        self.r2_, self.ci_, self.fit_ = fit.r2, fit.ci, fit
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return self.intercept_ + self.coef_ * _transform(X[:, 0], self.model)


class IncrementMomentEstimator(BaseEstimator):
    """Binned sample moments of increments (vector paths via their norms).

    Parameters
    ----------
    bins : array_like
        Bin edges covering the trajectory's range.

    Attributes
    ----------
    moments_ : IncrementMoments
    mu1_, mu2_ : ndarray
        Per-bin means of ``Delta`` and ``Delta^2``.
    """

    def __init__(self, bins):
        self.bins = bins

    def fit(self, X, y=None):
        self.moments_ = empirical_increment_moments(X, self.bins)
        self.mu1_ = self.moments_.mean
        self.mu2_ = self.moments_.mean_sq
        return self

    def scaled_drift(self):
        """Per-bin ``mean(2 X Delta) / mean(Delta^2)``, the ratio the regimes compare with 1."""
        check_is_fitted(self, "moments_")
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.moments_.mean_scaled / self.mu2_
