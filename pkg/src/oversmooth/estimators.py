"""scikit-learn style wrappers.

Each row of ``X`` is one observed data vector on the midpoint grid of
``[0, 1]``; the row length must be a power of two.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import RHS, Grid, PenaltySpec, Signal, is_power_of_two, level_index, sample
from .exceptions import InvalidParameterError
from .operators import EllipticOperator, IdentityOperator
from .prox import prox_bv_1d, soft_threshold, _block_shrink
from .solver import SolverOptions, minimize_tikhonov
from .wavelet import WaveletSpec, dwt, idwt


def _check_rows(est, X, reset: bool):
    X = check_array(X, dtype=np.float64, ensure_min_features=2)
    n = X.shape[1]
    if reset:
        if not is_power_of_two(n):
            raise InvalidParameterError(("n_features", "power of two required"))
        est.n_features_in_ = n
    elif n != est.n_features_in_:
        raise ValueError(f"X has {n} features, but {type(est).__name__} was fitted with {est.n_features_in_}")
    return X


class TikhonovEstimator(BaseEstimator):
    """Tikhonov reconstruction with a Besov or BV penalty.

    ``transform`` returns the reconstructed parameter for every row and
    ``predict`` the fitted data ``F(f_alpha)``.

    Parameters
    ----------
    alpha : float
        Regularization parameter.
    operator : {"identity", "elliptic"}
        Forward model; ``"elliptic"`` maps a coefficient ``c`` to the
        solution of ``-u'' + c u = phi`` with unit boundary values.
    rhs : str
        Right-hand side ``phi`` of the elliptic problem.
    penalty_r, penalty_p, penalty_q, penalty_u : float
        Besov penalty ``(1/u) ||.||^u`` in ``b^r_{p,q}``.
    penalty_kind : {"besov-sequence", "bv-1d"}
    wavelet_order : int
        Daubechies order.
    max_outer, max_inner, tol : int, int, float
        Solver caps and inner tolerance.
    """

    def __init__(self, alpha=1e-3, operator="identity", rhs="one", penalty_r=2.0, penalty_p=2.0,
                 penalty_q=1.0, penalty_u=1.0, penalty_kind="besov-sequence", wavelet_order=7,
                 max_outer=50, max_inner=2000, tol=1e-9):
        self.alpha = alpha
        self.operator = operator
        self.rhs = rhs
        self.penalty_r = penalty_r
        self.penalty_p = penalty_p
        self.penalty_q = penalty_q
        self.penalty_u = penalty_u
        self.penalty_kind = penalty_kind
        self.wavelet_order = wavelet_order
        self.max_outer = max_outer
        self.max_inner = max_inner
        self.tol = tol

    def _build(self, n):
        grid = Grid(n)
        if self.operator == "identity":
            return IdentityOperator.on_grid(grid)
        if self.operator == "elliptic":
            return EllipticOperator(sample(self.rhs, grid, RHS))
        raise InvalidParameterError(("operator", "must be 'identity' or 'elliptic'"))

    def fit(self, X, y=None):
        X = _check_rows(self, X, reset=True)
        if not self.alpha > 0:
            raise InvalidParameterError(("alpha", "must be positive"))
        if self.penalty_kind == "bv-1d":
            self.penalty_ = PenaltySpec.bv()
            self.wavelet_ = None
        else:
            self.penalty_ = PenaltySpec(self.penalty_r, self.penalty_p, self.penalty_q, self.penalty_u)
            self.wavelet_ = WaveletSpec(self.wavelet_order)
        self.operator_ = self._build(X.shape[1])
        self.reports_ = [self._solve(row) for row in X]
        self.estimates_ = np.array([r.estimate for r in self.reports_])
        return self

    def _solve(self, row):
        opts = SolverOptions(max_outer=self.max_outer, max_inner=self.max_inner, inner_tol=self.tol)
        g = Signal(Grid(row.size), row)
        return minimize_tikhonov(self.operator_, g, self.alpha, self.penalty_, self.wavelet_, opts)

    def transform(self, X):
        check_is_fitted(self, "operator_")
        X = _check_rows(self, X, reset=False)
        return np.array([self._solve(row).estimate for row in X])

    def predict(self, X):
        est = self.transform(X)
        return np.array([self.operator_.apply(p) for p in est])

    def fit_transform(self, X, y=None):
        return self.fit(X).estimates_


class WaveletShrinkage(BaseEstimator, TransformerMixin):
    """Level-dependent wavelet shrinkage, the closed-form Tikhonov estimator for ``F = I``.

    ``mode="soft"`` thresholds each coefficient at ``alpha 2^{j(r - 1/2)}``
    (penalty ``b^r_{1,1}``); ``mode="block"`` shrinks each level as a block
    at ``alpha 2^{jr}`` (penalty ``b^r_{2,1}``).
    """

    def __init__(self, alpha=0.01, r=1.0, mode="soft", wavelet_order=7):
        self.alpha = alpha
        self.r = r
        self.mode = mode
        self.wavelet_order = wavelet_order

    def fit(self, X, y=None):
        X = _check_rows(self, X, reset=True)
        if self.mode not in ("soft", "block"):
            raise InvalidParameterError(("mode", "must be 'soft' or 'block'"))
        if not self.alpha >= 0:
            raise InvalidParameterError(("alpha", "must be nonnegative"))
        w = WaveletSpec(self.wavelet_order)
        self.levels_ = w.levels_for(X.shape[1])
        coarse = X.shape[1] >> self.levels_
        self.level_index_ = level_index(coarse, self.levels_)
        j = np.arange(max(self.levels_, 1), dtype=float)
        exponent = self.r - 0.5 if self.mode == "soft" else self.r
        self.thresholds_ = self.alpha * 2.0 ** (j * exponent)
        return self

    def transform(self, X):
        check_is_fitted(self, "thresholds_")
        X = _check_rows(self, X, reset=False)
        n = X.shape[1]
        scale = np.sqrt(1.0 / n)
        out = np.empty_like(X)
        for i, row in enumerate(X):
            x = scale * dwt(row, self.wavelet_order, self.levels_)
            if self.mode == "soft":
                x = soft_threshold(x, self.thresholds_[self.level_index_])
            else:
                x = _block_shrink(x, self.level_index_, self.thresholds_)
            out[i] = idwt(x, self.wavelet_order, self.levels_) / scale
        return out


class TVDenoiser(BaseEstimator, TransformerMixin):
    """Exact minimizer of ``1/(2 alpha) ||g - z||_{L^2}^2 + |z|_TV + ||z||_{L^1}`` (1D BV norm).

    ``pure_tv=True`` drops the ``L^1`` term.
    """

    def __init__(self, alpha=0.01, pure_tv=False):
        self.alpha = alpha
        self.pure_tv = pure_tv

    def fit(self, X, y=None):
        _check_rows(self, X, reset=True)
        if not self.alpha >= 0:
            raise InvalidParameterError(("alpha", "must be nonnegative"))
        self.h_ = 1.0 / self.n_features_in_
        return self

    def transform(self, X):
        check_is_fitted(self, "h_")
        X = _check_rows(self, X, reset=False)
        lam = self.alpha / self.h_
        return np.array([prox_bv_1d(row, lam, self.h_, self.pure_tv) for row in X])
