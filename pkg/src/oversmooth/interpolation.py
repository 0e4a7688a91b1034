"""K-functionals between weighted sequence norms and smooth approximations.

With ``X_minus = b^{s}_{2,2}`` the substitution ``y = w h`` (``w`` the
minus-norm weights) turns ``K(t, f)`` into

    min_y  ||f~ - y||_2 + t * R(y / w),

whose minimizer lies on the regularization path of ``R``: soft thresholding
for ``b^r_{1,1}``, block soft thresholding for ``b^r_{2,1}`` and linear
shrinkage for ``b^r_{2,2}``. Minimizing over that one-parameter path is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .core import CoeffTree, SmoothnessSpec
from .exceptions import DegenerateFitError, InvalidParameterError, UnsupportedPairError
from .norms import SeqNormSpec, besov_seq_norm


@dataclass(frozen=True)
class KResult:
    t: float
    value: float
    minimizer: CoeffTree
    split: tuple

    @property
    def bound_gap(self) -> float:
        """``||f - h||_minus + t ||h||_R - value``; zero for the exact path solvers."""
        return self.split[0] + self.t * self.split[1] - self.value


@dataclass(frozen=True)
class SmoothApprox:
    t: float
    f_t: CoeffTree
    rho: float
    theta: float
    distance: float
    penalty: float

    def bounds_hold(self, slack: float = 1e-12) -> bool:
        """Check ``||f - f_t|| <= 2 rho t^theta`` and ``||f_t||_R <= 2 rho t^(theta - 1)``."""
        scale = 1.0 + slack
        return (self.distance <= 2 * self.rho * self.t**self.theta * scale
                and self.penalty <= 2 * self.rho * self.t ** (self.theta - 1) * scale)


def _pair_kind(minus: SeqNormSpec, r_spec: SeqNormSpec) -> str:
    if (minus.p, minus.q) != (2, 2):
        raise UnsupportedPairError("minus norm must be of type b^s_{2,2}")
    if r_spec.p < 1 or r_spec.q < 1:
        raise UnsupportedPairError("quasi-norm penalties (p or q below 1) are not supported")
    kinds = {(1, 1): "l1", (2, 1): "block", (2, 2): "l2"}
    kind = kinds.get((r_spec.p, r_spec.q))
    if kind is None:
        raise UnsupportedPairError(f"no K-functional solver for b^r_{{{r_spec.p},{r_spec.q}}} penalties")
    return kind


def _min_threshold_path(a: np.ndarray, rho: np.ndarray, t: float) -> float:
    """Optimal ``lambda`` for ``min ||a - soft(a, lambda rho)|| + t sum rho |soft(a, lambda rho)|``.

    ``a >= 0``. On each segment between breakpoints ``a_k / rho_k`` the
    objective is ``sqrt(lambda^2 P + E) + t (C - lambda P)``, convex in lambda.
    """
    bp = a / rho
    order = np.argsort(bp, kind="stable")
    bp, a_s, rho_s = bp[order], a[order], rho[order]
    m = a.size
    # segment i covers [b_{i-1}, b_i] with b_{-1} = 0; active set is k >= i
    P = np.concatenate([np.cumsum((rho_s**2)[::-1])[::-1], [0.0]])
    C = np.concatenate([np.cumsum((rho_s * a_s)[::-1])[::-1], [0.0]])
    E = np.concatenate([[0.0], np.cumsum(a_s**2)])
    lo = np.concatenate([[0.0], bp])
    hi = np.concatenate([bp, [np.inf]])

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = 1.0 - t * t * P
        stat = np.where(denom > 0, t * np.sqrt(E / denom), np.inf)
    inside = np.flatnonzero((stat > lo) & (stat < hi))
    lam = np.concatenate([[0.0], bp, stat[inside]])
    seg = np.concatenate([[0], np.arange(m), inside])
    vals = np.sqrt(lam * lam * P[seg] + E[seg]) + t * (C[seg] - lam * P[seg])
    best = int(np.argmin(vals))
    if m and math.sqrt(E[-1]) < vals[best]:
        return float(bp[-1])  # y = 0
    return float(lam[best])


def k_functional(f: CoeffTree, t: float, minus: SeqNormSpec, r_spec: SeqNormSpec) -> KResult:
    """``K(t, f) = inf_h ||f - h||_minus + t ||h||_R`` for decoupling sequence pairs."""
    if not t > 0:
        raise InvalidParameterError(("t", "must be positive"))
    kind = _pair_kind(minus, r_spec)
    vec = f.to_vector()
    lidx = f.level_index()
    levels = f.max_level if f.max_level else 1
    wm = minus.level_weights(levels)[lidx]
    vr = r_spec.level_weights(levels)
    ft = wm * vec

    if kind == "l1":
        rho = vr[lidx] / wm
        lam = _min_threshold_path(np.abs(ft), rho, t)
        y = np.sign(ft) * np.maximum(np.abs(ft) - lam * rho, 0.0)
    elif kind == "block":
        norms = np.sqrt(np.bincount(lidx, weights=ft * ft, minlength=levels))
        rho_lvl = vr / minus.level_weights(levels)
        lam = _min_threshold_path(norms, rho_lvl, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            shrink = np.where(norms > 0, np.maximum(1.0 - lam * rho_lvl / norms, 0.0), 0.0)
        y = ft * shrink[lidx]
    else:
        rho2 = (vr[lidx] / wm) ** 2

        def phi(log_mu):
            yy = ft / (1.0 + np.exp(log_mu) * rho2)
            return np.linalg.norm(ft - yy) + t * np.sqrt(np.sum(rho2 * yy * yy))

        grid = np.linspace(-60.0, 60.0, 241)
        vals = np.array([phi(g) for g in grid])
        k = int(np.argmin(vals))
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        res = optimize.minimize_scalar(phi, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
        y = ft / (1.0 + math.exp(res.x) * rho2)
        endpoints = {"zero": np.linalg.norm(ft), "full": t * np.sqrt(np.sum(rho2 * ft * ft))}
        if endpoints["zero"] < min(res.fun, vals[k]):
            y = np.zeros_like(ft)
        elif endpoints["full"] < min(res.fun, vals[k]):
            y = ft.copy()

    h = f.like(y / wm)
    dist = besov_seq_norm(f.like(vec - h.to_vector()), minus)
    pen = besov_seq_norm(h, r_spec)
    return KResult(float(t), dist + t * pen, h, (dist, pen))


def k_curve(f: CoeffTree, t_grid, minus: SeqNormSpec, r_spec: SeqNormSpec) -> np.ndarray:
    return np.array([k_functional(f, float(t), minus, r_spec).value for t in np.asarray(t_grid, float)])


def rho_from_grid(f: CoeffTree, theta: float, t_grid, minus, r_spec) -> float:
    """``max_t t^{-theta} K(t, f)`` over a finite grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    return float(np.max(t_grid**-theta * k_curve(f, t_grid, minus, r_spec)))


def smooth_approximation(f: CoeffTree, t: float, spec: SmoothnessSpec, minus: SeqNormSpec,
                         r_spec: SeqNormSpec, t_grid=None, rho: float | None = None) -> SmoothApprox:
    """Near-minimizer ``f_t`` of ``K(t, f)`` together with the budget ``rho``.

    ``rho`` defaults to the grid supremum of ``tau^{-theta} K(tau, f)``; the
    grid (default: 8 decades around ``t``) always includes ``t`` itself.
    """
    theta = spec.theta
    res = k_functional(f, t, minus, r_spec)
    if rho is None:
        grid = np.logspace(math.log10(t) - 4, math.log10(t) + 4, 33) if t_grid is None else np.asarray(t_grid, float)
        grid = np.union1d(grid, [t])
        rho = rho_from_grid(f, theta, grid, minus, r_spec)
    return SmoothApprox(float(t), res.minimizer, float(rho), theta, res.split[0], res.split[1])


def fit_power_law(t, k, regime=None) -> tuple:
    """Slope of ``log k`` against ``log t`` (optionally restricted to ``regime``) and ``max t^-slope k``."""
    t = np.asarray(t, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.all(k <= 0) or np.ptp(k) == 0:
        raise DegenerateFitError("K-functional is flat; no smoothness exponent can be fitted")
    mask = k > 0
    if regime is not None:
        mask &= (t >= regime[0]) & (t <= regime[1])
    if mask.sum() < 2:
        raise DegenerateFitError("fewer than two points in the fitting regime")
    slope = stats.linregress(np.log(t[mask]), np.log(k[mask])).slope
    return float(slope), float(np.max(t[k > 0] ** -slope * k[k > 0]))


def fit_smoothness(f: CoeffTree, minus: SeqNormSpec, r_spec: SeqNormSpec, t_grid, regime=None) -> tuple:
    """Fit ``(theta, rho)`` from the decay of ``K(t, f)``.

    Smoothness is a small-``t`` property, but on a finite tree ``K`` is exactly
    ``t ||f||_R`` below the finest threshold and saturates at ``||f||_minus``
    for large ``t``. Without an explicit ``regime`` the fit uses the lower
    half of the grid points strictly between those two limits.
    """
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    if t_grid.size < 10:
        raise InvalidParameterError(("t_grid", "needs at least 10 points"))
    k = k_curve(f, t_grid, minus, r_spec)
    if regime is None:
        full = besov_seq_norm(f, minus)
        linear = t_grid * besov_seq_norm(f, r_spec)
        active = np.flatnonzero((k < full * (1.0 - 1e-9)) & (k < linear * (1.0 - 1e-6)))
        if active.size >= 4:
            lo, hi = active[0], active[-1]
            regime = (t_grid[lo], t_grid[lo + (hi - lo) // 2])
    return fit_power_law(t_grid, k, regime)
