"""Regularization parameter rules: a-priori (deterministic and white-noise) and
the discrepancy principle."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import PenaltySpec, SmoothnessSpec
from .exceptions import InvalidParameterError, NoBracketError, NonMonotoneError
from .operators import ForwardOp
from .solver import SolveReport, SolverOptions, _as_data, minimize_tikhonov


@dataclass(frozen=True)
class RateParameters:
    """Exponents of the parameter choice rules for a smoothness class and power ``u``."""

    spec: SmoothnessSpec
    u: float = 1.0

    def __post_init__(self):
        if not self.u > 0:
            raise InvalidParameterError(("u", "must be positive"))

    @property
    def delta_exponent(self) -> float:
        th = self.spec.theta
        return ((1.0 - th) * self.u + 2.0 * th) / th

    @property
    def rho_exponent_det(self) -> float:
        return -self.u / self.spec.theta

    @property
    def _denom(self) -> float:
        sp = self.spec
        return sp.s + sp.a + sp.d / 2.0

    @property
    def sigma_exponent(self) -> float:
        sp = self.spec
        return ((2.0 - self.u) * sp.s + 2.0 * sp.a + self.u * sp.r) / self._denom

    @property
    def rho_exponent_stoch(self) -> float:
        sp = self.spec
        return -(self.u * (sp.a + sp.r + sp.d / 2.0) - sp.d) / self._denom

    @property
    def eta(self) -> float:
        sp = self.spec
        denom = (sp.a + sp.r + sp.d / 2.0) * self.u - sp.d
        if not denom > 0:
            raise InvalidParameterError(("u", "white-noise rule needs (a + r + d/2) u > d"))
        return self.u * (2.0 * sp.a + 2.0 * sp.r) / denom

    @property
    def error_rate(self) -> float:
        """Exponent of ``sigma`` in the white-noise rate ``sigma^{s/(s+a+d/2)}``."""
        return self.spec.s / self._denom

    @property
    def bias_rate(self) -> float:
        """Exponent of ``alpha`` in the exact-data bound ``||f - f_alpha||_minus = O(alpha^{theta/((1-theta)u+2theta)})``."""
        return 1.0 / self.delta_exponent


def _positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise InvalidParameterError((name, "must be positive and finite"))


def apriori_deterministic(delta: float, spec: SmoothnessSpec, u: float, c: float) -> float:
    """``alpha = c rho^{-u/theta} delta^{((1-theta)u + 2 theta)/theta}``."""
    _positive("delta", delta)
    _positive("c", c)
    rp = RateParameters(spec, u)
    return c * spec.rho**rp.rho_exponent_det * delta**rp.delta_exponent


def apriori_stochastic(sigma: float, spec: SmoothnessSpec, u: float, c_alpha: float) -> float:
    """White-noise rule ``alpha = c_alpha rho^{-(u(a+r+d/2)-d)/(s+a+d/2)} sigma^{((2-u)s+2a+ur)/(s+a+d/2)}``."""
    _positive("sigma", sigma)
    _positive("c_alpha", c_alpha)
    rp = RateParameters(spec, u)
    return c_alpha * spec.rho**rp.rho_exponent_stoch * sigma**rp.sigma_exponent


def discrepancy_search(op: ForwardOp, g_obs, delta: float, c_D: float, C_D: float,
                       penalty: PenaltySpec, w=None, opts: SolverOptions | None = None,
                       alpha0: float = 1.0, max_bisections: int = 60, max_expansions: int = 30,
                       monotone_rtol: float = 1e-6) -> tuple[float, SolveReport]:
    """Find ``alpha`` with ``c_D delta <= ||g_obs - F(f_alpha)|| <= C_D delta``.

    The residual is bracketed by stepping ``alpha`` a decade at a time from
    ``alpha0``, then the window is located by bisection in ``log alpha``.
    Every solve is warm-started from the nearest previous solution.

    Raises
    ------
    NoBracketError
        The residual range does not straddle the window.
    NonMonotoneError
        A bisection midpoint produced a residual outside its bracket.
    """
    _positive("delta", delta)
    bad = []
    if not c_D > 1:
        bad.append(("c_D", "must exceed 1"))
    if not C_D >= c_D:
        bad.append(("C_D", "must be at least c_D"))
    if bad:
        raise InvalidParameterError(bad)
    base = opts or SolverOptions()
    lo_t, hi_t = c_D * delta, C_D * delta
    if op.linear:
        g, _ = _as_data(g_obs)
        sup = math.sqrt(op.data_weight * float(np.dot(g, g)))
        if sup <= lo_t:
            raise NoBracketError(f"residual stays below ||g_obs|| = {sup:.4g} <= c_D delta = {lo_t:.4g}")

    cache: dict[float, SolveReport] = {}

    def solve(alpha):
        x0 = base.x0
        if cache:
            near = min(cache, key=lambda a: abs(math.log(a / alpha)))
            x0 = cache[near].coefficients
        rep = minimize_tikhonov(op, g_obs, alpha, penalty, w, replace(base, x0=x0))
        cache[alpha] = rep
        return rep

    def inside(rep):
        return lo_t <= rep.residual <= hi_t

    alpha = float(alpha0)
    rep = solve(alpha)
    if inside(rep):
        return alpha, rep
    lo = hi = None
    if rep.residual < lo_t:
        lo = (alpha, rep)
        for _ in range(max_expansions):
            alpha *= 10.0
            rep = solve(alpha)
            if inside(rep):
                return alpha, rep
            if rep.residual > hi_t:
                hi = (alpha, rep)
                break
            lo = (alpha, rep)
    else:
        hi = (alpha, rep)
        for _ in range(max_expansions):
            alpha /= 10.0
            rep = solve(alpha)
            if inside(rep):
                return alpha, rep
            if rep.residual < lo_t:
                lo = (alpha, rep)
                break
            hi = (alpha, rep)
    if lo is None or hi is None:
        raise NoBracketError(
            f"residual never crossed the window [{lo_t:.4g}, {hi_t:.4g}] within {max_expansions} decades")

    for _ in range(max_bisections):
        alpha = math.sqrt(lo[0] * hi[0])
        rep = solve(alpha)
        tol = monotone_rtol * hi_t
        if rep.residual < lo[1].residual - tol or rep.residual > hi[1].residual + tol:
            raise NonMonotoneError(
                f"residual {rep.residual:.6g} at alpha={alpha:.4g} leaves its bracket "
                f"[{lo[1].residual:.6g}, {hi[1].residual:.6g}]")
        if inside(rep):
            return alpha, rep
        if rep.residual < lo_t:
            lo = (alpha, rep)
        else:
            hi = (alpha, rep)
    raise NoBracketError(f"bisection did not reach the window in {max_bisections} steps")
