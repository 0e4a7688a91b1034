"""Tikhonov minimization ``1/(2 alpha) ||g - F(h)||^2 + (1/u) ||h||^u``.

The unknown is represented either by (L^2-normalized) wavelet coefficients,
for Besov penalties, or by its samples, for the BV penalty and for
sequence-space models. Linear operators are handled by monotone FISTA with
momentum restart; nonlinear ones by Gauss-Newton with an inner FISTA solve of
the linearized problem and a step-halving line search on the true objective.
The Gauss-Newton subproblem carries a Levenberg-Marquardt proximal term whose
weight adapts to the ratio of actual to predicted decrease, and trial
parameters are projected onto the admissible floor ``c >= c_min``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import CoeffTree, PenaltySpec, Signal
from .exceptions import InvalidParameterError, SizeMismatchError, UnsupportedPenaltyError
from .operators import ForwardOp
from .prox import Penalty
from .wavelet import WaveletSpec, dwt, idwt


@dataclass
class SolverOptions:
    max_outer: int = 50
    max_inner: int = 2000
    inner_tol: float = 1e-9
    outer_tol: float = 1e-9
    max_halvings: int = 30
    power_iterations: int = 30
    lipschitz_safety: float = 1.1
    damping: float = 1e-3
    pure_tv: bool = False
    x0: Optional[np.ndarray] = None
    layout: Optional[tuple] = None


@dataclass
class SolveReport:
    """Result of a Tikhonov solve.

    ``minimizer`` is a :class:`CoeffTree` for coefficient representations and a
    :class:`Signal` (or plain vector) for sample representations; ``estimate``
    is always the parameter vector fed to the operator.
    """

    minimizer: object
    coefficients: np.ndarray
    estimate: np.ndarray
    objective_trace: np.ndarray
    residual: float
    iterations: tuple
    converged: bool
    status: str
    alpha: float
    penalty_value: float
    step: float = field(default=float("nan"), repr=False)

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


# ---------------------------------------------------------------------------
# representations

class _WaveletBasis:
    """``x -> p = idwt(x) / sqrt(w)``: an isometry from l^2 onto ``(R^n, w <.,.>)``."""

    metric = 1.0

    def __init__(self, spec: WaveletSpec, n: int, weight: float):
        self.order = spec.order
        self.levels = spec.levels_for(n)
        self.coarse_len = n >> self.levels
        self.scale = math.sqrt(weight)

    def to_param(self, x):
        return idwt(x, self.order, self.levels) / self.scale

    def adjoint(self, v):
        return self.scale * dwt(v, self.order, self.levels)

    from_param = adjoint

    def level_idx(self):
        return CoeffTree.zeros(self.coarse_len, self.levels).level_index()


class _IdentityBasis:
    def __init__(self, weight: float):
        self.metric = weight

    @staticmethod
    def to_param(x):
        return x

    @staticmethod
    def adjoint(v):
        return v

    from_param = adjoint


def _as_data(g_obs):
    if isinstance(g_obs, Signal):
        return g_obs.values, g_obs.grid
    if isinstance(g_obs, CoeffTree):
        return g_obs.to_vector(), g_obs
    return np.asarray(g_obs, dtype=float), None


def _setup(op: ForwardOp, g_obs, penalty: PenaltySpec, w, opts: SolverOptions):
    g, carrier = _as_data(g_obs)
    n = op.domain_size
    if penalty.kind == "bv-1d":
        if w is not None:
            raise InvalidParameterError(("w", "the BV penalty acts on samples; pass w=None"))
        basis = _IdentityBasis(op.domain_weight)
        pen = Penalty(penalty, h=1.0 / n, pure_tv=opts.pure_tv)
        layout = None
    else:
        if not penalty.solver_supported:
            raise UnsupportedPenaltyError(
                f"minimization supports (p, q, u) in {{(1,1,1), (2,1,1), (2,2,2)}}, got "
                f"({penalty.p}, {penalty.q}, {penalty.u})")
        if w is not None:
            basis = _WaveletBasis(w, n, op.domain_weight)
            layout = (basis.coarse_len, basis.levels)
        else:
            basis = _IdentityBasis(op.domain_weight)
            if opts.layout is not None:
                layout = tuple(opts.layout)
            elif isinstance(carrier, CoeffTree) and carrier.size == n:
                layout = (carrier.coarse_len, carrier.max_level)
            else:
                raise InvalidParameterError(("layout", "needed for Besov penalties without a wavelet spec"))
            if layout[0] << layout[1] != n:
                raise SizeMismatchError(f"layout {layout} does not match operator domain size {n}")
        pen = Penalty(penalty, level_idx=CoeffTree.zeros(*layout).level_index())
    return g, carrier, basis, pen, layout


def _power_norm_sq(J, Jt, metric, size, iters):
    v = np.random.default_rng(12345).standard_normal(size)
    v /= math.sqrt(metric * np.dot(v, v))
    est = 0.0
    for _ in range(iters):
        u = Jt(J(v))
        est = metric * float(np.dot(v, u))
        nu = math.sqrt(metric * np.dot(u, u))
        if nu == 0:
            return 0.0
        v = u / nu
    return max(est, nu)


def _fista(J, Jt, b, x0, alpha, wy, pen: Penalty, metric, L, max_iter, tol, damping=0.0):
    """Monotone FISTA with restart on ``(wy / 2 alpha) ||b - J x||^2 + pen(x)``.

    ``damping > 0`` adds the proximal term ``damping/2 ||x - x0||_metric^2``.
    """
    c = wy / (2.0 * alpha)
    center = np.array(x0, dtype=float)
    half_mu = 0.5 * damping * metric

    def fval(Jx, x):
        r = Jx - b
        val = c * float(np.dot(r, r)) + pen.value(x)
        if damping:
            d = x - center
            val += half_mu * float(np.dot(d, d))
        return val

    x = np.array(x0, dtype=float)
    Jx = J(x)
    fx = fval(Jx, x)
    trace = [fx]
    if L <= 0:
        return x, Jx, trace, 0, True, 0.0
    y, Jy, t = x, Jx, 1.0
    step = 1.0 / (L + damping)
    rejected = 0
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        grad = Jt(Jy - b) / alpha
        if damping:
            grad = grad + damping * (y - center)
        z = pen.prox(y - step * grad, step / metric)
        Jz = J(z)
        fz = fval(Jz, z)
        if fz <= fx:
            decrease = fx - fz
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_new
            y = z + beta * (z - x)
            Jy = Jz + beta * (Jz - Jx)
            x, Jx, fx, t = z, Jz, fz, t_new
            trace.append(fx)
            rejected = 0
            if decrease <= tol * abs(fx):
                converged = True
                break
        else:
            rejected += 1
            if rejected >= 2:
                # plain prox-gradient step failed: step too long for this curvature
                step *= 0.5
                if rejected > 40:
                    converged = True
                    break
            y, Jy, t = x, Jx, 1.0
    return x, Jx, trace, it, converged, step


def _residual(g, value, wy):
    r = g - value
    return math.sqrt(wy * float(np.dot(r, r)))


def _wrap(vec, carrier, layout, basis):
    if layout is not None and isinstance(basis, _WaveletBasis):
        return CoeffTree.from_vector(vec, *layout)
    if isinstance(carrier, CoeffTree) and layout is not None:
        return CoeffTree.from_vector(vec, *layout)
    if hasattr(carrier, "n") and carrier.n == vec.size:
        return Signal(carrier, vec)
    return vec.copy()


def minimize_tikhonov(op: ForwardOp, g_obs, alpha: float, penalty: PenaltySpec,
                      w: WaveletSpec | None = None, opts: SolverOptions | None = None) -> SolveReport:
    """Minimize ``1/(2 alpha) ||g_obs - F(h)||_Y^2 + (1/u) ||h||^u``.

    Parameters
    ----------
    op : ForwardOp
        Forward operator; ``op.data_weight`` defines ``||.||_Y``.
    g_obs : Signal, CoeffTree or ndarray
        Observed data.
    alpha : float
        Regularization parameter, positive.
    penalty : PenaltySpec
        Besov penalty with ``(p, q, u)`` in ``{(1,1,1), (2,1,1), (2,2,2)}`` or
        the 1D BV norm.
    w : WaveletSpec, optional
        Represent the unknown by wavelet coefficients. Without it the unknown
        is represented by its samples (sequence models, BV penalty).
    opts : SolverOptions, optional

    Returns
    -------
    SolveReport
    """
    if not alpha > 0:
        raise InvalidParameterError(("alpha", "must be positive"))
    opts = opts or SolverOptions()
    g, carrier, basis, pen, layout = _setup(op, g_obs, penalty, w, opts)
    wy = op.data_weight
    n = op.domain_size
    metric = basis.metric

    if opts.x0 is not None:
        x = np.array(opts.x0, dtype=float)
        if x.size != n:
            raise SizeMismatchError(f"initial guess has {x.size} entries, expected {n}")
    else:
        level = float(np.mean(g)) if g.size else 0.0
        if op.c_min is not None:
            level = max(level, op.c_min)
        x = basis.from_param(np.full(n, level))

    if op.linear:
        J = lambda v: op.apply(basis.to_param(v))
        Jt = lambda r: basis.adjoint(op.adjoint(r))
        L = opts.lipschitz_safety * _power_norm_sq(J, Jt, metric, n, opts.power_iterations) / alpha
        x, Jx, trace, inner, ok, step = _fista(J, Jt, g, x, alpha, wy, pen, metric, L,
                                               opts.max_inner, opts.inner_tol)
        status = "converged" if ok else "iteration-cap"
        p = basis.to_param(x)
        return SolveReport(_wrap(x, carrier, layout, basis), x, p, np.asarray(trace),
                           _residual(g, Jx, wy), (1, inner), ok, status, float(alpha),
                           pen.value(x), step)

    def objective(value, xx):
        return _residual(g, value, wy) ** 2 / (2.0 * alpha) + pen.value(xx)

    p = basis.to_param(x)
    if op.c_min is not None and np.min(p) < op.c_min:
        p = np.maximum(p, op.c_min)
        x = basis.from_param(p)
    lin = op.linearize(p)
    obj = objective(lin.value, x)
    trace = [obj]
    inner_total = 0
    converged, status, step = False, "iteration-cap", float("nan")
    outer = 0
    mu = None
    for outer in range(1, opts.max_outer + 1):
        J = lambda v, lin=lin: lin.derivative(basis.to_param(v))
        Jt = lambda r, lin=lin: basis.adjoint(lin.adjoint(r))
        b = g - lin.value + J(x)
        L = opts.lipschitz_safety * _power_norm_sq(J, Jt, metric, n, opts.power_iterations) / alpha
        if mu is None:
            mu = opts.damping * L
        x_lin, Jx_lin, _, inner, _, step = _fista(J, Jt, b, x, alpha, wy, pen, metric, L,
                                                  opts.max_inner, opts.inner_tol, mu)
        inner_total += inner
        predicted = obj - objective(g - b + Jx_lin, x_lin)
        lam, accepted = 1.0, False
        for _ in range(opts.max_halvings):
            xt = x + lam * (x_lin - x)
            pt = basis.to_param(xt)
            if op.c_min is not None and np.min(pt) < op.c_min:
                # the representation is an isometry, so clipping samples is the exact projection
                pt = np.maximum(pt, op.c_min)
                xt = basis.from_param(pt)
            lin_t = op.linearize(pt)
            val = objective(lin_t.value, xt)
            if val <= obj:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            status = "no-descent"
            break
        decrease = obj - val
        # Levenberg-Marquardt style update of the damping
        if lam < 1.0 or decrease < 0.25 * predicted:
            mu *= 4.0 if lam == 1.0 else 4.0 / lam
        elif decrease > 0.75 * predicted:
            mu /= 3.0
        x, p, lin, obj = xt, pt, lin_t, val
        trace.append(obj)
        if decrease <= opts.outer_tol * abs(obj):
            converged, status = True, "converged"
            break
    value = op.apply(p)
    return SolveReport(_wrap(x, carrier, layout, basis), x, p, np.asarray(trace),
                       _residual(g, value, wy), (outer, inner_total), converged, status,
                       float(alpha), pen.value(x), step)


def minimize_tikhonov_whitenoise(op: ForwardOp, g_obs, alpha: float, penalty: PenaltySpec,
                                 w: WaveletSpec | None = None,
                                 opts: SolverOptions | None = None) -> SolveReport:
    """Same minimizer as :func:`minimize_tikhonov`, objective reported with the
    fidelity ``1/2 ||F(h)||^2 - <g_obs, F(h)>`` (which drops ``1/2 ||g_obs||^2``)."""
    report = minimize_tikhonov(op, g_obs, alpha, penalty, w, opts)
    g, _ = _as_data(g_obs)
    shift = op.data_weight * float(np.dot(g, g)) / (2.0 * alpha)
    report.objective_trace = report.objective_trace - shift
    return report


def tikhonov_objective(op: ForwardOp, g_obs, alpha: float, penalty: PenaltySpec, param,
                       w: WaveletSpec | None = None, layout=None) -> float:
    """Objective value at a parameter vector (samples, or sequence for sequence models)."""
    opts = SolverOptions(layout=layout)
    g, _, basis, pen, _ = _setup(op, g_obs, penalty, w, opts)
    param = np.asarray(param.values if isinstance(param, Signal) else param, dtype=float)
    x = basis.from_param(param)
    return _residual(g, op.apply(param), op.data_weight) ** 2 / (2.0 * alpha) + pen.value(x)


def fixed_point_residual(op: ForwardOp, g_obs, report: SolveReport, penalty: PenaltySpec,
                         w: WaveletSpec | None = None, layout=None) -> float:
    """``||x - prox(x - step grad(x))||`` at a linear-operator solution."""
    opts = SolverOptions(layout=layout)
    g, _, basis, pen, _ = _setup(op, g_obs, penalty, w, opts)
    x = report.coefficients
    step = report.step
    grad = basis.adjoint(op.adjoint(op.apply(basis.to_param(x)) - g)) / report.alpha
    return float(np.linalg.norm(x - pen.prox(x - step * grad, step / basis.metric)))
