"""Proximal maps of the supported penalties.

Tree-level functions take per-level weights; :class:`Penalty` binds a
:class:`PenaltySpec` to a coefficient layout and works on flat vectors,
which is what the solver iterates on.
"""
from __future__ import annotations

import numpy as np

from .core import CoeffTree, PenaltySpec, Signal
from .exceptions import InvalidParameterError, UnsupportedPenaltyError
from .norms import SeqNormSpec, besov_seq_norm_flat, bv_seminorm_1d


def soft_threshold(x, thresh):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


def _check_lam(lam):
    if not lam >= 0:
        raise InvalidParameterError(("lambda", "must be nonnegative"))


def prox_weighted_l1(x: CoeffTree, lam: float, weights) -> CoeffTree:
    """Coefficientwise soft threshold at ``lam * weights[j]``."""
    _check_lam(lam)
    w = np.asarray(weights, dtype=float)[x.level_index()]
    return x.like(soft_threshold(x.to_vector(), lam * w))


def _block_shrink(vec, lidx, thresh_per_level):
    norms = np.sqrt(np.bincount(lidx, weights=vec * vec, minlength=thresh_per_level.size))
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(norms > 0, np.maximum(1.0 - thresh_per_level / norms, 0.0), 0.0)
    return vec * factor[lidx]


def prox_block_l1(x: CoeffTree, lam: float, weights) -> CoeffTree:
    """Per-level block soft threshold ``x_j max(1 - lam w_j / ||x_j||, 0)``."""
    _check_lam(lam)
    w = np.asarray(weights, dtype=float)
    return x.like(_block_shrink(x.to_vector(), x.level_index(), lam * w))


def prox_l2_sq(x: CoeffTree, lam: float, weights) -> CoeffTree:
    """``x / (1 + lam w_j)`` with ``w_j = 2^{2jr}``."""
    _check_lam(lam)
    w = np.asarray(weights, dtype=float)[x.level_index()]
    return x.like(x.to_vector() / (1.0 + lam * w))


def _tv_condat(y, lam):
    # direct 1D TV denoising, Condat (2013)
    n = len(y)
    x = [0.0] * n
    k = k0 = kplus = kminus = 0
    mlam, twolam = -lam, 2.0 * lam
    umin, umax = lam, mlam
    vmin, vmax = y[0] - lam, y[0] + lam
    while True:
        while k == n - 1:
            if umin < 0.0:
                while k0 <= kminus:
                    x[k0] = vmin
                    k0 += 1
                k = kminus = k0
                vmin = y[k]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while k0 <= kplus:
                    x[k0] = vmax
                    k0 += 1
                k = kplus = k0
                vmax = y[k]
                umax = mlam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                while k0 <= k:
                    x[k0] = vmin
                    k0 += 1
                return x
        umin += y[k + 1] - vmin
        if umin < mlam:
            while k0 <= kminus:
                x[k0] = vmin
                k0 += 1
            k = kminus = kplus = k0
            vmin = y[k]
            vmax = vmin + twolam
            umin, umax = lam, mlam
        else:
            umax += y[k + 1] - vmax
            if umax > lam:
                while k0 <= kplus:
                    x[k0] = vmax
                    k0 += 1
                k = kminus = kplus = k0
                vmax = y[k]
                vmin = vmax - twolam
                umin, umax = lam, mlam
            else:
                k += 1
                if umin >= lam:
                    kminus = k
                    vmin += (umin - lam) / (kminus - k0 + 1)
                    umin = lam
                if umax <= mlam:
                    kplus = k
                    vmax += (umax + lam) / (kplus - k0 + 1)
                    umax = mlam


def tv_denoise(values, lam: float) -> np.ndarray:
    """Exact ``argmin_z 1/2 ||z - values||^2 + lam sum |z_{i+1} - z_i|``."""
    _check_lam(lam)
    values = np.asarray(values, dtype=float)
    if lam == 0 or values.size < 2:
        return values.copy()
    return np.array(_tv_condat(values.tolist(), float(lam)))


def prox_tv_1d(f: Signal, lam: float) -> Signal:
    return f.with_values(tv_denoise(f.values, lam))


def prox_bv_1d(values, lam: float, h: float, pure_tv: bool = False) -> np.ndarray:
    """Prox of ``lam (TV + h ||.||_1)``: TV prox, then soft shrinkage by ``lam h``."""
    z = tv_denoise(values, lam)
    return z if pure_tv else soft_threshold(z, lam * h)


class Penalty:
    """``(1/u) ||x||^u`` of a :class:`PenaltySpec` on a fixed layout.

    For Besov penalties ``x`` is a flat coefficient vector with level index
    ``level_idx``. For ``bv-1d`` it is the vector of samples and ``h`` the
    mesh width.
    """

    def __init__(self, spec: PenaltySpec, level_idx=None, h: float | None = None, d: int = 1,
                 pure_tv: bool = False):
        self.spec = spec
        self.pure_tv = pure_tv
        if spec.kind == "bv-1d":
            if h is None:
                raise InvalidParameterError(("h", "required for bv-1d penalties"))
            self.h = float(h)
            return
        if level_idx is None:
            raise InvalidParameterError(("level_idx", "required for Besov penalties"))
        self.level_idx = np.asarray(level_idx)
        self.levels = int(self.level_idx.max()) + 1
        self.norm_spec = SeqNormSpec(spec.r, spec.p, spec.q, d)
        self.level_w = self.norm_spec.level_weights(self.levels)
        self.coef_w = self.level_w[self.level_idx]
        pqu = (float(spec.p), float(spec.q), float(spec.u))
        self.mode = {(1.0, 1.0, 1.0): "l1", (2.0, 1.0, 1.0): "block", (2.0, 2.0, 2.0): "l2sq"}.get(pqu)

    @property
    def is_bv(self) -> bool:
        return self.spec.kind == "bv-1d"

    def norm(self, x) -> float:
        if self.is_bv:
            tv = bv_seminorm_1d(x)
            return tv if self.pure_tv else tv + self.h * float(np.sum(np.abs(x)))
        if self.mode == "l1":
            return float(np.dot(self.coef_w, np.abs(x)))
        return besov_seq_norm_flat(x, self.level_idx, self.norm_spec)

    def value(self, x) -> float:
        return self.norm(x) ** self.spec.u / self.spec.u

    def prox(self, x, lam: float) -> np.ndarray:
        """``argmin_z 1/2 ||z - x||^2 + lam * value(z)`` (Euclidean)."""
        if self.is_bv:
            return prox_bv_1d(x, lam, self.h, self.pure_tv)
        if self.mode == "l1":
            return soft_threshold(x, lam * self.coef_w)
        if self.mode == "block":
            return _block_shrink(x, self.level_idx, lam * self.level_w)
        if self.mode == "l2sq":
            return x / (1.0 + lam * self.coef_w**2)
        raise UnsupportedPenaltyError(
            f"no proximal map for b^r_{{p,q}} with (p, q, u) = ({self.spec.p}, {self.spec.q}, {self.spec.u})")
