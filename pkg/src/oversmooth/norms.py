"""Quasi-norms: Besov sequence norms, discrete L^p, 1D total variation, weak l^v."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CoeffTree, Signal
from .wavelet import WaveletSpec, analyze_function


@dataclass(frozen=True)
class SeqNormSpec:
    """Parameters of ``b^s_{p,q}``; ``p`` or ``q`` may be ``inf`` or below 1."""

    s: float
    p: float = 2.0
    q: float = 2.0
    d: int = 1

    def level_weights(self, levels: int) -> np.ndarray:
        j = np.arange(levels, dtype=float)
        inv_p = 0.0 if math.isinf(self.p) else 1.0 / self.p
        return 2.0 ** (j * self.s) * 2.0 ** (j * self.d * (0.5 - inv_p))


def _lp(values: np.ndarray, p: float) -> float:
    a = np.abs(values)
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(np.sqrt(np.dot(a, a)))
    return float(np.sum(a**p) ** (1.0 / p))


def level_lp_norms(vec: np.ndarray, level_idx: np.ndarray, p: float, levels: int) -> np.ndarray:
    """``||x_j||_p`` for every level of a flat coefficient vector."""
    a = np.abs(vec)
    if math.isinf(p):
        out = np.zeros(levels)
        np.maximum.at(out, level_idx, a)
        return out
    sums = np.bincount(level_idx, weights=a**p, minlength=levels)
    return sums ** (1.0 / p)


def besov_seq_norm_flat(vec, level_idx, spec: SeqNormSpec) -> float:
    vec = np.asarray(vec, dtype=float)
    if vec.size == 0:
        return 0.0
    levels = int(level_idx.max()) + 1
    terms = spec.level_weights(levels) * level_lp_norms(vec, level_idx, spec.p, levels)
    return _lp(terms, spec.q)


def besov_seq_norm(x: CoeffTree, spec: SeqNormSpec) -> float:
    """``|| (2^{js} 2^{jd(1/2-1/p)} ||x_j||_p)_j ||_q`` over the levels of ``x``."""
    return besov_seq_norm_flat(x.to_vector(), x.level_index(), spec)


def _values_and_h(f):
    if isinstance(f, Signal):
        return f.values, f.grid.h
    values = np.asarray(f, dtype=float)
    return values, 1.0 / values.size


def lp_norm(f, p: float) -> float:
    """Midpoint-rule ``L^p(0,1)`` norm, ``(h sum |f_i|^p)^{1/p}``; max for ``p = inf``."""
    values, h = _values_and_h(f)
    if math.isinf(p):
        return float(np.max(np.abs(values))) if values.size else 0.0
    return float((h * np.sum(np.abs(values) ** p)) ** (1.0 / p))


def bv_seminorm_1d(f) -> float:
    """Discrete total variation ``sum_i |f_{i+1} - f_i|``."""
    values, _ = _values_and_h(f)
    return float(np.sum(np.abs(np.diff(values))))


def bv_norm_1d(f) -> float:
    return lp_norm(f, 1.0) + bv_seminorm_1d(f)


def weak_lp_quasinorm(x, v: float) -> float:
    """Weak ``l^v`` quasi-norm, ``(max_k k |x|_(k)^v)^{1/v}`` over the decreasing rearrangement."""
    if not v > 0:
        raise ValueError("v must be positive")
    a = np.sort(np.abs(np.asarray(x, dtype=float)).ravel())[::-1]
    if a.size == 0 or a[0] == 0:
        return 0.0
    k = np.arange(1, a.size + 1)
    return float(np.max(k * a**v) ** (1.0 / v))


def besov_error_norm(f: Signal, spec: SeqNormSpec, w: WaveletSpec) -> float:
    """Sequence-space Besov norm of the (L^2-normalized) wavelet coefficients of ``f``."""
    return besov_seq_norm(analyze_function(f, w), spec)
