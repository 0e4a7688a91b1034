"""Periodized orthonormal Daubechies wavelet transforms on [0, 1].

``analyze``/``synthesize`` are orthogonal on sample vectors (Parseval holds
for the plain Euclidean norm). The ``*_function`` variants scale by
``sqrt(h)`` so that coefficient norms match the ``L^2(0,1)`` norm of the
sampled function, which is the normalization the Besov sequence weights
expect.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, sqrt

import numpy as np

from .core import CoeffTree, Grid, Signal
from .exceptions import SizeMismatchError, UnsupportedOrderError

MAX_ORDER = 10


@lru_cache(maxsize=None)
def _daubechies(order: int) -> np.ndarray:
    if order == 1:
        return np.array([1.0, 1.0]) / sqrt(2.0)
    # |Q|^2 = P(y) with y = sin^2(w/2) = (2 - z - 1/z) / 4
    P = [comb(order - 1 + k, k) for k in range(order)]
    y_roots = np.roots(P[::-1])
    z_roots = []
    for y in y_roots:
        # z + 1/z = 2 - 4y; keep the root inside the unit circle
        b = 2.0 - 4.0 * y
        disc = np.sqrt(b * b - 4.0 + 0j)
        z1, z2 = (b + disc) / 2.0, (b - disc) / 2.0
        z_roots.append(z1 if abs(z1) < 1.0 else z2)
    q = np.real(np.poly(z_roots))
    h = np.convolve(q, np.real(np.poly(-np.ones(order))))
    h = h[::-1] if abs(h[0]) < abs(h[-1]) else h
    return h * (sqrt(2.0) / h.sum())


def daubechies_filter(order: int) -> np.ndarray:
    """Lowpass filter of the Daubechies wavelet with ``order`` vanishing moments.

    Built by spectral factorization, choosing the minimum-phase root of each
    conjugate pair. Normalized so that ``sum(h) == sqrt(2)``.
    """
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_ORDER:
        raise UnsupportedOrderError(f"Daubechies order must be an integer in 1..{MAX_ORDER}, got {order!r}")
    return _daubechies(int(order)).copy()


def highpass(lowpass: np.ndarray) -> np.ndarray:
    k = np.arange(lowpass.size)
    return (-1.0) ** k * lowpass[::-1]


def filter_residuals(h: np.ndarray) -> dict:
    """Deviation of ``h`` from each defining equation of an orthonormal dbN filter."""
    order = h.size // 2
    k = np.arange(h.size)
    t = k / max(h.size - 1, 1)  # normalized abscissa keeps high moments well scaled
    shifts = [abs(np.dot(h[2 * m:], h[: h.size - 2 * m])) for m in range(1, order)]
    moments = [abs(np.sum((-1.0) ** k * t**m * h)) for m in range(order)]
    return {
        "sum": abs(h.sum() - sqrt(2.0)),
        "energy": abs(np.dot(h, h) - 1.0),
        "shift_orthogonality": max(shifts, default=0.0),
        "vanishing_moments": max(moments),
    }


def coarse_length(order: int) -> int:
    """Smallest power of two holding a full filter, ``>= 2 * order``."""
    length = 1
    while length < 2 * order:
        length *= 2
    return length


@dataclass(frozen=True, eq=False)
class WaveletSpec:
    order: int = 7
    max_level: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "lowpass", daubechies_filter(self.order))

    @property
    def coarse_len(self) -> int:
        return coarse_length(self.order)

    def levels_for(self, n: int) -> int:
        """Number of detail levels used for a signal of length ``n``."""
        if n < self.coarse_len or n % self.coarse_len:
            raise SizeMismatchError(f"signal length {n} is incompatible with coarse length {self.coarse_len}")
        full = int(np.log2(n // self.coarse_len))
        if (self.coarse_len << full) != n:
            raise SizeMismatchError(f"signal length {n} is not coarse length times a power of two")
        if self.max_level is None:
            return full
        if self.max_level > full:
            raise SizeMismatchError(f"max_level {self.max_level} exceeds {full} available levels for n={n}")
        return self.max_level


@lru_cache(maxsize=64)
def _plan(order: int, n: int, levels: int):
    h = daubechies_filter(order)
    bank = np.stack([h, highpass(h)], axis=1)
    steps = []
    length = n
    for _ in range(levels):
        idx = (2 * np.arange(length // 2)[:, None] + np.arange(h.size)[None, :]) % length
        steps.append((length, idx, idx.ravel()))
        length //= 2
    return bank, steps


def dwt(values: np.ndarray, order: int, levels: int) -> np.ndarray:
    """Flat forward transform: ``[scaling, detail_0 (coarse), ..., detail_{J-1}]``."""
    values = np.asarray(values, dtype=float)
    bank, steps = _plan(order, values.size, levels)
    out = np.empty_like(values)
    approx = values
    for length, idx, _ in steps:
        ad = approx[idx] @ bank
        out[length // 2:length] = ad[:, 1]
        approx = ad[:, 0]
    out[: approx.size] = approx
    return out


def idwt(coeffs: np.ndarray, order: int, levels: int) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    bank, steps = _plan(order, coeffs.size, levels)
    approx = coeffs[: coeffs.size >> levels]
    for length, idx, flat in reversed(steps):
        half = length // 2
        ad = np.stack([approx, coeffs[half:length]], axis=1)
        approx = np.bincount(flat, weights=(ad @ bank.T).ravel(), minlength=length)
    return approx.copy() if levels == 0 else approx


def analyze(f: Signal, w: WaveletSpec) -> CoeffTree:
    """Orthogonal wavelet analysis of the sample vector of ``f``."""
    n = f.values.size
    levels = w.levels_for(n)
    return CoeffTree.from_vector(dwt(f.values, w.order, levels), n >> levels, levels)


def synthesize(x: CoeffTree, w: WaveletSpec, grid: Grid | None = None) -> Signal:
    """Inverse of :func:`analyze`."""
    n = x.size
    grid = Grid(n) if grid is None else grid
    if grid.n != n:
        raise SizeMismatchError(f"tree of size {n} does not match grid of size {grid.n}")
    if w.levels_for(n) != x.max_level:
        raise SizeMismatchError(
            f"tree has {x.max_level} levels, wavelet spec expects {w.levels_for(n)} for n={n}")
    return Signal(grid, idwt(x.to_vector(), w.order, x.max_level))


def analyze_function(f: Signal, w: WaveletSpec) -> CoeffTree:
    """Coefficients normalized to the ``L^2(0,1)`` norm of the sampled function."""
    tree = analyze(f, w)
    return tree.like(tree.to_vector() * sqrt(f.grid.h))


def synthesize_function(x: CoeffTree, w: WaveletSpec, grid: Grid | None = None) -> Signal:
    sig = synthesize(x, w, grid)
    return sig.with_values(sig.values / sqrt(sig.grid.h))
