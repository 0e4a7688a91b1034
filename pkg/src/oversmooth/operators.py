"""Forward operators.

The nonlinear parameter-to-state map ``c -> u`` of ``-u'' + c u = phi`` on
(0, 1) with ``u(0) = u(1) = 1`` is discretized by central differences on the
midpoint grid; the boundary sits half a cell outside the first and last
node, so the Dirichlet value enters through a reflected ghost point
(``u_ghost = 2 - u_1``). The system stays symmetric tridiagonal and the
scheme is second order.

All adjoints are taken with respect to weighted inner products
``<a, b>_w = w * sum(a * b)``; operators carry the weights of their domain
and data spaces.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np
from scipy.linalg import lapack

from .core import Grid, Signal
from .exceptions import NonpositiveCoefficientError, SingularSystemError, SizeMismatchError


# ---------------------------------------------------------------------------
# tridiagonal machinery

class TridiagonalFactor:
    """``L D L^T`` factorization of the scaled BVP matrix ``h^2 (-d^2 + c)``."""

    def __init__(self, c: np.ndarray, h: float):
        c = np.asarray(c, dtype=float)
        if c.size < 2:
            raise SizeMismatchError("need at least two grid points")
        if np.min(c) < 0:
            raise NonpositiveCoefficientError(f"coefficient must be nonnegative, min is {np.min(c):.3g}")
        self.h = h
        self.diag = 2.0 + h * h * c
        self.diag[0] += 1.0
        self.diag[-1] += 1.0
        self.off = -np.ones(c.size - 1)
        d, e, info = lapack.dpttrf(self.diag, self.off)
        if info != 0:
            raise SingularSystemError(f"tridiagonal factorization failed (info={info})")
        self._d, self._e = d, e

    def solve_scaled(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``(A / h^2) z = rhs`` with homogeneous boundary data."""
        z, info = lapack.dpttrs(self._d, self._e, (self.h * self.h) * rhs)
        if info != 0:
            raise SingularSystemError(f"tridiagonal solve failed (info={info})")
        return z

    def matrix(self) -> np.ndarray:
        """Dense copy of the (scaled) matrix, for testing."""
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)


def bvp_matrix(c: np.ndarray, h: float) -> np.ndarray:
    """Dense matrix of the unscaled discrete operator ``-d^2 + c``."""
    return TridiagonalFactor(c, h).matrix() / (h * h)


def bvp_rhs(phi: np.ndarray, h: float, boundary: float = 1.0) -> np.ndarray:
    rhs = np.array(phi, dtype=float)
    rhs[0] += 2.0 * boundary / (h * h)
    rhs[-1] += 2.0 * boundary / (h * h)
    return rhs


def _solve_state(factor: TridiagonalFactor, phi: np.ndarray) -> np.ndarray:
    return factor.solve_scaled(bvp_rhs(phi, factor.h))


def solve_bvp(c: Signal, phi: Signal) -> Signal:
    """Discrete solution of ``-u'' + c u = phi``, ``u(0) = u(1) = 1``."""
    if c.grid.n != phi.grid.n:
        raise SizeMismatchError("coefficient and right-hand side live on different grids")
    factor = TridiagonalFactor(c.values, c.grid.h)
    return Signal(c.grid, _solve_state(factor, phi.values))


def forward_derivative(c: Signal, dc: Signal, u: Signal) -> Signal:
    """Frechet derivative ``w`` solving ``-w'' + c w = -dc u`` with zero boundary data."""
    factor = TridiagonalFactor(c.values, c.grid.h)
    return Signal(c.grid, factor.solve_scaled(-dc.values * u.values))


def forward_adjoint(c: Signal, r: Signal, u: Signal) -> Signal:
    """Adjoint of :func:`forward_derivative` in the h-weighted inner product."""
    factor = TridiagonalFactor(c.values, c.grid.h)
    return Signal(c.grid, -u.values * factor.solve_scaled(r.values))


# ---------------------------------------------------------------------------
# operator interface

class Linearization(ABC):
    """An operator frozen at a point: value plus derivative and its adjoint."""

    value: np.ndarray

    @abstractmethod
    def derivative(self, dp: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def adjoint(self, r: np.ndarray) -> np.ndarray: ...


class ForwardOp(ABC):
    """Forward operator ``F`` acting on parameter vectors.

    ``domain_weight`` and ``data_weight`` define the inner products in which
    :meth:`adjoint_derivative` is the adjoint. ``lipschitz`` optionally
    records ``(M1, M2, a)`` of the two-sided Lipschitz condition.
    """

    linear = False
    domain_weight = 1.0
    data_weight = 1.0
    c_min: Optional[float] = None
    lipschitz: Optional[tuple] = None

    @property
    @abstractmethod
    def domain_size(self) -> int: ...

    @abstractmethod
    def apply(self, p: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def linearize(self, p: np.ndarray) -> Linearization: ...

    def derivative(self, p, dp):
        return self.linearize(p).derivative(dp)

    def adjoint_derivative(self, p, r):
        return self.linearize(p).adjoint(r)


class _EllipticLinearization(Linearization):
    def __init__(self, factor: TridiagonalFactor, u: np.ndarray):
        self.factor = factor
        self.value = u

    def derivative(self, dp):
        return self.factor.solve_scaled(-dp * self.value)

    def adjoint(self, r):
        return -self.value * self.factor.solve_scaled(r)


class EllipticOperator(ForwardOp):
    """Parameter-to-state map ``c -> u`` for a fixed right-hand side."""

    def __init__(self, phi: Signal, c_min: float = 0.0, lipschitz=(None, None, 2.0)):
        self.phi = phi
        self.grid = phi.grid
        self.c_min = float(c_min)
        self.domain_weight = self.data_weight = phi.grid.h
        self.lipschitz = lipschitz
        self._cache_key = None
        self._cache = None

    @property
    def domain_size(self) -> int:
        return self.grid.n

    def linearize(self, p):
        p = np.asarray(p, dtype=float)
        key = p.tobytes()
        if key != self._cache_key:
            factor = TridiagonalFactor(p, self.grid.h)
            self._cache = _EllipticLinearization(factor, _solve_state(factor, self.phi.values))
            self._cache_key = key
        return self._cache

    def apply(self, p):
        return self.linearize(p).value.copy()


class _LinearLinearization(Linearization):
    def __init__(self, op, p):
        self.op = op
        self.value = op.apply(p)

    def derivative(self, dp):
        return self.op.apply(dp)

    def adjoint(self, r):
        return self.op.adjoint(r)


class LinearOp(ForwardOp):
    linear = True

    @abstractmethod
    def adjoint(self, r: np.ndarray) -> np.ndarray: ...

    def linearize(self, p):
        return _LinearLinearization(self, p)


def diagonal_apply(x, weights) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if x.shape != weights.shape:
        raise SizeMismatchError(f"shapes {x.shape} and {weights.shape} differ")
    return x * weights


class DiagonalOperator(LinearOp):
    """``x -> weights * x`` on sequences (weights 1: the embedding operator)."""

    def __init__(self, weights, weight: float = 1.0):
        self.weights = np.asarray(weights, dtype=float)
        self.domain_weight = self.data_weight = float(weight)

    @property
    def domain_size(self):
        return self.weights.size

    def apply(self, p):
        return diagonal_apply(p, self.weights)

    def adjoint(self, r):
        return diagonal_apply(r, self.weights)


class IdentityOperator(DiagonalOperator):
    def __init__(self, size: int, weight: float = 1.0):
        super().__init__(np.ones(size), weight)

    @classmethod
    def on_grid(cls, grid: Grid) -> "IdentityOperator":
        return cls(grid.n, grid.h)


class MatrixOperator(LinearOp):
    """Dense linear operator ``p -> A p``."""

    def __init__(self, matrix, domain_weight: float = 1.0, data_weight: float = 1.0):
        self.matrix = np.asarray(matrix, dtype=float)
        self.domain_weight = float(domain_weight)
        self.data_weight = float(data_weight)

    @property
    def domain_size(self):
        return self.matrix.shape[1]

    def apply(self, p):
        return self.matrix @ p

    def adjoint(self, r):
        return (self.data_weight / self.domain_weight) * (self.matrix.T @ r)


def level_decay_weights(level_idx: np.ndarray, a: float) -> np.ndarray:
    """Diagonal weights ``2^{-a j}`` on a flattened coefficient tree."""
    return 2.0 ** (-a * np.asarray(level_idx, dtype=float))
