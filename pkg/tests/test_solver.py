import numpy as np
import pytest
from hypothesis import given, strategies as st

from oversmooth.core import RHS, CoeffTree, Grid, PenaltySpec, Signal, sample
from oversmooth.exceptions import InvalidParameterError, UnsupportedPenaltyError
from oversmooth.operators import EllipticOperator, IdentityOperator, MatrixOperator
from oversmooth.prox import soft_threshold
from oversmooth.solver import (SolverOptions, fixed_point_residual, minimize_tikhonov,
                               minimize_tikhonov_whitenoise, tikhonov_objective)
from oversmooth.wavelet import WaveletSpec, analyze_function

QUAD0 = PenaltySpec(0.0, 2, 2, 2)
TIGHT = SolverOptions(inner_tol=1e-15, max_inner=20000)


def _identity_data(n=256, seed=0):
    g = Grid(n)
    return IdentityOperator.on_grid(g), Signal(g, np.random.default_rng(seed).standard_normal(n))


@pytest.mark.parametrize("alpha", [1e-3, 0.5, 7.0])
def test_identity_quadratic_closed_form(alpha):
    op, g = _identity_data()
    rep = minimize_tikhonov(op, g, alpha, QUAD0, WaveletSpec(3), TIGHT)
    np.testing.assert_allclose(rep.estimate, g.values / (1 + alpha), atol=1e-8)
    assert rep.converged


def test_identity_small_alpha_recovers_data():
    op, g = _identity_data()
    rep = minimize_tikhonov(op, g, 1e-9, PenaltySpec(1, 1, 1, 1), WaveletSpec(4))
    np.testing.assert_allclose(rep.estimate, g.values, atol=1e-6)


def test_identity_l1_is_level_soft_threshold():
    # F = I with a b^r_{1,1} penalty: wavelet soft thresholding at alpha 2^{j(r - 1/2)}
    op, g = _identity_data(seed=5)
    w = WaveletSpec(5)
    alpha, r = 0.05, 1.0
    rep = minimize_tikhonov(op, g, alpha, PenaltySpec(r, 1, 1, 1), w, TIGHT)
    coeffs = analyze_function(g, w)
    lidx = coeffs.level_index()
    expected = soft_threshold(coeffs.to_vector(), alpha * 2.0 ** (lidx * (r - 0.5)))
    np.testing.assert_allclose(rep.minimizer.to_vector(), expected, atol=1e-7)


def test_zero_data():
    op, g = _identity_data()
    rep = minimize_tikhonov(op, Signal(g.grid, np.zeros(256)), 1.0, QUAD0, WaveletSpec(2))
    assert np.all(rep.estimate == 0)


def test_bv_identity_matches_prox():
    from oversmooth.prox import prox_bv_1d
    op, g = _identity_data(n=128, seed=2)
    alpha = 0.01
    rep = minimize_tikhonov(op, g, alpha, PenaltySpec.bv(), None, TIGHT)
    expected = prox_bv_1d(g.values, alpha / g.grid.h, g.grid.h)
    np.testing.assert_allclose(rep.estimate, expected, atol=1e-6)


def test_whitenoise_entry_point():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((32, 32))
    op = MatrixOperator(A)
    g = rng.standard_normal(32)
    opts = SolverOptions(layout=(4, 3), inner_tol=1e-14, max_inner=20000)
    pen = PenaltySpec(1, 2, 1, 1)
    a = minimize_tikhonov(op, g, 0.3, pen, None, opts)
    b = minimize_tikhonov_whitenoise(op, g, 0.3, pen, None, opts)
    np.testing.assert_allclose(a.estimate, b.estimate, atol=1e-10)
    # S_g(F h) + 1/2 ||g||^2 equals the standard fidelity
    np.testing.assert_allclose(b.objective + np.dot(g, g) / (2 * 0.3), a.objective, rtol=1e-10)


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e2), st.sampled_from([(1, 1, 1), (2, 1, 1), (2, 2, 2)]))
def test_property_fixed_point_and_monotone_trace(seed, alpha, pqu):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((24, 16)) / 4
    op = MatrixOperator(A, 1.0, 0.5)
    g = rng.standard_normal(24)
    opts = SolverOptions(layout=(2, 3), inner_tol=1e-14, max_inner=20000)
    pen = PenaltySpec(0.5, *pqu)
    rep = minimize_tikhonov(op, g, alpha, pen, None, opts)
    assert np.all(np.diff(rep.objective_trace) <= 1e-12 * np.abs(rep.objective_trace[:-1]))
    res = fixed_point_residual(op, g, rep, pen, layout=(2, 3))
    assert res <= 1e-6 * (1 + np.linalg.norm(rep.coefficients))


def test_residual_nondecreasing_in_alpha():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((40, 32)) / 6
    op = MatrixOperator(A)
    g = rng.standard_normal(40)
    opts = SolverOptions(layout=(4, 3), inner_tol=1e-14, max_inner=50000)
    for pen in (PenaltySpec(1, 1, 1, 1), PenaltySpec(1, 2, 1, 1), PenaltySpec(1, 2, 2, 2)):
        res = [minimize_tikhonov(op, g, a, pen, None, opts).residual for a in np.logspace(-3, 2, 11)]
        assert np.all(np.diff(res) >= -1e-7 * max(res))


def test_elliptic_exact_data_beats_truth():
    grid = Grid(128)
    op = EllipticOperator(sample("one", grid, RHS))
    truth = sample("jump", grid)
    g = Signal(grid, op.apply(truth.values))
    pen, w = PenaltySpec(2, 2, 1, 1), WaveletSpec(3)
    rep = minimize_tikhonov(op, g, 1e-6, pen, w, SolverOptions(max_outer=30))
    assert rep.objective <= tikhonov_objective(op, g, 1e-6, pen, truth, w)
    assert np.all(np.diff(rep.objective_trace) <= 0)
    assert np.min(rep.estimate) >= 0.0


def test_elliptic_bv_penalty():
    grid = Grid(128)
    op = EllipticOperator(sample("one", grid, RHS))
    truth = sample("jump", grid)
    g = Signal(grid, op.apply(truth.values))
    rep = minimize_tikhonov(op, g, 1e-8, PenaltySpec.bv(), None, SolverOptions(max_outer=20))
    assert np.all(np.diff(rep.objective_trace) <= 0)
    assert rep.residual < 1e-3


def test_errors():
    op, g = _identity_data(n=64)
    with pytest.raises(InvalidParameterError):
        minimize_tikhonov(op, g, 0.0, QUAD0, WaveletSpec(2))
    with pytest.raises(UnsupportedPenaltyError):
        minimize_tikhonov(op, g, 1.0, PenaltySpec(1, 0.5, 0.5, 1), WaveletSpec(2))
    with pytest.raises(InvalidParameterError):
        minimize_tikhonov(op, g, 1.0, QUAD0)
    with pytest.raises(InvalidParameterError):
        minimize_tikhonov(op, g, 1.0, PenaltySpec.bv(), WaveletSpec(2))


def test_coefficient_tree_data():
    tree = CoeffTree.from_vector(np.random.default_rng(1).standard_normal(32), 4, 3)
    op = IdentityOperator(32)
    rep = minimize_tikhonov(op, tree, 2.0, QUAD0, None, TIGHT)
    assert isinstance(rep.minimizer, CoeffTree)
    np.testing.assert_allclose(rep.estimate, tree.to_vector() / 3.0, atol=1e-8)


def test_initial_guess_projected_to_floor():
    grid = Grid(64)
    op = EllipticOperator(sample("one", grid, RHS))
    g = Signal(grid, op.apply(sample("jump", grid).values))
    w = WaveletSpec(2)
    x0 = analyze_function(Signal(grid, np.full(64, -1.0)), w).to_vector() / np.sqrt(grid.h)
    rep = minimize_tikhonov(op, g, 1e-4, PenaltySpec(2, 2, 1, 1), w, SolverOptions(x0=x0, max_outer=5))
    assert np.min(rep.estimate) >= 0.0
