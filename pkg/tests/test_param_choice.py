import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oversmooth.core import Grid, PenaltySpec, Signal, SmoothnessSpec
from oversmooth.exceptions import InvalidParameterError, NoBracketError
from oversmooth.operators import IdentityOperator, MatrixOperator
from oversmooth.param_choice import RateParameters, apriori_deterministic, apriori_stochastic, discrepancy_search
from oversmooth.solver import SolverOptions

QUAD0 = PenaltySpec(0.0, 2, 2, 2)


def test_theta_one_classical_rule():
    sp = SmoothnessSpec(2.0, 2.0, 2.0, rho=3.0)
    assert sp.theta == 1.0
    assert apriori_deterministic(0.01, sp, 2.0, 5.0) == pytest.approx(5.0 * 3.0**-2 * 0.01**2)


def test_deterministic_substitution():
    sp = SmoothnessSpec(0.5, 0.0, 1.0)
    assert sp.theta == 0.5
    assert apriori_deterministic(0.01, sp, 1.0, 1.0) == pytest.approx(1e-6, rel=1e-12)


def test_deterministic_vanishes():
    sp = SmoothnessSpec(0.5, 2.0, 2.0)
    assert apriori_deterministic(1e-12, sp, 1.0, 1.0) < 1e-20


def test_stochastic_exponents():
    rp = RateParameters(SmoothnessSpec(0.5, 2, 2), 1.0)
    assert rp.sigma_exponent == pytest.approx(13 / 6)
    assert rp.rho_exponent_stoch == pytest.approx(-7 / 6)
    assert rp.error_rate == pytest.approx(1 / 6)
    rp = RateParameters(SmoothnessSpec(6 / 7, 2, 2), 1.0)
    assert rp.sigma_exponent == pytest.approx(96 / 47)


def test_eta_and_bias_rate():
    rp = RateParameters(SmoothnessSpec(0.5, 2, 2), 1.0)
    assert rp.eta == pytest.approx(8 / 3.5)
    th = 0.625
    assert rp.bias_rate == pytest.approx(th / ((1 - th) + 2 * th))
    with pytest.raises(InvalidParameterError):
        RateParameters(SmoothnessSpec(0.5, 0.0, 0.25), 1.0).eta


@given(st.floats(1e-3, 1e-1), st.floats(0.2, 2.0), st.floats(0.0, 3.0), st.floats(0.5, 3.0),
       st.sampled_from([1.0, 2.0]))
def test_property_power_laws(sigma, s_frac, a, r, u):
    sp = SmoothnessSpec(s_frac * r / 2.0, a, r, rho=1.7)
    rp = RateParameters(sp, u)
    ratio = apriori_stochastic(2 * sigma, sp, u, 1.3) / apriori_stochastic(sigma, sp, u, 1.3)
    assert ratio == pytest.approx(2.0**rp.sigma_exponent, rel=1e-10)
    ratio = apriori_deterministic(3 * sigma, sp, u, 0.7) / apriori_deterministic(sigma, sp, u, 0.7)
    assert ratio == pytest.approx(3.0**rp.delta_exponent, rel=1e-10)


def test_rule_inputs_validated():
    sp = SmoothnessSpec(0.5, 2, 2)
    with pytest.raises(InvalidParameterError):
        apriori_stochastic(0.0, sp, 1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        apriori_deterministic(0.1, sp, 1.0, -1.0)
    with pytest.raises(InvalidParameterError):
        RateParameters(sp, 0.0)


def _identity_problem(n=64, seed=0):
    # unit weights so that the quadratic penalty and the fidelity use the same inner product
    return IdentityOperator(n), np.random.default_rng(seed).standard_normal(n)


def test_discrepancy_identity_closed_form():
    op, g = _identity_problem()
    norm_g = np.linalg.norm(g)
    delta = 0.2 * norm_g
    opts = SolverOptions(layout=(4, 4), inner_tol=1e-15, max_inner=20000)
    alpha, rep = discrepancy_search(op, g, delta, 1.5, 2.0, QUAD0, None, opts)
    closed = alpha / (1 + alpha) * norm_g
    assert 1.5 * delta <= closed <= 2.0 * delta
    assert rep.residual == pytest.approx(closed, rel=1e-6)
    np.testing.assert_allclose(rep.estimate, g / (1 + alpha), atol=1e-6)


def test_discrepancy_no_bracket():
    op, g = _identity_problem()
    norm_g = np.linalg.norm(g)
    with pytest.raises(NoBracketError):
        discrepancy_search(op, g, norm_g / 1.5, 1.5, 2.0, QUAD0, None, SolverOptions(layout=(4, 4)))


def test_discrepancy_window_validation():
    op, g = _identity_problem()
    with pytest.raises(InvalidParameterError):
        discrepancy_search(op, g, 0.1, 0.9, 2.0, QUAD0, None, SolverOptions(layout=(4, 4)))
    with pytest.raises(InvalidParameterError):
        discrepancy_search(op, g, 0.1, 1.5, 1.2, QUAD0, None, SolverOptions(layout=(4, 4)))


@given(st.integers(0, 2**32 - 1), st.sampled_from([(1, 1, 1), (2, 1, 1), (2, 2, 2)]))
def test_property_discrepancy_window_or_raise(seed, pqu):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((20, 16)) / 4
    x = rng.standard_normal(16)
    e = rng.standard_normal(20)
    delta = rng.uniform(0.01, 0.5)
    g = A @ x + delta * e / np.linalg.norm(e)
    op = MatrixOperator(A)
    opts = SolverOptions(layout=(2, 3), inner_tol=1e-13, max_inner=20000)
    try:
        alpha, rep = discrepancy_search(op, g, delta, 1.5, 2.0, PenaltySpec(1, *pqu), None, opts,
                                        alpha0=rng.uniform(1e-3, 1e3))
    except NoBracketError:
        return
    assert 1.5 * delta <= rep.residual <= 2.0 * delta


def test_apriori_window_bounded_factor():
    # F = I wavelet shrinkage; alpha and 3 alpha give errors within a bounded factor across noise levels
    from oversmooth.estimators import WaveletShrinkage
    from oversmooth.core import sample
    n = 1024
    grid = Grid(n)
    truth = sample("jump", grid).values
    sp = SmoothnessSpec(0.5, 0.0, 1.0)
    rng = np.random.default_rng(0)
    for sig_t in np.logspace(-3, -1, 5):
        noisy = truth + sig_t * rng.standard_normal(n)
        alpha = apriori_stochastic(sig_t / math.sqrt(n), sp, 1.0, 1.0)
        errs = []
        for a in (alpha, 3 * alpha):
            est = WaveletShrinkage(alpha=a, r=1.0).fit_transform(noisy[None, :])[0]
            errs.append(np.sqrt(np.mean((est - truth) ** 2)))
        assert max(errs) / min(errs) < 5
