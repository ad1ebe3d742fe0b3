"""Density cross-checks against scipy, draw moments, and numeric guards."""

import math

import numpy as np
import pytest
import scipy.stats as sps
from hypothesis import given, settings, strategies as st

from infactor.dists import (
    Bernoulli,
    Beta,
    Categorical,
    Gamma,
    InverseGamma,
    MvNormal,
    Normal,
    NumericError,
    ParameterError,
    Poisson,
    StudentT,
    Uniform,
    cholesky_solve_posterior,
    log_normalize,
    spd_cholesky,
    symmetrize,
)
from infactor.rng import RngStream

positive = st.floats(min_value=0.05, max_value=50.0, allow_nan=False)
reals = st.floats(min_value=-30.0, max_value=30.0, allow_nan=False)


# -- scipy agreement ---------------------------------------------------------


@given(shape=positive, rate=positive, x=st.floats(min_value=1e-3, max_value=80.0))
def test_gamma_density_matches_scipy(shape, rate, x):
    ours = Gamma(shape, rate).log_density(x)
    ref = sps.gamma.logpdf(x, shape, scale=1.0 / rate)
    assert ours == pytest.approx(ref, rel=1e-12, abs=1e-10)


@given(shape=positive, scale=positive, x=st.floats(min_value=1e-3, max_value=80.0))
def test_invgamma_density_matches_scipy(shape, scale, x):
    ours = InverseGamma(shape, scale).log_density(x)
    ref = sps.invgamma.logpdf(x, shape, scale=scale)
    assert ours == pytest.approx(ref, rel=1e-12, abs=1e-10)


@given(a=positive, b=positive, x=st.floats(min_value=1e-3, max_value=1 - 1e-3))
def test_beta_density_matches_scipy(a, b, x):
    assert Beta(a, b).log_density(x) == pytest.approx(
        sps.beta.logpdf(x, a, b), rel=1e-12, abs=1e-10
    )


@given(mean=reals, var=positive, x=reals)
def test_normal_density_matches_scipy(mean, var, x):
    assert Normal(mean, var).log_density(x) == pytest.approx(
        sps.norm.logpdf(x, mean, math.sqrt(var)), rel=1e-12, abs=1e-10
    )


@given(dof=positive, loc=reals, scale=positive, x=reals)
def test_student_t_squared_scale_matches_scipy(dof, loc, scale, x):
    ours = StudentT(dof, loc, scale).log_density(x)
    ref = sps.t.logpdf(x, dof, loc=loc, scale=math.sqrt(scale))
    assert ours == pytest.approx(ref, rel=1e-12, abs=1e-10)


def test_student_t_is_invgamma_normal_mixture():
    # StudentT(2a, 0, b/a) must equal the scale mixture of N(0, v), v ~ IG(a, b)
    a, b, x = 3.0, 2.0, 1.3
    from tests._oracles import gl_log_axis, log_invgamma_pdf, log_normal_pdf

    v, w = gl_log_axis(1e-6, 1e4, n=4000)
    mix = float(np.exp(log_invgamma_pdf(v, a, b) + log_normal_pdf(x, 0.0, v)) @ w)
    assert StudentT(2 * a, 0.0, b / a).log_density(x) == pytest.approx(
        math.log(mix), abs=1e-9
    )


@given(rate=positive, k=st.integers(min_value=0, max_value=60))
def test_poisson_mass_matches_scipy(rate, k):
    assert Poisson(rate).log_density(k) == pytest.approx(
        sps.poisson.logpmf(k, rate), rel=1e-12, abs=1e-10
    )


def test_mvn_density_matches_scipy():
    rng = np.random.default_rng(0)
    for _ in range(20):
        k = int(rng.integers(1, 5))
        A = rng.standard_normal((k, k))
        cov = A @ A.T + 0.5 * np.eye(k)
        mean = rng.standard_normal(k)
        x = rng.standard_normal(k)
        ours = MvNormal(mean, cov).log_density(x)
        ref = sps.multivariate_normal.logpdf(x, mean, cov)
        assert ours == pytest.approx(ref, rel=1e-10, abs=1e-9)


# -- support boundaries ------------------------------------------------------


def test_out_of_support_values_give_minus_inf():
    assert Gamma(2, 1).log_density(0.0) == -np.inf
    assert Gamma(2, 1).log_density(-1.0) == -np.inf
    assert Beta(2, 2).log_density(1.0) == -np.inf
    assert Bernoulli(0.3).log_density(2) == -np.inf
    assert Poisson(1.0).log_density(-1) == -np.inf
    assert Poisson(1.0).log_density(1.5) == -np.inf
    assert Uniform().log_density(1.0) == -np.inf
    assert Normal(0, 1).log_density(np.inf) == -np.inf


def test_bad_parameters_rejected():
    with pytest.raises(ParameterError):
        Gamma(0.0, 1.0)
    with pytest.raises(ParameterError):
        Gamma(1.0, -2.0)
    with pytest.raises(ParameterError):
        Normal(np.nan, 1.0)
    with pytest.raises(ParameterError):
        Bernoulli(1.5)
    with pytest.raises(ParameterError):
        MvNormal(np.zeros(2), np.array([[1.0, 0.5], [0.4, 1.0]]))


# -- draws hit their analytic moments ---------------------------------------


@pytest.mark.parametrize(
    "spec,mean,var",
    [
        (Gamma(3.0, 2.0), 1.5, 0.75),
        (InverseGamma(4.0, 6.0), 2.0, 2.0),
        (Beta(2.0, 6.0), 0.25, 0.25 * 0.75 / 9.0),
        (Normal(-1.0, 4.0), -1.0, 4.0),
        (Poisson(3.5), 3.5, 3.5),
    ],
)
def test_draw_moments(spec, mean, var):
    rng = RngStream(2024, (1,))
    n = 40000
    xs = np.array([spec.draw(rng) for _ in range(n)])
    se = math.sqrt(var / n)
    assert abs(xs.mean() - mean) < 5 * se


def test_categorical_draw_frequencies():
    spec = Categorical(np.log([0.2, 0.5, 0.3]))
    rng = RngStream(7, (2,))
    xs = np.array([spec.draw(rng) for _ in range(30000)])
    freqs = np.bincount(xs, minlength=3) / xs.size
    np.testing.assert_allclose(freqs, [0.2, 0.5, 0.3], atol=0.01)


def test_bernoulli_draw_frequency():
    spec = Bernoulli(0.73)
    rng = RngStream(7, (3,))
    xs = np.array([spec.draw(rng) for _ in range(20000)])
    assert abs(xs.mean() - 0.73) < 0.015


# -- log-space helpers -------------------------------------------------------


def test_log_normalize_sums_to_one():
    lp = log_normalize(np.array([-1000.0, -1001.0, -999.5]))
    assert np.exp(lp).sum() == pytest.approx(1.0, abs=1e-12)


def test_log_normalize_handles_minus_inf_entries():
    lp = log_normalize(np.array([0.0, -np.inf]))
    np.testing.assert_allclose(np.exp(lp), [1.0, 0.0])


def test_log_normalize_all_minus_inf_raises():
    with pytest.raises(NumericError):
        log_normalize(np.array([-np.inf, -np.inf]))


@given(st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=8))
def test_log_normalize_invariant_to_shift(lw):
    a = log_normalize(np.array(lw))
    b = log_normalize(np.array(lw) + 123.456)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_categorical_rejects_plus_inf_weight():
    with pytest.raises(ParameterError):
        Categorical(np.array([0.0, np.inf]))


# -- linear algebra ----------------------------------------------------------


def test_spd_cholesky_failure_reports_min_eigenvalue():
    m = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3 and -1
    with pytest.raises(NumericError) as err:
        spd_cholesky(m)
    assert err.value.min_eigenvalue == pytest.approx(-1.0, abs=1e-9)


def test_cholesky_solve_posterior_matches_direct_inverse():
    rng = np.random.default_rng(5)
    for _ in range(25):
        k = int(rng.integers(1, 6))
        A = rng.standard_normal((k, k))
        prec = A @ A.T + np.eye(k)
        lin = rng.standard_normal(k)
        mean, cov = cholesky_solve_posterior(prec, lin)
        np.testing.assert_allclose(cov, np.linalg.inv(prec), rtol=1e-9, atol=1e-11)
        np.testing.assert_allclose(mean, np.linalg.solve(prec, lin), rtol=1e-9, atol=1e-11)
        np.testing.assert_array_equal(cov, cov.T)


def test_cholesky_solve_posterior_shape_errors():
    with pytest.raises(ParameterError):
        cholesky_solve_posterior(np.eye(2), np.zeros(3))
    with pytest.raises(ParameterError):
        cholesky_solve_posterior(np.zeros((2, 3)), np.zeros(2))


def test_symmetrize():
    m = np.array([[1.0, 2.0], [0.0, 1.0]])
    s = symmetrize(m)
    np.testing.assert_array_equal(s, s.T)
    np.testing.assert_allclose(s, [[1.0, 1.0], [1.0, 1.0]])


@settings(max_examples=25)
@given(st.integers(min_value=1, max_value=5), st.integers(min_value=0, max_value=10**6))
def test_spd_cholesky_batched_matches_loop(k, seed):
    rng = np.random.default_rng(seed)
    stack = np.empty((3, k, k))
    for i in range(3):
        A = rng.standard_normal((k, k))
        stack[i] = A @ A.T + np.eye(k)
    batched = spd_cholesky(stack)
    for i in range(3):
        np.testing.assert_allclose(batched[i], np.linalg.cholesky(stack[i]), atol=1e-12)
