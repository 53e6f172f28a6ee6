import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plansyntax.diffusion import Schedule, gauss_logprob, linear_betas, respace
from plansyntax.errors import (
    ConfigError,
    DimensionError,
    RespacingError,
    SpecParseError,
    ZeroStepsError,
)


def test_respacing_for_post_training():
    steps = respace("80,20,0,0", 1000)
    assert len(steps) == 100
    assert max(steps) < 500
    assert steps[0] == 0
    assert sum(1 for t in steps if t < 250) == 80


def test_respace_errors():
    with pytest.raises(ZeroStepsError):
        respace("0,0", 100)
    with pytest.raises(RespacingError):
        respace("a,b", 100)
    with pytest.raises(RespacingError):
        respace("3,,1", 100)
    with pytest.raises(RespacingError):
        respace("-1,2", 100)
    with pytest.raises(RespacingError):
        respace("30", 10)
    with pytest.raises(SpecParseError):
        respace("1;2", 100)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 10), min_size=1, max_size=5), st.integers(50, 400))
def test_respace_allocates_every_step(counts, num_timesteps):
    if sum(counts) == 0:
        return
    steps = respace(",".join(map(str, counts)), num_timesteps)
    assert len(steps) == sum(counts)
    assert steps == sorted(steps)
    assert 0 <= steps[0] and steps[-1] < num_timesteps


def test_linear_betas():
    betas = linear_betas(10, 1e-4, 0.02)
    assert betas[0] == pytest.approx(1e-4)
    assert betas[-1] == pytest.approx(0.02)
    with pytest.raises(ConfigError):
        linear_betas(0)
    with pytest.raises(ConfigError):
        linear_betas(10, 0.5, 0.1)


def test_full_schedule_matches_base_betas():
    s = Schedule.build("", 100)
    assert s.length == 100
    np.testing.assert_allclose(s.betas, linear_betas(100))
    np.testing.assert_allclose(s.variances[1:], s.betas[1:])


def test_respaced_schedule_keeps_marginals():
    full = Schedule.build("", 1000)
    short = Schedule.build("80,20,0,0", 1000)
    np.testing.assert_allclose(short.alphas_cumprod, full.alphas_cumprod[list(short.timesteps)])
    assert np.all(short.betas > 0) and np.all(short.betas < 1)
    assert np.all(np.isfinite(short.log_variances))


def test_small_variance_is_smaller():
    large = Schedule.build("10", 100, variance="large")
    small = Schedule.build("10", 100, variance="small")
    assert np.all(small.variances[1:] <= large.variances[1:])
    assert small.variances[0] > 0
    with pytest.raises(ConfigError):
        Schedule.build("10", 100, variance="learned")


def test_posterior_mean_at_clean_data():
    s = Schedule.build("20", 100)
    # noiseless x_t = sqrt(acp) x0 has posterior mean sqrt(acp_prev) x0
    acp = s.alphas_cumprod
    total = s.posterior_coef_x0 + s.posterior_coef_xt * np.sqrt(acp)
    np.testing.assert_allclose(total, np.sqrt(s.alphas_cumprod_prev), rtol=1e-10)


def test_gauss_logprob():
    a = np.array([[0.0, 1.0], [2.0, 2.0]])
    mu = np.array([[0.0, 0.0], [2.0, 1.0]])
    lp = gauss_logprob(a, mu, np.array([1.0, 4.0]))
    expected0 = -0.5 * (2 * np.log(2 * np.pi) + np.log(4.0) + 1.0 / 4.0)
    assert lp.shape == (2,)
    assert lp[0] == pytest.approx(expected0)
    with pytest.raises(DimensionError):
        gauss_logprob(np.zeros(2), np.zeros(3), 1.0)
    with pytest.raises(DimensionError):
        gauss_logprob(np.zeros(2), np.zeros(2), np.ones(3))
    with pytest.raises(ConfigError):
        gauss_logprob(np.zeros(2), np.zeros(2), 0.0)
