import math

import numpy as np
import pytest

from fracnoise.errors import ConfigurationError
from fracnoise.estimate import gamma_h
from fracnoise.simulate import (
    Hurst,
    SimConfig,
    fgn_autocovariance,
    gen_fbm_path,
    gen_fgn,
    gen_rl_path,
    rl_normalizer,
    rl_weights,
    synthesize_observations,
)


def autocov_se(h, count, r):
    """Standard error of the zero-mean sample autocovariance at lag r."""
    j = np.arange(-count + 1, count)
    wt = 1.0 - np.abs(j) / count
    var = np.sum(wt * (fgn_autocovariance(h, j) ** 2 + fgn_autocovariance(h, j + r) * fgn_autocovariance(h, j - r)))
    return math.sqrt(var / count)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.5])
def test_hurst_rejects_out_of_range(bad):
    with pytest.raises(ConfigurationError):
        Hurst(bad)


def test_gen_fgn_is_deterministic():
    np.testing.assert_array_equal(gen_fgn(0.3, 500, 11), gen_fgn(0.3, 500, 11))
    assert not np.array_equal(gen_fgn(0.3, 500, 11), gen_fgn(0.3, 500, 12))


def test_gen_fgn_short_counts():
    assert gen_fgn(0.5, 1, 0).shape == (1,)
    assert gen_fgn(0.5, 4, 0).shape == (4,)


def test_lag_one_at_h_three_quarters():
    count = 2**16
    x = gen_fgn(0.75, count, 5)
    emp = np.dot(x[:-1], x[1:]) / (count - 1)
    assert gamma_h(0.75, 1) == pytest.approx((2**1.5 - 2) / 2)
    assert abs(emp - 0.41421356) < 3 * autocov_se(0.75, count, 1)


@pytest.mark.parametrize("h", [0.1, 0.5, 0.9])
def test_fgn_covariance_over_grid(h):
    count = 2**18
    x = gen_fgn(h, count, 21)
    for r in range(4):
        emp = np.dot(x[: count - r], x[r:]) / (count - r)
        assert abs(emp - fgn_autocovariance(h, r)) < 4 * autocov_se(h, count, r)


def test_fbm_starts_at_zero_and_has_right_length():
    p = gen_fbm_path(0.3, 100, 2.5, 0)
    assert p.values[0] == 0.0
    assert len(p) == 251


def test_fbm_increment_scaling():
    n = 1000
    h = 0.3
    p = gen_fbm_path(h, n, 1000.0, 4)  # 10**6 increments
    for m in (1, 2, 4):
        d = p.values[m::m] - p.values[:-m:m]
        target = (m / n) ** (2 * h)
        se = target * math.sqrt(2.0 * np.sum(fgn_autocovariance(h, np.arange(-50, 51)) ** 2) / d.size)
        assert abs(np.mean(d**2) - target) < 4 * se


def test_bm_terminal_variance():
    ends = np.array([gen_fbm_path(0.5, 64, 1.0, s).values[-1] for s in range(4000)])
    assert abs(np.var(ends) - 1.0) < 3 * math.sqrt(2.0 / ends.size)


def test_rl_zero_volatility_gives_zero_path():
    p = gen_rl_path(SimConfig(h=0.3, n=128, sigma=0.0, kernel="riemann_liouville"))
    assert np.all(p.values == 0.0)


def test_rl_normalizer_at_half():
    assert rl_normalizer(0.5) == pytest.approx(1.0)
    np.testing.assert_allclose(rl_weights(0.5, 10, 0.01), 1.0)


@pytest.mark.parametrize("h", [0.2, 0.3, 0.7])
def test_rl_terminal_variance_exact(h):
    # the discrete weights carry the exact L2 mass, so the sum telescopes
    n = 512
    w = rl_weights(h, n, 1.0 / n)
    var = np.sum(w**2) / n / rl_normalizer(h) ** 2
    assert var == pytest.approx(rl_normalizer(h) ** -2 / (2 * h), rel=1e-12)


@pytest.mark.parametrize("h", [0.3, 0.5])
def test_rl_terminal_variance_empirical(h):
    ends = np.array(
        [
            gen_rl_path(SimConfig(h=h, n=256, kernel="riemann_liouville", seed=s)).values[-1]
            for s in range(3000)
        ]
    )
    target = rl_normalizer(h) ** -2 / (2 * h)
    assert abs(np.var(ends) - target) < 3 * target * math.sqrt(2.0 / ends.size)


def test_rl_piecewise_volatility_scales_variance():
    sched = [(0.0, 1.0), (0.5, 2.0)]
    p1 = gen_rl_path(SimConfig(h=0.4, n=256, sigma=sched, kernel="riemann_liouville", seed=3))
    p2 = gen_rl_path(SimConfig(h=0.4, n=256, sigma=[(0.0, 2.0), (0.5, 4.0)], kernel="riemann_liouville", seed=3))
    np.testing.assert_allclose(p2.values, 2.0 * p1.values)


def test_constant_path():
    p = synthesize_observations(SimConfig(h=0.3, n=100, sigma=0.0, rho=0.0, x0=5.0))
    assert np.all(p.values == 5.0)


def test_reference_config_noise_level():
    p = synthesize_observations(SimConfig(h=1 / 3, n=10_000, sigma=1.0, rho=0.1, seed=1))
    assert len(p) == 10_001
    rv = np.sum(np.diff(p.values) ** 2) / (2 * 10_000)
    # fBm adds n^(-2H)/2 on top of rho^2
    assert rv == pytest.approx(0.01 + 0.5 * 10_000 ** (-2 / 3), rel=0.05)


def test_seed_changes_path():
    a = synthesize_observations(SimConfig(h=0.3, n=100, rho=0.1, seed=1))
    b = synthesize_observations(SimConfig(h=0.3, n=100, rho=0.1, seed=2))
    assert not np.array_equal(a.values, b.values)


@pytest.mark.parametrize("dist", ["gaussian", "rademacher", "uniform_centered"])
def test_noise_distributions_have_unit_variance(dist):
    p = synthesize_observations(SimConfig(h=0.5, n=100_000, sigma=0.0, rho=1.0, noise_dist=dist, seed=2))
    assert np.var(p.values) == pytest.approx(1.0, abs=0.02)


def test_fbm_kernel_rejects_varying_sigma():
    with pytest.raises(ConfigurationError):
        synthesize_observations(SimConfig(h=0.3, n=100, sigma=[(0.0, 1.0), (0.5, 2.0)]))


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        SimConfig(h=0.3, n=100, sigma=[(0.1, 1.0)])
    with pytest.raises(ConfigurationError):
        SimConfig(h=0.3, n=100, rho=[(0.0, 1.0), (0.0, 2.0)])
    with pytest.raises(ConfigurationError):
        SimConfig(h=0.3, n=100, noise_dist="cauchy")


def test_drift_and_level():
    p = synthesize_observations(SimConfig(h=0.3, n=10, sigma=0.0, x0=1.0, drift=2.0))
    np.testing.assert_allclose(p.values, 1.0 + 2.0 * np.arange(11) / 10)
