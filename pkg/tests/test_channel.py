import numpy as np
import pytest

from it2mof.channel import (
    FadingConfig,
    fade_packet,
    fade_stream,
    sample_fade,
    sample_fades,
)


def test_zero_variance_is_deterministic():
    cfg = FadingConfig(xi_bar=0.8, xi_var=0.0)
    rng = np.random.default_rng(0)
    assert sample_fade(cfg, rng) == 0.8
    np.testing.assert_array_equal(sample_fades(cfg, rng, 5), [0.8] * 5)


def test_gaussian_moments_1e6():
    cfg = FadingConfig(xi_bar=0.8, xi_var=0.05)
    rng = np.random.default_rng(123)
    x = sample_fades(cfg, rng, 1_000_000)
    se_mean = np.sqrt(0.05 / len(x))
    assert abs(x.mean() - 0.8) < 4 * se_mean
    # variance of the sample variance for a gaussian: 2 sigma^4 / (n-1)
    se_var = np.sqrt(2 * 0.05 ** 2 / (len(x) - 1))
    assert abs(x.var() - 0.05) < 4 * se_var


def test_two_point_closed_form_moments():
    # equal-probability support {0.6, 1.0}: mean 0.8, variance 0.04
    cfg = FadingConfig(xi_bar=0.8, xi_var=0.04, family="two-point",
                       points=(0.6, 1.0))
    rng = np.random.default_rng(7)
    x = sample_fades(cfg, rng, 1_000_000)
    assert set(np.unique(x)) == {0.6, 1.0}
    assert abs(x.mean() - 0.8) < 4 * np.sqrt(0.04 / len(x))
    se_var = np.sqrt(2 * 0.04 ** 2 / (len(x) - 1))
    assert abs(x.var() - 0.04) < 8 * se_var


def test_two_point_requires_consistent_variance():
    with pytest.raises(ValueError):
        FadingConfig(xi_bar=0.8, xi_var=0.2, family="two-point",
                     points=(0.6, 1.0))
    with pytest.raises(ValueError):
        FadingConfig(xi_bar=0.8, xi_var=0.04, family="two-point",
                     points=(-0.1, 1.0))


def test_truncated_gaussian_matches_target_moments():
    cfg = FadingConfig(xi_bar=0.8, xi_var=0.05, family="truncated-gaussian",
                       bounds=(0.0, 2.0))
    rng = np.random.default_rng(5)
    x = sample_fades(cfg, rng, 1_000_000)
    assert x.min() >= 0.0 and x.max() <= 2.0
    assert abs(x.mean() - 0.8) < 4 * np.sqrt(0.05 / len(x))
    se_var = np.sqrt(2 * 0.05 ** 2 / (len(x) - 1))
    assert abs(x.var() - 0.05) < 8 * se_var


def test_truncated_gaussian_needs_feasible_window():
    with pytest.raises(ValueError):
        FadingConfig(xi_bar=3.0, xi_var=0.05, family="truncated-gaussian",
                     bounds=(0.0, 2.0))


def test_fade_packet_scaling():
    packet = np.array([[1.0], [2.0]])
    np.testing.assert_array_equal(fade_packet(1.0, packet), packet)
    np.testing.assert_array_equal(fade_packet(0.0, packet), np.zeros((2, 1)))
    np.testing.assert_allclose(fade_packet(0.8, packet), [[0.8], [1.6]])


def test_stream_determinism_and_splitting():
    cfg = FadingConfig(xi_bar=0.8, xi_var=0.05, seed=99)
    a = fade_stream(cfg, 3, 64)
    b = fade_stream(cfg, 3, 64)
    c = fade_stream(cfg, 4, 64)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    d = fade_stream(cfg, (0, 3), 16)
    e = fade_stream(cfg, (1, 3), 16)
    assert not np.array_equal(d, e)


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        FadingConfig(xi_bar=0.8, xi_var=0.05, family="rayleigh")
