"""Stochastic fading applied to released packets.

One fade coefficient is drawn per transmission and scales every history
entry of the packet.  Three families share the same two-moment contract
(mean ``xi_bar``, variance ``xi_var``): gaussian, truncated gaussian
(moment-matched inside the truncation window), and a two-point distribution
on a given nonnegative support.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["FadingConfig", "sample_fade", "sample_fades", "fade_packet", "fade_stream"]

_FAMILIES = ("gaussian", "truncated-gaussian", "two-point")


@dataclass(frozen=True)
class FadingConfig:
    xi_bar: float
    xi_var: float
    family: str = "gaussian"
    bounds: tuple[float, float] | None = None  # truncated-gaussian window
    points: tuple[float, float] | None = None  # two-point support, both >= 0
    seed: int = 0

    def __post_init__(self):
        if self.xi_var < 0.0:
            raise ValueError(f"variance must be >= 0, got {self.xi_var}")
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown fading family {self.family!r}")
        if self.family == "truncated-gaussian":
            if self.bounds is None:
                raise ValueError("truncated-gaussian needs truncation bounds")
            lo, hi = self.bounds
            if not lo < hi:
                raise ValueError(f"empty truncation window [{lo}, {hi}]")
            if not lo < self.xi_bar < hi:
                raise ValueError("target mean must lie inside the truncation window")
        if self.family == "two-point":
            if self.points is None:
                raise ValueError("two-point family needs its two support points")
            a, b = sorted(self.points)
            if a < 0.0:
                raise ValueError("two-point support must be nonnegative")
            if not a <= self.xi_bar <= b:
                raise ValueError("mean must lie between the support points")
            if a != b:
                implied = (self.xi_bar - a) * (b - self.xi_bar)
                if self.xi_var > 0 and abs(implied - self.xi_var) > 1e-9 * max(1.0, self.xi_var):
                    raise ValueError(
                        f"two-point support implies variance {implied}, requested {self.xi_var}")


@lru_cache(maxsize=64)
def _truncnorm_params(lo, hi, mean, var):
    """Underlying (loc, scale) whose [lo, hi]-truncation has the target moments."""
    from scipy import optimize, stats

    def moments(p):
        loc, log_scale = p
        scale = np.exp(log_scale)
        a, b = (lo - loc) / scale, (hi - loc) / scale
        m, v = stats.truncnorm.stats(a, b, loc=loc, scale=scale, moments="mv")
        return [float(m) - mean, float(v) - var]

    sol = optimize.root(moments, x0=[mean, 0.5 * np.log(var)], tol=1e-12)
    if not sol.success or max(abs(np.asarray(moments(sol.x)))) > 1e-8:
        raise ValueError(
            f"cannot match mean {mean}, variance {var} inside [{lo}, {hi}]")
    return float(sol.x[0]), float(np.exp(sol.x[1]))


def sample_fades(config, rng, n):
    """Draw ``n`` fade coefficients from the configured family."""
    if config.xi_var == 0.0:
        return np.full(n, config.xi_bar)
    if config.family == "gaussian":
        return rng.normal(config.xi_bar, np.sqrt(config.xi_var), n)
    if config.family == "truncated-gaussian":
        from scipy import stats

        lo, hi = config.bounds
        loc, scale = _truncnorm_params(lo, hi, config.xi_bar, config.xi_var)
        a, b = (lo - loc) / scale, (hi - loc) / scale
        return stats.truncnorm.rvs(a, b, loc=loc, scale=scale, size=n, random_state=rng)
    a, b = sorted(config.points)
    p_low = (b - config.xi_bar) / (b - a)
    return np.where(rng.random(n) < p_low, a, b)


def sample_fade(config, rng):
    return float(sample_fades(config, rng, 1)[0])


def fade_stream(config, run_index, n):
    """Reproducible per-run fade sequence via seed-splitting.

    Stream identity is (config.seed, run_index); ``run_index`` may be an int
    or a tuple of ints.  One coefficient is laid out per sampling instant and
    consumed only at trigger instants, so the realized fades do not depend on
    how often the trigger fires.
    """
    key = (run_index,) if isinstance(run_index, int) else tuple(run_index)
    seq = np.random.SeedSequence(config.seed, spawn_key=key)
    return sample_fades(config, np.random.Generator(np.random.PCG64(seq)), n)


def fade_packet(xi, packet):
    """Scale every history entry of a released packet by the same fade."""
    return float(xi) * np.asarray(packet, dtype=float)
