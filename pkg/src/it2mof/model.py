"""Discrete-time interval type-2 T-S fuzzy plant and membership evaluation.

A plant is a convex blend of per-rule linear models.  Rule firing strengths
are intervals [lower, upper]; a blending weight in [0, 1] picks the working
point inside the interval, and explicit normalization produces the convex
weights used to mix the rule models.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import expr as ex

__all__ = [
    "MembershipRule",
    "IT2MembershipSpec",
    "IT2Plant",
    "DegenerateMembershipError",
    "MembershipResult",
    "eval_normalized_memberships",
    "step_plant",
]

_DEGENERATE_TOL = 1e-300


class DegenerateMembershipError(Exception):
    """All rule firing strengths vanished; the blend is undefined."""


@dataclass(frozen=True)
class MembershipRule:
    """One rule's interval membership.

    ``lower``/``upper`` are expressions of the premise variables; ``blend``
    is the weight put on the upper function (the lower gets one minus it).
    A residual rule has no expressions: its working membership is one minus
    the sum of the other rules' working memberships.
    """

    lower: ex.Expression | None = None
    upper: ex.Expression | None = None
    blend: ex.Expression | None = None
    residual: bool = False

    def __post_init__(self):
        if self.residual:
            if self.lower is not None or self.upper is not None:
                raise ValueError("residual rule must not declare bound functions")
        else:
            if self.lower is None or self.upper is None or self.blend is None:
                raise ValueError("non-residual rule needs lower, upper and blend")


class MembershipResult(NamedTuple):
    weights: np.ndarray
    clamped: bool


def _clamp01(v):
    return 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)


@dataclass(frozen=True)
class IT2MembershipSpec:
    """Interval membership functions over a boxed premise domain.

    ``premise`` names the premise variables; ``premise_index`` gives, for each
    one, its coordinate in the source vector (state for the plant, received
    output for a controller).
    """

    rules: tuple[MembershipRule, ...]
    premise: tuple[str, ...]
    premise_index: tuple[int, ...]
    domain_lo: tuple[float, ...]
    domain_hi: tuple[float, ...]

    def __post_init__(self):
        if not self.rules:
            raise ValueError("at least one rule required")
        if sum(r.residual for r in self.rules) > 1:
            raise ValueError("at most one residual rule supported")
        if not (len(self.premise) == len(self.premise_index)
                == len(self.domain_lo) == len(self.domain_hi)):
            raise ValueError("premise name/index/domain lengths disagree")
        for lo, hi in zip(self.domain_lo, self.domain_hi):
            if not lo < hi:
                raise ValueError(f"empty premise domain [{lo}, {hi}]")

    @property
    def n_rules(self):
        return len(self.rules)

    def clamp_premise(self, source_vec):
        """Project the premise coordinates onto the declared box."""
        vals = {}
        clamped = False
        for name, idx, lo, hi in zip(self.premise, self.premise_index,
                                     self.domain_lo, self.domain_hi):
            v = float(source_vec[idx])
            if v < lo:
                v, clamped = lo, True
            elif v > hi:
                v, clamped = hi, True
            vals[name] = v
        return vals, clamped

    def bound_values(self, env):
        """Lower/upper membership values at a premise point, clamped to [0,1].

        A residual rule gets the interval complement of the other rules:
        lower = 1 - sum(other uppers), upper = 1 - sum(other lowers).
        """
        p = self.n_rules
        lo = np.zeros(p)
        hi = np.zeros(p)
        res_idx = None
        for r, rule in enumerate(self.rules):
            if rule.residual:
                res_idx = r
                continue
            lo[r] = _clamp01(ex.evaluate(rule.lower, env))
            hi[r] = _clamp01(ex.evaluate(rule.upper, env))
        if res_idx is not None:
            others = [r for r in range(p) if r != res_idx]
            lo[res_idx] = _clamp01(1.0 - hi[others].sum())
            hi[res_idx] = _clamp01(1.0 - lo[others].sum())
        return lo, hi

    def firing(self, env):
        """Unnormalized working memberships (blend applied, residual filled)."""
        p = self.n_rules
        w = np.zeros(p)
        res_idx = None
        for r, rule in enumerate(self.rules):
            if rule.residual:
                res_idx = r
                continue
            lo = _clamp01(ex.evaluate(rule.lower, env))
            hi = _clamp01(ex.evaluate(rule.upper, env))
            bl = _clamp01(ex.evaluate(rule.blend, env))
            w[r] = (1.0 - bl) * lo + bl * hi
        if res_idx is not None:
            w[res_idx] = max(0.0, 1.0 - w.sum())
        return w

    def normalized(self, source_vec):
        env, clamped = self.clamp_premise(source_vec)
        w = self.firing(env)
        total = w.sum()
        if not total > _DEGENERATE_TOL:
            raise DegenerateMembershipError(
                f"firing strengths sum to {total!r} at premise {env}")
        return MembershipResult(w / total, clamped)


def eval_normalized_memberships(spec, premise_vec):
    """Normalized membership weights at a premise point (clamped to domain)."""
    return spec.normalized(np.asarray(premise_vec, dtype=float))


@dataclass(frozen=True)
class IT2Plant:
    """Per-rule matrices of the fuzzy plant plus its membership spec."""

    a: np.ndarray   # (p, nx, nx)
    bu: np.ndarray  # (p, nx, nu)
    bd: np.ndarray  # (p, nx, nd)
    cy: np.ndarray  # (p, ny, nx)
    cz: np.ndarray  # (p, nz, nx)
    memberships: IT2MembershipSpec

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        object.__setattr__(self, "a", a)
        p, nx = a.shape[0], a.shape[1]
        if a.shape != (p, nx, nx):
            raise ValueError(f"a must be (rules, nx, nx), got {a.shape}")
        for name in ("bu", "bd", "cy", "cz"):
            m = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, m)
            if m.ndim != 3 or m.shape[0] != p:
                raise ValueError(f"{name} must stack {p} rule matrices, got {m.shape}")
        if self.bu.shape[1] != nx or self.bd.shape[1] != nx:
            raise ValueError("input matrices must have nx rows")
        if self.cy.shape[2] != nx or self.cz.shape[2] != nx:
            raise ValueError("output matrices must have nx columns")
        if self.memberships.n_rules != p:
            raise ValueError(
                f"{p} rule matrices but {self.memberships.n_rules} membership rules")
        for idx in self.memberships.premise_index:
            if not 0 <= idx < nx:
                raise ValueError(f"premise index {idx} outside state dimension {nx}")

    @property
    def n_rules(self):
        return self.a.shape[0]

    @property
    def nx(self):
        return self.a.shape[1]

    @property
    def nu(self):
        return self.bu.shape[2]

    @property
    def nd(self):
        return self.bd.shape[2]

    @property
    def ny(self):
        return self.cy.shape[1]

    @property
    def nz(self):
        return self.cz.shape[1]

    def output(self, x, m=None):
        if m is None:
            m = self.memberships.normalized(x).weights
        return np.einsum("i,ijk,k->j", m, self.cy, x)

    def regulated(self, x, m=None):
        if m is None:
            m = self.memberships.normalized(x).weights
        return np.einsum("i,ijk,k->j", m, self.cz, x)


def step_plant(plant, x, u, d):
    """One step of the blended dynamics: returns (x_next, y, z)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    if x.shape != (plant.nx,):
        raise ValueError(f"state must have shape ({plant.nx},), got {x.shape}")
    if u.shape != (plant.nu,):
        raise ValueError(f"input must have shape ({plant.nu},), got {u.shape}")
    if d.shape != (plant.nd,):
        raise ValueError(f"disturbance must have shape ({plant.nd},), got {d.shape}")
    m = plant.memberships.normalized(x).weights
    x_next = np.zeros(plant.nx)
    for i in range(plant.n_rules):
        x_next += m[i] * (plant.a[i] @ x + plant.bu[i] @ u + plant.bd[i] @ d)
    return x_next, plant.output(x, m), plant.regulated(x, m)
