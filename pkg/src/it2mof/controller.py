"""Memory output-feedback control law and the actuator failure model.

The controller blends per-rule gain sets over the last kappa received
(faded, zero-order-held) outputs:

    u = sum_h sum_j n_j(y_new) K[j][h] y_held[h]

with the rule memberships n_j evaluated at the newest held entry.  The
controller rule base is independent of the plant's (non-PDC): its premise is
the received output, never the true state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import IT2MembershipSpec

__all__ = ["ControllerGains", "FailureConfig", "compute_control", "apply_failure"]


@dataclass(frozen=True)
class ControllerGains:
    gains: np.ndarray  # (q, kappa, nu, ny); gains[j, h-1] applies to y(tk-h+1)
    memberships: IT2MembershipSpec

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=float)
        object.__setattr__(self, "gains", g)
        if g.ndim != 4:
            raise ValueError(f"gains must be (rules, kappa, nu, ny), got {g.shape}")
        if g.shape[0] != self.memberships.n_rules:
            raise ValueError(
                f"{g.shape[0]} gain rule sets but {self.memberships.n_rules} membership rules")
        if g.shape[1] < 1:
            raise ValueError("memory depth must be >= 1")
        for idx in self.memberships.premise_index:
            if not 0 <= idx < self.ny:
                raise ValueError(f"premise index {idx} outside output dimension {self.ny}")

    @property
    def n_rules(self):
        return self.gains.shape[0]

    @property
    def kappa(self):
        return self.gains.shape[1]

    @property
    def nu(self):
        return self.gains.shape[2]

    @property
    def ny(self):
        return self.gains.shape[3]


@dataclass(frozen=True)
class FailureConfig:
    alpha_f: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha_f <= 1.0:
            raise ValueError(f"failure parameter must be in [0,1], got {self.alpha_f}")


def compute_control(gains, held_packet, memberships=None):
    """Control value from the held faded packet (rows newest first).

    ``memberships`` overrides the rule weights (used by tests to freeze them);
    by default they are evaluated at the packet's newest entry.
    """
    packet = np.asarray(held_packet, dtype=float)
    if packet.shape != (gains.kappa, gains.ny):
        raise ValueError(
            f"held packet must have shape ({gains.kappa}, {gains.ny}), got {packet.shape}")
    if memberships is None:
        memberships = gains.memberships.normalized(packet[0]).weights
    u = np.zeros(gains.nu)
    for h in range(gains.kappa):
        for j in range(gains.n_rules):
            u += memberships[j] * (gains.gains[j, h] @ packet[h])
    return u


def apply_failure(u, config):
    """Scale the actuator command by the failure parameter."""
    return config.alpha_f * np.asarray(u, dtype=float)
