"""Memory dynamic event-triggering: transmission decisions and the auxiliary
variable recursion, plus the memoryless special case.

The mechanism holds the last released packet of kappa raw outputs.  At every
sample it forms the weighted history error and triggers when

    varpi / nu + rho * y' Omega y - ehat' Omega ehat <= 0.

The auxiliary variable evolves every sample by

    varpi+ = mu * varpi + rho * y' Omega y - ehat' Omega ehat.

At trigger instants the stored recursion uses the post-release error (zero),
which is what keeps varpi nonnegative whenever nu * mu >= 1; the raw
pre-release value is still reported for inspection.  Set
``literal_varpi_update`` to store the raw value instead (the nonnegativity
guarantee is then void).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "TriggerConfig",
    "TriggerState",
    "TriggerValidity",
    "TriggerDecision",
    "validate",
    "check_and_update",
    "detm_check",
]


@dataclass(frozen=True)
class TriggerConfig:
    rho: float
    nu: float
    mu: float
    kappa: int
    varrho: tuple[float, ...]   # weights for h = 1..kappa, newest first
    omega: np.ndarray           # (ny, ny) symmetric positive definite
    varpi0: float = 1.0
    literal_varpi_update: bool = False

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (0,1), got {self.rho}")
        if not self.nu > 0.0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"mu must be in (0,1), got {self.mu}")
        if self.kappa < 1:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if self.varpi0 < 0.0:
            raise ValueError(f"varpi0 must be >= 0, got {self.varpi0}")
        varrho = tuple(float(v) for v in self.varrho)
        object.__setattr__(self, "varrho", varrho)
        if len(varrho) != self.kappa:
            raise ValueError(f"need {self.kappa} history weights, got {len(varrho)}")
        if abs(sum(varrho) - 1.0) > 1e-9:
            raise ValueError(f"history weights must sum to 1, got {sum(varrho)}")
        for h in range(len(varrho) - 1):
            if varrho[h] < varrho[h + 1] - 1e-12:
                raise ValueError(
                    "history weights must be non-increasing (newest weighted most)")
        omega = np.atleast_2d(np.asarray(self.omega, dtype=float))
        object.__setattr__(self, "omega", omega)
        if omega.shape[0] != omega.shape[1]:
            raise ValueError(f"omega must be square, got {omega.shape}")
        if not np.allclose(omega, omega.T, atol=1e-10):
            raise ValueError("omega must be symmetric")
        if np.linalg.eigvalsh(omega).min() <= 0.0:
            raise ValueError("omega must be positive definite")

    @property
    def ny(self):
        return self.omega.shape[0]


class TriggerValidity(NamedTuple):
    nu_mu: float
    guarantee_holds: bool  # varpi(t) >= 0 along any trace


def validate(config):
    """The nonnegativity guarantee applies iff nu * mu >= 1 (no rejection)."""
    product = config.nu * config.mu
    return TriggerValidity(product, product >= 1.0)


class TriggerDecision(NamedTuple):
    triggered: bool
    varpi_next: float      # value stored for the next sample
    varpi_raw: float       # literal recursion value with the pre-release error
    packet: np.ndarray | None  # (kappa, ny) raw outputs, newest first


@dataclass
class TriggerState:
    """Per-run mutable buffers; owned by a single simulation."""

    config: TriggerConfig
    history: np.ndarray = field(init=False)   # (kappa, ny), row h-1 = y(t-h+1)
    released: np.ndarray = field(init=False)  # (kappa, ny), row h-1 = y(tk-h+1)
    varpi: float = field(init=False)
    t: int = field(init=False, default=0)
    last_trigger: int = field(init=False, default=-1)

    def __post_init__(self):
        kappa, ny = self.config.kappa, self.config.ny
        self.history = np.zeros((kappa, ny))
        self.released = np.zeros((kappa, ny))
        self.varpi = float(self.config.varpi0)


def _quad(omega, v):
    return float(v @ omega @ v)


def _decide(state, config, y_now, weighted):
    y = np.asarray(y_now, dtype=float)
    if y.shape != (config.ny,):
        raise ValueError(f"output must have shape ({config.ny},), got {y.shape}")

    if state.t == 0:
        # pre-history is the initial output; the first sample always releases
        state.history[:] = y
        state.released[:] = y
    else:
        state.history[1:] = state.history[:-1]
        state.history[0] = y

    if weighted:
        ehat = np.zeros(config.ny)
        for h in range(config.kappa):
            ehat += config.varrho[h] * (state.history[h] - state.released[h])
    else:
        ehat = y - state.released[0]

    qy = _quad(config.omega, y)
    qe = _quad(config.omega, ehat)
    check = state.varpi / config.nu + config.rho * qy - qe
    triggered = state.t == 0 or check <= 0.0

    varpi_raw = config.mu * state.varpi + config.rho * qy - qe
    if triggered and not config.literal_varpi_update:
        varpi_next = config.mu * state.varpi + config.rho * qy
    else:
        varpi_next = varpi_raw

    packet = None
    if triggered:
        packet = state.history.copy()
        state.released[:] = state.history
        state.last_trigger = state.t

    state.varpi = varpi_next
    state.t += 1
    return TriggerDecision(triggered, varpi_next, varpi_raw, packet)


def check_and_update(state, config, y_now):
    """Advance the memory trigger by one sample with the newest output."""
    return _decide(state, config, y_now, weighted=True)


def detm_check(state, config, y_now):
    """Memoryless special case: the error is just y(t) - y(t_k)."""
    return _decide(state, config, y_now, weighted=False)
