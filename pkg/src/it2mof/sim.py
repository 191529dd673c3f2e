"""Closed-loop simulation: plant + memory event trigger + fading channel +
memory output-feedback controller + actuator failure.

Step order per sample: read y(t) -> trigger check -> (on trigger) fade and
transmit the packet of the kappa most recent outputs -> controller computes
u from the held faded packet -> actuator failure -> plant steps.  Runs are
deterministic given (seed, run index); all randomness is the per-trigger fade.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import channel as chan
from . import kernel as _kernel
from .controller import ControllerGains, FailureConfig
from .expr import Expression, parse
from .model import IT2Plant
from .trigger import TriggerConfig

__all__ = [
    "ClosedLoopScenario",
    "SimTrace",
    "SimulationError",
    "run",
    "run_ensemble",
    "triggering_rate",
    "empirical_hinf",
    "decay_envelope",
    "DecayFit",
]


class SimulationError(Exception):
    pass


@dataclass(frozen=True)
class ClosedLoopScenario:
    plant: IT2Plant
    gains: ControllerGains
    trigger: TriggerConfig
    fading: chan.FadingConfig
    failure: FailureConfig
    disturbance: tuple[Expression, ...]  # one expression of t per channel
    x0: np.ndarray
    horizon: int
    seed: int = 0

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        object.__setattr__(self, "x0", x0)
        if isinstance(self.disturbance, (str, Expression)):
            raise TypeError("disturbance must be a sequence of expressions")
        object.__setattr__(self, "disturbance", tuple(self.disturbance))
        p = self.plant
        if x0.shape != (p.nx,):
            raise ValueError(f"x0 must have shape ({p.nx},), got {x0.shape}")
        if len(self.disturbance) != p.nd:
            raise ValueError(
                f"{p.nd} disturbance channels but {len(self.disturbance)} expressions")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.trigger.kappa != self.gains.kappa:
            raise ValueError(
                f"trigger memory {self.trigger.kappa} != controller memory {self.gains.kappa}")
        if self.trigger.ny != p.ny:
            raise ValueError("trigger matrix dimension must match plant output")
        if self.gains.ny != p.ny or self.gains.nu != p.nu:
            raise ValueError("controller gain shapes must match plant (nu, ny)")


_STATUS_NAMES = {
    _kernel.STATUS_OK: "ok",
    _kernel.STATUS_OVERFLOW: "overflow",
    _kernel.STATUS_DEGENERATE: "degenerate-membership",
    _kernel.STATUS_EXPR_DOMAIN: "expression-domain-error",
}


@dataclass
class SimTrace:
    """Per-step closed-loop record; arrays hold ``n_valid`` filled rows."""

    x: np.ndarray
    y: np.ndarray
    ytrig: np.ndarray
    u: np.ndarray
    uf: np.ndarray
    z: np.ndarray
    d: np.ndarray
    varpi: np.ndarray
    triggered: np.ndarray
    xi: np.ndarray
    status: str = "ok"
    seed: int = 0
    clamps: tuple[int, int] = (0, 0)

    def __len__(self):
        return len(self.varpi)

    @property
    def trigger_times(self):
        return np.flatnonzero(self.triggered)

    def max_state_norm(self):
        return float(np.max(np.linalg.norm(self.x, axis=1)))

    def columns(self):
        cols = ["t"]
        cols += [f"x_{i+1}" for i in range(self.x.shape[1])]
        cols += [f"y_{i+1}" for i in range(self.y.shape[1])]
        cols += [f"y_trig_{i+1}" for i in range(self.ytrig.shape[1])]
        cols += [f"u_{i+1}" for i in range(self.u.shape[1])]
        cols += [f"uf_{i+1}" for i in range(self.uf.shape[1])]
        cols += [f"z_{i+1}" for i in range(self.z.shape[1])]
        cols += [f"d_{i+1}" for i in range(self.d.shape[1])]
        cols += ["varpi", "triggered", "xi"]
        return cols

    def to_csv(self, path_or_buf):
        close = False
        if isinstance(path_or_buf, (str, bytes)):
            buf = open(path_or_buf, "w", newline="")
            close = True
        else:
            buf = path_or_buf
        try:
            writer = csv.writer(buf)
            writer.writerow(self.columns())
            for t in range(len(self)):
                row = [t]
                for arr in (self.x, self.y, self.ytrig, self.u, self.uf,
                            self.z, self.d):
                    row += [repr(v) for v in arr[t]]
                row.append(repr(self.varpi[t]))
                row.append(int(self.triggered[t]))
                row.append(repr(float(self.xi[t])) if self.triggered[t] else "")
                writer.writerow(row)
        finally:
            if close:
                buf.close()

    @classmethod
    def from_csv(cls, path_or_buf):
        close = False
        if isinstance(path_or_buf, (str, bytes)):
            buf = open(path_or_buf, newline="")
            close = True
        else:
            buf = path_or_buf
        try:
            reader = csv.reader(buf)
            header = next(reader)
            rows = [r for r in reader if r]
        finally:
            if close:
                buf.close()

        def width(prefix):
            return sum(1 for c in header if c.startswith(prefix))

        nx, ny = width("x_"), width("y_") - width("y_trig_")
        nu, nz, nd = width("u_") - width("uf_"), width("z_"), width("d_")
        nyt, nuf = width("y_trig_"), width("uf_")
        n = len(rows)
        vals = [[float(v) if v != "" else math.nan for v in r[1:]] for r in rows]
        mat = [np.array([v[i] for v in vals]) for i in range(len(header) - 1)]
        off = 0
        parts = []
        for w in (nx, ny, nyt, nu, nuf, nz, nd):
            parts.append(np.stack(mat[off:off + w], axis=1) if w else np.zeros((n, 0)))
            off += w
        varpi = mat[off]
        triggered = mat[off + 1].astype(np.int8)
        xi = mat[off + 2]
        return cls(*parts, varpi=varpi, triggered=triggered, xi=xi)

    def summary(self):
        out = {
            "tr": triggering_rate(self),
            "max_state_norm": self.max_state_norm(),
            "status": self.status,
            "steps": len(self),
            "seed": self.seed,
        }
        d_energy = float(np.sum(self.d * self.d))
        out["empirical_hinf"] = empirical_hinf(self) if d_energy > 0 else None
        fit = decay_envelope([self], envelope_rate=1.0)
        out["decay_fit"] = None if fit is None else fit.fitted_rate
        return out


def _build_inputs(scenario):
    plant = scenario.plant
    T = scenario.horizon
    fades = np.zeros(T + 1)  # injected per run
    d_code, d_code_off, d_consts, d_const_off, d_stack = \
        _kernel.compile_disturbance(scenario.disturbance)
    return _kernel.KernelInputs(
        a=np.ascontiguousarray(plant.a),
        bu=np.ascontiguousarray(plant.bu),
        bd=np.ascontiguousarray(plant.bd),
        cy=np.ascontiguousarray(plant.cy),
        cz=np.ascontiguousarray(plant.cz),
        plant_mf=_kernel.compile_membership_set(plant.memberships),
        gains=np.ascontiguousarray(scenario.gains.gains),
        ctrl_mf=_kernel.compile_membership_set(scenario.gains.memberships),
        rho=scenario.trigger.rho,
        nu_t=scenario.trigger.nu,
        mu=scenario.trigger.mu,
        varrho=np.asarray(scenario.trigger.varrho, dtype=np.float64),
        omega=np.ascontiguousarray(scenario.trigger.omega, dtype=np.float64),
        varpi0=scenario.trigger.varpi0,
        detm=0,
        literal_varpi=int(scenario.trigger.literal_varpi_update),
        fades=np.ascontiguousarray(fades, dtype=np.float64),
        alpha_f=scenario.failure.alpha_f,
        d_code=d_code,
        d_code_off=d_code_off,
        d_consts=d_consts,
        d_const_off=d_const_off,
        d_max_stack=d_stack,
        x0=np.ascontiguousarray(scenario.x0, dtype=np.float64),
        horizon=T,
    )


def _run_prepared(scenario, inputs, run_index, detm, impl):
    inputs.fades = np.ascontiguousarray(chan.fade_stream(
        scenario.fading, (scenario.seed, run_index), scenario.horizon + 1))
    inputs.detm = int(detm)
    out = _kernel.run_closed_loop(inputs, impl=impl)
    n = out["n_valid"]
    if n < 1:
        raise SimulationError(
            f"run failed at the first step: {_STATUS_NAMES[out['status']]}")
    return SimTrace(
        x=out["x"][:n], y=out["y"][:n], ytrig=out["ytrig"][:n],
        u=out["u"][:n], uf=out["uf"][:n], z=out["z"][:n], d=out["d"][:n],
        varpi=out["varpi"][:n], triggered=out["trig"][:n], xi=out["xi"][:n],
        status=_STATUS_NAMES[out["status"]], seed=scenario.seed,
        clamps=(out["clamps_plant"], out["clamps_ctrl"]),
    )


def run(scenario, run_index=0, detm=False, impl=None):
    """Simulate one seeded run; ``detm`` switches the trigger to the
    memoryless error (the controller memory is unaffected)."""
    return _run_prepared(scenario, _build_inputs(scenario), run_index, detm,
                         impl)


def run_ensemble(scenario, n_runs, detm=False, impl=None):
    """Independent seeded runs; fade streams split as (seed, run index)."""
    inputs = _build_inputs(scenario)
    return [_run_prepared(scenario, inputs, r, detm, impl)
            for r in range(n_runs)]


def triggering_rate(trace):
    """Triggered instants over total sampling instants, in [0, 1]."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    return float(np.sum(trace.triggered)) / len(trace)


def empirical_hinf(trace):
    """sqrt(sum ||z||^2 / sum ||d||^2) along one trace."""
    d_energy = float(np.sum(trace.d * trace.d))
    if d_energy <= 0.0:
        raise ValueError("disturbance energy is zero")
    z_energy = float(np.sum(trace.z * trace.z))
    return math.sqrt(z_energy / d_energy)


class DecayFit(NamedTuple):
    fitted_rate: float       # per-step decay factor of mean ||x||^2
    envelope_rate: float
    c_min: float             # smallest c with E||x(t)||^2 <= c * rate^t
    satisfied: bool          # fitted_rate <= envelope_rate
    n_points: int


def decay_envelope(traces, envelope_rate, min_runs=1, floor=1e-24):
    """Fit the geometric decay of the ensemble mean of ||x(t)||^2.

    Least squares on log mean-square state versus t over the window where the
    signal is above the numerical floor.  Returns None for an identically
    zero ensemble (the envelope is trivially satisfied).
    """
    if len(traces) < min_runs:
        raise ValueError(f"need at least {min_runs} runs, got {len(traces)}")
    horizon = min(len(tr) for tr in traces)
    ms = np.zeros(horizon)
    for tr in traces:
        sq = np.sum(tr.x[:horizon] ** 2, axis=1)
        ms += sq
    ms /= len(traces)
    if ms.max() <= floor:
        return None
    valid = np.flatnonzero(ms > max(floor, ms.max() * 1e-28))
    # fit on the contiguous leading window to avoid the numerical tail
    stop = valid[-1] + 1
    for k in range(1, len(valid)):
        if valid[k] != valid[k - 1] + 1:
            stop = valid[k - 1] + 1
            break
    ts = np.arange(stop, dtype=float)
    logs = np.log(ms[:stop])
    if len(ts) < 2:
        return DecayFit(0.0, envelope_rate, float(ms.max()), True, len(ts))
    slope = np.polyfit(ts, logs, 1)[0]
    rate = float(np.exp(slope))
    with np.errstate(over="ignore"):
        c_min = float(np.max(ms[:stop] / np.power(envelope_rate, ts))) \
            if envelope_rate > 0 else math.inf
    return DecayFit(rate, envelope_rate, c_min, rate <= envelope_rate, len(ts))
