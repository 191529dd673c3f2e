"""Solve the assembled matrix-inequality programs and package design results.

Backends sit behind a small contract: feasibility plus a linear objective
over symmetric cone constraints, returning one of optimal / infeasible /
numerical-failure with variable values on success.  The default backend is
cvxpy with Clarabel; SCS and CVXOPT are selectable for cross-checks (env
var ``IT2MOF_SOLVER`` or the ``solver`` argument).
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .lmi import LmiProgram, verify_design

__all__ = [
    "SdpBackend",
    "CvxpyBackend",
    "BackendSolution",
    "DesignResult",
    "SynthesisError",
    "default_backend",
    "minimize_gamma",
    "recover_gains",
    "theta_search",
]

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_NUMERICAL = "numerical-failure"


class SynthesisError(Exception):
    pass


@dataclass
class BackendSolution:
    status: str
    values: dict | None = None
    objective: float | None = None
    solver: str = ""
    wall_time: float = 0.0
    stats: dict = field(default_factory=dict)


class SdpBackend:
    """Contract: solve(program) -> BackendSolution."""

    name = "abstract"
    feasibility_tol = 1e-8

    def solve(self, program):
        raise NotImplementedError


class CvxpyBackend(SdpBackend):
    def __init__(self, solver="CLARABEL", margin=1e-9, feasibility_tol=1e-8,
                 max_iters=None, extra_constraints=None, **solver_opts):
        self.solver = solver.upper()
        self.margin = margin
        self.feasibility_tol = feasibility_tol
        self.max_iters = max_iters
        self.extra_constraints = extra_constraints or []
        self.solver_opts = solver_opts
        self.name = f"cvxpy/{self.solver}"

    def _make_vars(self, program):
        import cvxpy as cp

        varmap = {}
        cons = []
        for v in program.variables.values():
            if v.kind == "scalar":
                var = cp.Variable(name=v.name)
                if v.lower is not None:
                    cons.append(var >= v.lower)
            elif v.kind == "sym":
                var = cp.Variable(v.shape, name=v.name, symmetric=True)
                if v.psd:
                    cons.append(var >> 0)
            else:
                var = cp.Variable(v.shape, name=v.name)
            varmap[v.name] = var
        return varmap, cons

    def solve(self, program):
        import cvxpy as cp

        varmap, cons = self._make_vars(program)
        for c in program.constraints:
            expr = c.cvxpy(varmap)
            if c.size == 1:
                expr = cp.reshape(expr, (1, 1), order="F")
            shift = (self.margin if c.strict else 0.0) * np.eye(c.size)
            if c.sense == "<":
                cons.append(expr << -shift)
            else:
                cons.append(expr >> shift)
        for fn in self.extra_constraints:
            cons.append(fn(varmap))
        objective = cp.Minimize(varmap[program.objective])
        problem = cp.Problem(objective, cons)
        opts = dict(self.solver_opts)
        if self.max_iters is not None:
            key = {"SCS": "max_iters", "CLARABEL": "max_iter",
                   "CVXOPT": "max_iters"}.get(self.solver, "max_iters")
            opts[key] = self.max_iters
        t0 = time.perf_counter()
        try:
            problem.solve(solver=self.solver, **opts)
        except cp.error.SolverError as e:
            return BackendSolution(STATUS_NUMERICAL, solver=self.name,
                                   wall_time=time.perf_counter() - t0,
                                   stats={"error": str(e)})
        wall = time.perf_counter() - t0
        stats = {"cvxpy_status": problem.status,
                 "iterations": getattr(problem.solver_stats, "num_iters", None)}
        if problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            values = {}
            for name, var in varmap.items():
                val = var.value
                if val is None:
                    return BackendSolution(STATUS_NUMERICAL, solver=self.name,
                                           wall_time=wall, stats=stats)
                values[name] = float(val) if np.isscalar(val) or val.ndim == 0 \
                    else np.asarray(val)
            return BackendSolution(STATUS_OPTIMAL, values=values,
                                   objective=float(problem.value),
                                   solver=self.name, wall_time=wall, stats=stats)
        if problem.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return BackendSolution(STATUS_INFEASIBLE, solver=self.name,
                                   wall_time=wall, stats=stats)
        return BackendSolution(STATUS_NUMERICAL, solver=self.name,
                               wall_time=wall, stats=stats)


class FallbackBackend(SdpBackend):
    """Try backends in order until one returns a definitive answer.

    A numerical failure falls through to the next backend; infeasible is
    definitive (trusted) and stops the chain.
    """

    def __init__(self, backends):
        self.backends = list(backends)
        self.name = "+".join(b.name for b in self.backends)
        self.feasibility_tol = max(b.feasibility_tol for b in self.backends)

    def solve(self, program):
        last = None
        for backend in self.backends:
            sol = backend.solve(program)
            if last is not None:
                sol.wall_time += last.wall_time
            if sol.status != STATUS_NUMERICAL:
                return sol
            last = sol
        return last


def default_backend(solver=None, **kw):
    solver = solver or os.environ.get("IT2MOF_SOLVER", "auto")
    if solver.lower() == "auto":
        return FallbackBackend([
            CvxpyBackend(solver="CLARABEL", **kw),
            CvxpyBackend(solver="SCS", eps=1e-7, max_iters=200_000, **kw),
        ])
    return CvxpyBackend(solver=solver, **kw)


# ---------------------------------------------------------------------------
# gain recovery and design results
# ---------------------------------------------------------------------------

def recover_gains(zetas, etas):
    """K[j][h] = zeta_j^{-1} eta_j^{(h)} with a residual check.

    ``zetas``: (q, nu, nu); ``etas``: (q, kappa, nu, ny).  Returns the gain
    stack and the worst condition number.
    """
    zetas = np.asarray(zetas, dtype=float)
    etas = np.asarray(etas, dtype=float)
    q, kappa = etas.shape[0], etas.shape[1]
    gains = np.zeros_like(etas)
    worst_cond = 0.0
    for j in range(q):
        cond = float(np.linalg.cond(zetas[j]))
        worst_cond = max(worst_cond, cond)
        if not np.isfinite(cond) or cond > 1e12:
            raise SynthesisError(
                f"multiplier block for rule {j} is numerically singular "
                f"(condition number {cond:.3e})")
        for h in range(kappa):
            gains[j, h] = np.linalg.solve(zetas[j], etas[j, h])
            resid = np.linalg.norm(zetas[j] @ gains[j, h] - etas[j, h])
            bound = 1e-8 * max(np.linalg.norm(etas[j, h]), 1e-30)
            if resid > bound:
                raise SynthesisError(
                    f"gain recovery residual {resid:.3e} exceeds {bound:.3e} "
                    f"for rule {j}, history {h + 1}")
    return gains, worst_cond


@dataclass
class DesignResult:
    gamma: float
    gamma2: float
    gains: np.ndarray            # (q, kappa, nu, ny)
    p_tilde: np.ndarray
    omega: np.ndarray            # recovered trigger matrix
    omega_bar: np.ndarray
    delta: float
    status: str
    method: str
    kappa: int
    theta: float
    solver: str = ""
    wall_time: float = 0.0
    program_stats: dict = field(default_factory=dict)
    verification: dict | None = None
    theta_curve: list = field(default_factory=list)
    raw_values: dict | None = None
    config_echo: dict | None = None

    def to_dict(self):
        out = {
            "gamma": self.gamma,
            "gamma2": self.gamma2,
            "gains": self.gains.tolist(),
            "certificates": {
                "p_tilde": self.p_tilde.tolist(),
                "omega": self.omega.tolist(),
                "omega_bar": self.omega_bar.tolist(),
                "delta": self.delta,
            },
            "status": self.status,
            "method": self.method,
            "kappa": self.kappa,
            "theta": self.theta,
            "solver": self.solver,
            "timings": {"solve_s": self.wall_time},
            "program": self.program_stats,
            "verification": self.verification,
            "theta_curve": self.theta_curve,
        }
        if self.config_echo is not None:
            out["config"] = self.config_echo
        return out

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def from_dict(cls, data):
        cert = data["certificates"]
        return cls(
            gamma=data["gamma"],
            gamma2=data["gamma2"],
            gains=np.asarray(data["gains"], dtype=float),
            p_tilde=np.asarray(cert["p_tilde"], dtype=float),
            omega=np.atleast_2d(np.asarray(cert["omega"], dtype=float)),
            omega_bar=np.atleast_2d(np.asarray(cert["omega_bar"], dtype=float)),
            delta=cert["delta"],
            status=data["status"],
            method=data["method"],
            kappa=data["kappa"],
            theta=data["theta"],
            solver=data.get("solver", ""),
            wall_time=data.get("timings", {}).get("solve_s", 0.0),
            program_stats=data.get("program", {}),
            verification=data.get("verification"),
            theta_curve=data.get("theta_curve", []),
            config_echo=data.get("config"),
        )

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _extract(values, plant, n_ctrl_rules, givens):
    from .lmi import _ptilde_expr, make_variables

    nx, kappa = plant.nx, givens.kappa
    variables = make_variables(nx, plant.ny, plant.nu, n_ctrl_rules, kappa)
    p_tilde = _ptilde_expr(variables, nx, kappa).numeric(values)
    zetas = np.stack([np.atleast_2d(values[f"zeta_{j}"])
                      for j in range(n_ctrl_rules)])
    etas = np.stack([
        np.stack([np.atleast_2d(values[f"eta_{j}_{h}"])
                  for h in range(1, kappa + 1)])
        for j in range(n_ctrl_rules)
    ])
    gains, cond = recover_gains(zetas, etas)
    delta = float(values["delta"])
    omega_bar = np.atleast_2d(values["omega_bar"])
    omega = omega_bar * givens.nu / (1.0 + givens.nu * delta)
    return p_tilde, gains, cond, delta, omega_bar, omega


def minimize_gamma(program, backend, plant=None, ctrl_spec=None, givens=None,
                   verify_samples=500):
    """Solve for the smallest gamma2, recover gains and attach verification."""
    sol = backend.solve(program)
    stats = {"n_constraints": len(program.constraints),
             "scalar_rows": program.scalar_rows(),
             "n_variables": len(program.variables)}
    stats.update(program.meta)
    if sol.status != STATUS_OPTIMAL:
        hint = None
        if sol.status == STATUS_INFEASIBLE:
            hint = (f"program infeasible ({len(program.constraints)} constraints); "
                    "check the given scalars (mu + hslash must stay below 1)")
        else:
            hint = ("solver failed numerically; try a theta grid search or a "
                    "smaller hslash")
        return DesignResult(
            gamma=math.nan, gamma2=math.nan,
            gains=np.zeros((0, 0, 0, 0)), p_tilde=np.zeros((0, 0)),
            omega=np.zeros((0, 0)), omega_bar=np.zeros((0, 0)),
            delta=math.nan, status=sol.status,
            method=program.meta.get("method", "?"),
            kappa=program.meta.get("kappa", 0),
            theta=givens.theta if givens is not None else math.nan,
            solver=sol.solver, wall_time=sol.wall_time,
            program_stats={**stats, "hint": hint, **sol.stats},
        )
    gamma2 = float(sol.values["gamma2"])
    p_tilde, gains, cond, delta, omega_bar, omega = _extract(
        sol.values, plant, ctrl_spec.n_rules, givens)
    verification = None
    if verify_samples:
        report = verify_design(sol.values, plant, ctrl_spec, givens,
                               n_samples=verify_samples, gains=gains)
        verification = {
            "ok": report.ok,
            "p_tilde_min_eig": report.p_tilde_min_eig,
            "omega_min_eig": report.omega_min_eig,
            "gain_residual": report.gain_residual,
            "max_weighted_eig": report.max_weighted_eig,
            "max_reduced_eig": report.max_reduced_eig,
            "n_samples": report.n_samples,
            "violations": report.violations,
        }
    return DesignResult(
        gamma=math.sqrt(gamma2), gamma2=gamma2, gains=gains,
        p_tilde=p_tilde, omega=omega, omega_bar=omega_bar, delta=delta,
        status=sol.status, method=program.meta.get("method", "?"),
        kappa=givens.kappa, theta=givens.theta, solver=sol.solver,
        wall_time=sol.wall_time,
        program_stats={**stats, "zeta_condition": cond, **sol.stats},
        verification=verification, raw_values=sol.values,
    )


def theta_search(build_program, thetas, backend, plant, ctrl_spec,
                 make_givens, verify_samples=500):
    """Solve over a grid of multiplier scalings and keep the best design.

    ``build_program(givens)`` assembles the program for one theta;
    ``make_givens(theta)`` produces the givens.  Returns the minimal-gamma
    result with the sampled (theta, gamma) curve attached.
    """
    best = None
    curve = []
    for theta in thetas:
        if theta <= 0:
            raise ValueError(f"theta must be positive, got {theta}")
        givens = make_givens(theta)
        result = minimize_gamma(build_program(givens), backend, plant,
                                ctrl_spec, givens, verify_samples)
        curve.append([float(theta),
                      None if math.isnan(result.gamma) else result.gamma])
        if result.status != STATUS_OPTIMAL:
            continue
        if best is None or result.gamma < best.gamma:
            best = result
    if best is None:
        raise SynthesisError(
            f"every grid point failed: thetas={list(thetas)}")
    best.theta_curve = curve
    return best
