"""Command-line interface: configuration ingestion and the design / simulate /
sweep / verify / report workflows.

Exit codes are a stable contract: 0 success, 1 usage or validation error,
2 infeasible synthesis program, 3 numerical solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import subprocess
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import channel as chan
from . import expr as ex
from . import lmi, sim, synth
from .controller import ControllerGains, FailureConfig
from .model import IT2MembershipSpec, IT2Plant, MembershipRule
from .trigger import TriggerConfig, validate as trigger_validate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3


class ConfigError(Exception):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# configuration loading
# ---------------------------------------------------------------------------

def _need(mapping, key, path):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"{path}.{key}", "missing required key")
    return mapping[key]


def _number(value, path, lo=None, hi=None, strict_lo=False):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(path, f"expected a number, got {value!r}")
    v = float(value)
    if lo is not None and (v <= lo if strict_lo else v < lo):
        raise ConfigError(path, f"must be {'>' if strict_lo else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(path, f"must be <= {hi}, got {v}")
    return v


def _int(value, path, lo=None):
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be >= {lo}, got {value}")
    return value


def _expr(value, path):
    try:
        return ex.parse(str(value))
    except ex.ExprError as e:
        raise ConfigError(path, f"bad expression: {e}") from None


def _membership_spec(section, path, default_prefix):
    rules = []
    for r, rule in enumerate(_need(section, "memberships", path)):
        rp = f"{path}.memberships[{r}]"
        if rule.get("residual"):
            rules.append(MembershipRule(residual=True))
            continue
        rules.append(MembershipRule(
            lower=_expr(_need(rule, "lower", rp), rp + ".lower"),
            upper=_expr(_need(rule, "upper", rp), rp + ".upper"),
            blend=_expr(_need(rule, "blend", rp), rp + ".blend"),
        ))
    premise = tuple(section.get("premise", [f"{default_prefix}1"]))
    domain = section.get("domain", {})
    lo, hi, idx = [], [], []
    for name in premise:
        if name not in domain:
            raise ConfigError(f"{path}.domain", f"no domain for premise {name!r}")
        box = domain[name]
        if not (isinstance(box, (list, tuple)) and len(box) == 2):
            raise ConfigError(f"{path}.domain.{name}", "expected [low, high]")
        lo.append(_number(box[0], f"{path}.domain.{name}[0]"))
        hi.append(_number(box[1], f"{path}.domain.{name}[1]"))
        digits = "".join(c for c in name if c.isdigit())
        idx.append(int(digits) - 1 if digits else 0)
    try:
        return IT2MembershipSpec(tuple(rules), premise, tuple(idx),
                                 tuple(lo), tuple(hi))
    except ValueError as e:
        raise ConfigError(path, str(e)) from None


@dataclass
class CaseConfig:
    name: str
    method: str
    varrho: tuple | str          # weights or "detm"
    e_scalars: tuple
    f_scalar: float
    kappa: int | None = None     # forced memory depth (memoryless cases)


@dataclass
class ToolkitConfig:
    raw: dict
    plant: IT2Plant
    ctrl_spec: IT2MembershipSpec
    trigger_raw: dict
    channel: chan.FadingConfig
    failure: FailureConfig
    design_raw: dict
    sim_raw: dict
    cases: dict
    seed: int

    @property
    def kappa(self):
        return self.trigger_raw["kappa"]

    def trigger_config(self, omega, kappa=None, varrho=None):
        kappa = kappa or self.kappa
        if varrho is None:
            varrho = self.trigger_raw["varrho"]
        if varrho == "detm":
            varrho = (1.0,) + (0.0,) * (kappa - 1)
        varrho = tuple(varrho)
        if len(varrho) != kappa:
            if set(varrho[kappa:]) <= {0.0} and abs(sum(varrho[:kappa]) - 1) < 1e-9:
                varrho = varrho[:kappa]
            else:
                raise ConfigError("trigger.varrho",
                                  f"{len(varrho)} weights for kappa={kappa}")
        return TriggerConfig(
            rho=self.trigger_raw["rho"], nu=self.trigger_raw["nu"],
            mu=self.trigger_raw["mu"], kappa=kappa, varrho=varrho,
            omega=omega, varpi0=self.trigger_raw["varpi0"],
        )

    def givens(self, method=None, kappa=None, theta=None, case=None):
        d = dict(self.design_raw)
        varrho = self.trigger_raw["varrho"]
        e_scalars = d["e_scalars"]
        f_scalar = d["f_scalar"]
        if case is not None:
            c = self.cases[case]
            varrho = c.varrho
            e_scalars, f_scalar = c.e_scalars, c.f_scalar
            kappa = kappa or c.kappa
        kappa = kappa or self.kappa
        if varrho == "detm":
            varrho = (1.0,) + (0.0,) * (kappa - 1)
        varrho = tuple(varrho)[:kappa]
        total = sum(varrho)
        if abs(total - 1.0) > 1e-9:
            varrho = tuple(v / total for v in varrho)
        return lmi.SynthesisGivens(
            rho=self.trigger_raw["rho"], nu=self.trigger_raw["nu"],
            mu=self.trigger_raw["mu"], kappa=kappa, varrho=varrho,
            xi_bar=self.channel.xi_bar, xi_var=self.channel.xi_var,
            alpha_f=self.failure.alpha_f, hslash=d["hslash"],
            theta=theta if theta is not None else d["theta"][0],
            e_scalars=e_scalars, f_scalar=f_scalar,
            varrho_floor=d["varrho_floor"],
        )

    def theta_grid(self):
        return tuple(self.design_raw["theta"])

    def partition(self):
        return self.design_raw["partition"]

    def scenario(self, gains_result, seed=None, horizon=None, x0=None,
                 kappa=None, varrho=None):
        gains = ControllerGains(gains_result.gains, self.ctrl_spec)
        trig = self.trigger_config(gains_result.omega,
                                   kappa=kappa or gains_result.kappa,
                                   varrho=varrho)
        return sim.ClosedLoopScenario(
            plant=self.plant, gains=gains, trigger=trig, fading=self.channel,
            failure=self.failure,
            disturbance=self.sim_raw["disturbance"],
            x0=x0 if x0 is not None else self.sim_raw["x0"],
            horizon=horizon or self.sim_raw["horizon"],
            seed=seed if seed is not None else self.seed,
        )


def load_config(path_or_dict):
    if isinstance(path_or_dict, dict):
        raw = path_or_dict
    else:
        with open(path_or_dict) as f:
            raw = yaml.safe_load(f)
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a mapping")
    seed = _int(raw.get("seed", 0), "seed")

    psec = _need(raw, "plant", "<root>")
    pspec = _membership_spec(psec, "plant", "x")
    try:
        plant = IT2Plant(
            a=_need(psec, "a", "plant"), bu=_need(psec, "bu", "plant"),
            bd=_need(psec, "bd", "plant"), cy=_need(psec, "cy", "plant"),
            cz=_need(psec, "cz", "plant"), memberships=pspec)
    except ValueError as e:
        raise ConfigError("plant", str(e)) from None

    csec = _need(raw, "controller", "<root>")
    ctrl_spec = _membership_spec(csec, "controller", "y")

    tsec = _need(raw, "trigger", "<root>")
    kappa = _int(_need(tsec, "kappa", "trigger"), "trigger.kappa", lo=1)
    varrho = tsec.get("varrho", "detm")
    if varrho != "detm":
        varrho = tuple(_number(v, f"trigger.varrho[{i}]", lo=0.0)
                       for i, v in enumerate(varrho))
    trigger_raw = {
        "rho": _number(_need(tsec, "rho", "trigger"), "trigger.rho", 0, 1, True),
        "nu": _number(_need(tsec, "nu", "trigger"), "trigger.nu", 0, None, True),
        "mu": _number(_need(tsec, "mu", "trigger"), "trigger.mu", 0, 1, True),
        "kappa": kappa,
        "varrho": varrho,
        "varpi0": _number(tsec.get("varpi0", 1.0), "trigger.varpi0", lo=0.0),
        "omega": tsec.get("omega", "free"),
    }

    hsec = _need(raw, "channel", "<root>")
    xi_star = _number(_need(hsec, "xi_star", "channel"), "channel.xi_star", lo=0.0)
    star_is = hsec.get("xi_star_is", "variance")
    if star_is not in ("variance", "std"):
        raise ConfigError("channel.xi_star_is", "expected 'variance' or 'std'")
    xi_var = xi_star if star_is == "variance" else xi_star ** 2
    try:
        fading = chan.FadingConfig(
            xi_bar=_number(_need(hsec, "xi_bar", "channel"), "channel.xi_bar"),
            xi_var=xi_var, family=hsec.get("family", "gaussian"),
            bounds=tuple(hsec["bounds"]) if "bounds" in hsec else None,
            points=tuple(hsec["points"]) if "points" in hsec else None,
            seed=_int(hsec.get("seed", seed), "channel.seed"))
    except ValueError as e:
        raise ConfigError("channel", str(e)) from None

    fsec = raw.get("failure", {})
    try:
        failure = FailureConfig(
            alpha_f=_number(fsec.get("alpha_f", 1.0), "failure.alpha_f", 0.0, 1.0))
    except ValueError as e:
        raise ConfigError("failure", str(e)) from None

    dsec = raw.get("design", {})
    method = dsec.get("method", "mfi")
    if method not in ("mfi", "mfd"):
        raise ConfigError("design.method", f"expected mfi or mfd, got {method!r}")
    theta = dsec.get("theta", 1.0)
    if isinstance(theta, dict):
        theta = theta.get("grid")
    if isinstance(theta, (int, float)):
        theta = [float(theta)]
    theta = [
        _number(t, f"design.theta[{i}]", 0, None, True)
        for i, t in enumerate(theta)
    ]
    part = dsec.get("partition", {})
    design_raw = {
        "method": method,
        "hslash": _number(dsec.get("hslash", 0.05), "design.hslash", 0, 1, True),
        "theta": theta,
        "e_scalars": tuple(_number(v, f"design.E[{i}]")
                           for i, v in enumerate(dsec.get("E", []))),
        "f_scalar": _number(dsec.get("F", 1.0), "design.F"),
        "varrho_floor": _number(dsec.get("varrho_floor", 0.01),
                                "design.varrho_floor", 0, None, True),
        "partition": {
            "p": _int(part.get("p", 20), "design.partition.p", lo=1),
            "q": _int(part.get("q", 20), "design.partition.q", lo=1),
            "wp": _int(part.get("wp", 1), "design.partition.wp", lo=1),
            "max_rows": _int(part.get("max_rows", 100_000),
                             "design.partition.max_rows", lo=1),
        },
    }
    if design_raw["hslash"] + trigger_raw["mu"] >= 1.0:
        raise ConfigError("design.hslash",
                          f"mu + hslash must stay below 1 for feasibility "
                          f"(got {trigger_raw['mu']} + {design_raw['hslash']})")

    ssec = raw.get("sim", {})
    dist = ssec.get("disturbance", "0")
    if isinstance(dist, str):
        dist = [dist] * plant.nd
    if len(dist) != plant.nd:
        raise ConfigError("sim.disturbance",
                          f"need {plant.nd} channel expressions, got {len(dist)}")
    sim_raw = {
        "horizon": _int(ssec.get("horizon", 100), "sim.horizon", lo=1),
        "x0": [_number(v, f"sim.x0[{i}]")
               for i, v in enumerate(ssec.get("x0", [0.0] * plant.nx))],
        "disturbance": tuple(_expr(e, f"sim.disturbance[{i}]")
                             for i, e in enumerate(dist)),
        "seeds": _int(ssec.get("seeds", 100), "sim.seeds", lo=1),
    }
    if len(sim_raw["x0"]) != plant.nx:
        raise ConfigError("sim.x0", f"need {plant.nx} entries")

    cases = {}
    for name, c in (raw.get("cases") or {}).items():
        cp = f"cases.{name}"
        cvarrho = c.get("varrho", "detm")
        if cvarrho != "detm":
            cvarrho = tuple(float(v) for v in cvarrho)
        cases[name] = CaseConfig(
            name=name,
            method=c.get("method", method),
            varrho=cvarrho,
            e_scalars=tuple(_number(v, f"{cp}.E[{i}]")
                            for i, v in enumerate(c.get("E", dsec.get("E", [])))),
            f_scalar=_number(c.get("F", design_raw["f_scalar"]), f"{cp}.F"),
            kappa=_int(c["kappa"], f"{cp}.kappa", lo=1) if "kappa" in c else None,
        )

    return ToolkitConfig(raw=raw, plant=plant, ctrl_spec=ctrl_spec,
                         trigger_raw=trigger_raw, channel=fading,
                         failure=failure, design_raw=design_raw,
                         sim_raw=sim_raw, cases=cases, seed=seed)


def bundled_config_path(name="example1"):
    return os.path.join(os.path.dirname(__file__), "fixtures", f"{name}.yaml")


# ---------------------------------------------------------------------------
# design / simulate / sweep / verify / report
# ---------------------------------------------------------------------------

def run_design(config, method=None, kappa=None, case=None, backend=None,
               verify_samples=500, max_rows=None):
    """Synthesize one design (theta grid-searched); returns a DesignResult."""
    method = method or (config.cases[case].method if case else
                        config.design_raw["method"])
    backend = backend or synth.default_backend()

    def make_givens(theta):
        return config.givens(method=method, kappa=kappa, theta=theta, case=case)

    part_cfg = config.partition()
    partition = None
    if method == "mfd":
        partition = lmi.compute_fou_bounds(
            config.plant.memberships, config.ctrl_spec,
            part_cfg["p"], part_cfg["q"], part_cfg["wp"])

    def build(givens):
        if method == "mfd":
            return lmi.assemble_theorem2(
                config.plant, config.ctrl_spec.n_rules, givens, partition,
                max_scalar_rows=max_rows or part_cfg["max_rows"])
        return lmi.assemble_theorem1(config.plant, config.ctrl_spec.n_rules,
                                     givens)

    result = synth.theta_search(build, config.theta_grid(), backend,
                                config.plant, config.ctrl_spec, make_givens,
                                verify_samples=verify_samples)
    result.config_echo = config.raw
    if method == "mfd":
        result.program_stats["partition"] = {
            "p": part_cfg["p"], "q": part_cfg["q"], "wp": part_cfg["wp"]}
    return result


def _result_scenario(config, result, seed=None, horizon=None, x0=None,
                     varrho=None):
    return config.scenario(result, seed=seed, horizon=horizon, x0=x0,
                           varrho=varrho)


def cmd_design(args):
    config = load_config(args.config)
    try:
        result = run_design(config, method=args.method, kappa=args.kappa,
                            case=args.case,
                            backend=synth.default_backend(args.solver))
    except synth.SynthesisError as e:
        print(f"design failed: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    result.save(args.out)
    print(f"status={result.status} method={result.method} kappa={result.kappa} "
          f"gamma={result.gamma:.6g} theta={result.theta} -> {args.out}")
    if result.status == synth.STATUS_OPTIMAL:
        return EXIT_OK
    return EXIT_INFEASIBLE if result.status == synth.STATUS_INFEASIBLE \
        else EXIT_NUMERICAL


def cmd_simulate(args):
    result = synth.DesignResult.load(args.design)
    if result.status != synth.STATUS_OPTIMAL:
        print(f"design file holds a non-optimal result ({result.status})",
              file=sys.stderr)
        return EXIT_USAGE
    config = load_config(args.config or result.config_echo)
    x0 = None
    if args.x0 is not None:
        x0 = [float(v) for v in args.x0.split(",")]
    scenario = _result_scenario(config, result, seed=args.seed,
                                horizon=args.horizon, x0=x0)
    trace = sim.run(scenario, run_index=args.run_index, detm=args.detm)
    trace.to_csv(args.trace)
    summary = trace.summary()
    summary["gamma"] = result.gamma
    out = args.summary or (os.path.splitext(args.trace)[0] + "_summary.json")
    with open(out, "w") as f:
        json.dump(summary, f, indent=2)
    print(f"trace -> {args.trace} ({len(trace)} rows), summary -> {out}")
    print(f"tr={summary['tr']:.4f} empirical_hinf={summary['empirical_hinf']} "
          f"status={summary['status']}")
    return EXIT_OK


def run_sweep(config, kappas, case_names, backend=None, seeds=None,
              verify_samples=0):
    """Gamma and triggering-rate tables over cases and memory depths."""
    seeds = seeds or config.sim_raw["seeds"]
    gamma_table = {}
    tr_table = {}
    for name in case_names:
        case = config.cases[name]
        for kappa in kappas:
            key = (name, kappa)
            if case.kappa is not None and kappa != case.kappa:
                gamma_table[key] = None
                tr_table[key] = None
                continue
            try:
                result = run_design(config, case=name, kappa=kappa,
                                    backend=backend,
                                    verify_samples=verify_samples)
                gamma_table[key] = result.gamma
                varrho = case.varrho
                scenario = _result_scenario(config, result, varrho=varrho)
                rates = [sim.triggering_rate(sim.run(scenario, run_index=r))
                         for r in range(seeds)]
                tr_table[key] = float(np.mean(rates))
            except Exception as e:
                warnings.warn(f"sweep cell {name} kappa={kappa} failed: {e}")
                gamma_table[key] = None
                tr_table[key] = None
    return gamma_table, tr_table


def _write_table(path, table, case_names, kappas):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["case"] + [f"kappa_{k}" for k in kappas])
        for name in case_names:
            row = [name]
            for k in kappas:
                v = table[(name, k)]
                row.append("NA" if v is None else repr(float(v)))
            w.writerow(row)


def cmd_sweep(args):
    config = load_config(args.config)
    case_names = [c.strip() for c in args.cases.split(",") if c.strip()]
    if not case_names:
        print("empty case list", file=sys.stderr)
        return EXIT_USAGE
    for name in case_names:
        if name not in config.cases:
            print(f"unknown case {name!r} (configured: "
                  f"{', '.join(config.cases) or 'none'})", file=sys.stderr)
            return EXIT_USAGE
    lo, _, hi = args.kappa.partition("..")
    kappas = list(range(int(lo), int(hi or lo) + 1))
    gamma_table, tr_table = run_sweep(
        config, kappas, case_names,
        backend=synth.default_backend(args.solver), seeds=args.seeds)
    _write_table(args.out_gamma, gamma_table, case_names, kappas)
    _write_table(args.out_tr, tr_table, case_names, kappas)
    print(f"gamma table -> {args.out_gamma}")
    print(f"triggering-rate table -> {args.out_tr}")
    return EXIT_OK


def cmd_verify(args):
    result = synth.DesignResult.load(args.design)
    config = load_config(args.config or result.config_echo)
    givens = config.givens(method=result.method, kappa=result.kappa,
                           theta=result.theta)
    values = _values_from_result(result, config, givens)
    report = lmi.verify_design(values, config.plant, config.ctrl_spec, givens,
                               n_samples=args.samples, gains=None)
    print(f"p_tilde min eig: {report.p_tilde_min_eig:.6g}")
    print(f"omega_bar min eig: {report.omega_min_eig:.6g}")
    print(f"max weighted eig over {report.n_samples} samples: "
          f"{report.max_weighted_eig:.6g}")
    print(f"max reduced-form eig: {report.max_reduced_eig:.6g}")
    if report.violations:
        for v in report.violations:
            print(f"VIOLATION: {v}")
        return EXIT_USAGE
    print("verification ok")
    return EXIT_OK


def _values_from_result(result, config, givens):
    """Rebuild a variable assignment from a stored design result."""
    if result.raw_values is not None:
        return result.raw_values
    kappa, nx = result.kappa, config.plant.nx
    values = {
        "P22": result.p_tilde[(kappa - 1) * nx:, (kappa - 1) * nx:],
        "omega_bar": result.omega_bar,
        "delta": result.delta,
        "gamma2": result.gamma2,
    }
    if kappa > 1:
        values["P11"] = result.p_tilde[:(kappa - 1) * nx, :(kappa - 1) * nx]
        values["P12"] = result.p_tilde[:(kappa - 1) * nx, (kappa - 1) * nx:]
    # stored results keep gains, not the multiplier factorization: rebuild an
    # equivalent assignment with unit multipliers
    for j in range(config.ctrl_spec.n_rules):
        values[f"zeta_{j}"] = np.eye(config.plant.nu)
        for h in range(1, kappa + 1):
            values[f"eta_{j}_{h}"] = result.gains[j, h - 1]
    return values


def cmd_report(args):
    manifest = {"figures": []}
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    fmt = args.format
    for trace in args.traces or []:
        base = os.path.splitext(os.path.basename(trace))[0]
        for kind in ("response", "control"):
            manifest["figures"].append({
                "kind": kind, "traces": [os.path.abspath(trace)],
                "labels": [base],
                "out": os.path.join(out_dir, f"{base}_{kind}.{fmt}"),
            })
    if args.traces and len(args.traces) > 1:
        labels = [os.path.splitext(os.path.basename(t))[0] for t in args.traces]
        manifest["figures"].append({
            "kind": "trigger-raster",
            "traces": [os.path.abspath(t) for t in args.traces],
            "labels": labels,
            "out": os.path.join(out_dir, f"trigger_raster.{fmt}"),
        })
    if args.sweep:
        manifest["figures"].append({
            "kind": "sweep-bars", "traces": [os.path.abspath(args.sweep)],
            "labels": [],
            "out": os.path.join(out_dir, f"sweep_bars.{fmt}"),
        })
    manifest_path = args.manifest or os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2)
    print(f"figure manifest -> {manifest_path} ({len(manifest['figures'])} figures)")
    if args.render:
        renderer = args.renderer or os.path.join(
            os.path.dirname(os.path.dirname(os.path.dirname(
                os.path.abspath(__file__)))), "frontend", "dist", "cli.js")
        if not os.path.exists(renderer):
            print(f"renderer not found at {renderer}; build the frontend first",
                  file=sys.stderr)
            return EXIT_USAGE
        proc = subprocess.run(["node", renderer, manifest_path])
        return proc.returncode
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="it2mof",
        description="Event-triggered memory output-feedback co-design for "
                    "interval type-2 fuzzy systems")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="synthesize controller gains and trigger")
    d.add_argument("--config", required=True)
    d.add_argument("--method", choices=["mfi", "mfd"])
    d.add_argument("--kappa", type=int)
    d.add_argument("--case")
    d.add_argument("--solver", default=None)
    d.add_argument("--out", default="design.json")
    d.set_defaults(fn=cmd_design)

    s = sub.add_parser("simulate", help="run the closed loop from a design file")
    s.add_argument("--design", required=True)
    s.add_argument("--config", default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--run-index", type=int, default=0)
    s.add_argument("--horizon", type=int, default=None)
    s.add_argument("--x0", default=None, help="comma-separated initial state")
    s.add_argument("--detm", action="store_true",
                   help="use the memoryless trigger error")
    s.add_argument("--trace", default="trace.csv")
    s.add_argument("--summary", default=None)
    s.set_defaults(fn=cmd_simulate)

    w = sub.add_parser("sweep", help="gamma / triggering-rate tables over cases")
    w.add_argument("--config", required=True)
    w.add_argument("--kappa", default="1..4", help="range, e.g. 1..4")
    w.add_argument("--cases", required=True, help="comma-separated case names")
    w.add_argument("--seeds", type=int, default=None)
    w.add_argument("--solver", default=None)
    w.add_argument("--out-gamma", default="sweep_gamma.csv")
    w.add_argument("--out-tr", default="sweep_tr.csv")
    w.set_defaults(fn=cmd_sweep)

    v = sub.add_parser("verify", help="numerically re-check a stored design")
    v.add_argument("--design", required=True)
    v.add_argument("--config", default=None)
    v.add_argument("--samples", type=int, default=2000)
    v.set_defaults(fn=cmd_verify)

    r = sub.add_parser("report", help="emit a figure manifest (and render)")
    r.add_argument("--traces", nargs="*")
    r.add_argument("--sweep", default=None)
    r.add_argument("--out-dir", default="figures")
    r.add_argument("--format", default="png", choices=["png", "svg"])
    r.add_argument("--manifest", default=None)
    r.add_argument("--render", action="store_true")
    r.add_argument("--renderer", default=None)
    r.set_defaults(fn=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"missing file: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
