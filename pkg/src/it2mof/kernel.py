"""Closed-loop stepping kernel selection and input flattening.

The inner simulation loop is the hot path (Monte-Carlo suites run hundreds of
millions of steps), so it exists twice with one contract: a compiled Cython
extension (``it2mof._kernel_c``) and a pure-Python fallback
(``it2mof._kernel_py``).  The extension is picked at import when present;
set ``IT2MOF_PURE=1`` to force the fallback.  Membership functions and
disturbance signals are compiled to flat stack programs so both kernels
evaluate identical arithmetic.

Status codes returned by the kernels:
    0 ok, 1 state overflow, 2 degenerate memberships, 3 expression domain error.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import expr as ex

__all__ = [
    "STATUS_OK",
    "STATUS_OVERFLOW",
    "STATUS_DEGENERATE",
    "STATUS_EXPR_DOMAIN",
    "MembershipProgramSet",
    "KernelInputs",
    "compile_membership_set",
    "compile_disturbance",
    "active_kernel",
    "run_closed_loop",
]

STATUS_OK = 0
STATUS_OVERFLOW = 1
STATUS_DEGENERATE = 2
STATUS_EXPR_DOMAIN = 3


@dataclass(frozen=True)
class MembershipProgramSet:
    """Rule membership functions flattened to stack programs.

    Program slots are rule-major: rule r owns programs 3r (lower), 3r+1
    (upper), 3r+2 (blend).  Residual rules have empty programs.
    """

    n_rules: int
    code: np.ndarray       # (n_ops, 2) int32, concatenated programs
    code_off: np.ndarray   # (3 * n_rules + 1,) int32
    consts: np.ndarray     # float64, concatenated constant pools
    const_off: np.ndarray  # (3 * n_rules + 1,) int32
    residual: np.ndarray   # (n_rules,) int8
    prem_idx: np.ndarray   # (n_prem,) int32, coordinate in the source vector
    prem_lo: np.ndarray    # (n_prem,) float64
    prem_hi: np.ndarray    # (n_prem,) float64
    max_stack: int


def compile_membership_set(spec):
    slots = {name: s for s, name in enumerate(spec.premise)}
    code_parts, const_parts = [], []
    code_off = [0]
    const_off = [0]
    max_stack = 1
    for rule in spec.rules:
        for node in (rule.lower, rule.upper, rule.blend):
            if rule.residual or node is None:
                prog = None
            else:
                prog = ex.compile_stack_program(node, slots)
                max_stack = max(max_stack, prog.max_stack)
                code_parts.append(prog.code)
                const_parts.append(prog.consts)
            code_off.append(code_off[-1] + (0 if prog is None else len(prog.code)))
            const_off.append(const_off[-1] + (0 if prog is None else len(prog.consts)))
    code = (np.concatenate(code_parts, axis=0) if code_parts
            else np.zeros((0, 2), dtype=np.int32))
    consts = (np.concatenate(const_parts) if const_parts
              else np.zeros(0, dtype=np.float64))
    return MembershipProgramSet(
        n_rules=spec.n_rules,
        code=np.ascontiguousarray(code, dtype=np.int32),
        code_off=np.asarray(code_off, dtype=np.int32),
        consts=np.ascontiguousarray(consts, dtype=np.float64),
        const_off=np.asarray(const_off, dtype=np.int32),
        residual=np.asarray([r.residual for r in spec.rules], dtype=np.int8),
        prem_idx=np.asarray(spec.premise_index, dtype=np.int32),
        prem_lo=np.asarray(spec.domain_lo, dtype=np.float64),
        prem_hi=np.asarray(spec.domain_hi, dtype=np.float64),
        max_stack=max_stack,
    )


def compile_disturbance(exprs):
    """Flatten the per-channel disturbance expressions (variable: t)."""
    slots = {"t": 0}
    code_parts, const_parts = [], []
    code_off = [0]
    const_off = [0]
    max_stack = 1
    for node in exprs:
        prog = ex.compile_stack_program(node, slots)
        max_stack = max(max_stack, prog.max_stack)
        code_parts.append(prog.code)
        const_parts.append(prog.consts)
        code_off.append(code_off[-1] + len(prog.code))
        const_off.append(const_off[-1] + len(prog.consts))
    return (
        np.ascontiguousarray(np.concatenate(code_parts, axis=0), dtype=np.int32),
        np.asarray(code_off, dtype=np.int32),
        np.ascontiguousarray(np.concatenate(const_parts), dtype=np.float64),
        np.asarray(const_off, dtype=np.int32),
        max_stack,
    )


@dataclass
class KernelInputs:
    # plant
    a: np.ndarray
    bu: np.ndarray
    bd: np.ndarray
    cy: np.ndarray
    cz: np.ndarray
    plant_mf: MembershipProgramSet
    # controller
    gains: np.ndarray  # (q, kappa, nu, ny)
    ctrl_mf: MembershipProgramSet
    # trigger
    rho: float
    nu_t: float
    mu: float
    varrho: np.ndarray  # (kappa,), h = 1..kappa
    omega: np.ndarray   # (ny, ny)
    varpi0: float
    detm: int           # 1: memoryless error in the trigger rule
    literal_varpi: int  # 1: store the raw recursion value at trigger instants
    # channel / failure
    fades: np.ndarray   # (T+1,)
    alpha_f: float
    # disturbance programs
    d_code: np.ndarray
    d_code_off: np.ndarray
    d_consts: np.ndarray
    d_const_off: np.ndarray
    d_max_stack: int
    # run
    x0: np.ndarray
    horizon: int
    overflow: float = 1e12


def _load_impl():
    if os.environ.get("IT2MOF_PURE", "") not in ("", "0"):
        from . import _kernel_py

        return _kernel_py, False
    try:
        from . import _kernel_c

        return _kernel_c, True
    except ImportError:
        from . import _kernel_py

        return _kernel_py, False


_impl, _compiled = _load_impl()


def active_kernel():
    """(module name, is_compiled) of the selected stepping kernel."""
    return _impl.__name__, _compiled


def run_closed_loop(inputs, impl=None):
    """Run the closed loop; returns the raw output-array dict."""
    mod = _impl
    if impl == "python":
        from . import _kernel_py as mod
    elif impl == "compiled":
        from . import _kernel_c as mod
    return mod.run_loop(inputs)
