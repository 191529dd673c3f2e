"""Pure-Python stepping kernel; the contract twin of the Cython extension."""

from __future__ import annotations

import numpy as np

from . import expr as ex
from .kernel import (
    STATUS_DEGENERATE,
    STATUS_EXPR_DOMAIN,
    STATUS_OK,
    STATUS_OVERFLOW,
)

_TINY = 1e-300


def _run_program(code, code_off, consts, const_off, slot, values, stack):
    prog = ex.StackProgram(
        code=code[code_off[slot]:code_off[slot + 1]],
        consts=consts[const_off[slot]:const_off[slot + 1]],
        max_stack=len(stack),
    )
    return ex.run_stack_program(prog, values)


def _memberships(mset, vec, stack, out):
    """Normalized rule weights at a premise point; returns (clamped, err)."""
    n_prem = len(mset.prem_idx)
    vals = np.empty(n_prem)
    clamped = 0
    for s in range(n_prem):
        v = vec[mset.prem_idx[s]]
        if v < mset.prem_lo[s]:
            v = mset.prem_lo[s]
            clamped = 1
        elif v > mset.prem_hi[s]:
            v = mset.prem_hi[s]
            clamped = 1
        vals[s] = v
    residual_at = -1
    acc = 0.0
    for r in range(mset.n_rules):
        if mset.residual[r]:
            residual_at = r
            out[r] = 0.0
            continue
        try:
            lo = _run_program(mset.code, mset.code_off, mset.consts,
                              mset.const_off, 3 * r, vals, stack)
            up = _run_program(mset.code, mset.code_off, mset.consts,
                              mset.const_off, 3 * r + 1, vals, stack)
            bl = _run_program(mset.code, mset.code_off, mset.consts,
                              mset.const_off, 3 * r + 2, vals, stack)
        except ex.ExprDomainError:
            return clamped, STATUS_EXPR_DOMAIN
        if not (np.isfinite(lo) and np.isfinite(up) and np.isfinite(bl)):
            return clamped, STATUS_EXPR_DOMAIN
        lo = min(max(lo, 0.0), 1.0)
        up = min(max(up, 0.0), 1.0)
        bl = min(max(bl, 0.0), 1.0)
        w = (1.0 - bl) * lo + bl * up
        out[r] = w
        acc += w
    if residual_at >= 0:
        w = 1.0 - acc
        if w < 0.0:
            w = 0.0
        out[residual_at] = w
        acc += w
    if not acc > _TINY:
        return clamped, STATUS_DEGENERATE
    out /= acc
    return clamped, STATUS_OK


def run_loop(inp):
    kappa = len(inp.varrho)
    p = inp.a.shape[0]
    q = inp.gains.shape[0]
    nx, nu, nd = inp.a.shape[1], inp.bu.shape[2], inp.bd.shape[2]
    ny, nz = inp.cy.shape[1], inp.cz.shape[1]
    T = inp.horizon

    x = np.zeros((T + 1, nx))
    y = np.zeros((T + 1, ny))
    ytrig = np.zeros((T + 1, ny))
    u = np.zeros((T + 1, nu))
    uf = np.zeros((T + 1, nu))
    z = np.zeros((T + 1, nz))
    d = np.zeros((T + 1, nd))
    varpi = np.zeros(T + 1)
    trig = np.zeros(T + 1, dtype=np.int8)
    xi = np.full(T + 1, np.nan)

    stack = [0.0] * max(inp.plant_mf.max_stack, inp.ctrl_mf.max_stack,
                        inp.d_max_stack)
    m = np.zeros(p)
    n = np.zeros(q)
    yhist = np.zeros((kappa, ny))     # row h-1 = y(t-h+1)
    yrel_raw = np.zeros((kappa, ny))  # last released raw packet
    yrel_fad = np.zeros((kappa, ny))  # held faded packet
    ehat = np.zeros(ny)

    x[0] = inp.x0
    vp = inp.varpi0
    status = STATUS_OK
    n_valid = T + 1
    clamps_plant = 0
    clamps_ctrl = 0
    t_now = np.zeros(1)

    for t in range(T + 1):
        xt = x[t]
        cl, err = _memberships(inp.plant_mf, xt, stack, m)
        clamps_plant += cl
        if err != STATUS_OK:
            status, n_valid = err, t
            break
        yt = np.zeros(ny)
        for i in range(p):
            yt += m[i] * (inp.cy[i] @ xt)
        y[t] = yt

        if t == 0:
            yhist[:] = yt
            yrel_raw[:] = yt
        else:
            yhist[1:] = yhist[:-1]
            yhist[0] = yt

        if inp.detm:
            ehat[:] = yhist[0] - yrel_raw[0]
        else:
            ehat[:] = 0.0
            for h in range(kappa):
                ehat += inp.varrho[h] * (yhist[h] - yrel_raw[h])
        qy = float(yt @ inp.omega @ yt)
        qe = float(ehat @ inp.omega @ ehat)
        check = vp / inp.nu_t + inp.rho * qy - qe
        fired = t == 0 or check <= 0.0

        if fired:
            fade = inp.fades[t]
            yrel_raw[:] = yhist
            yrel_fad[:] = fade * yhist
            trig[t] = 1
            xi[t] = fade

        varpi[t] = vp
        raw_next = inp.mu * vp + inp.rho * qy - qe
        if fired and not inp.literal_varpi:
            vp = inp.mu * vp + inp.rho * qy
        else:
            vp = raw_next

        cl, err = _memberships(inp.ctrl_mf, yrel_fad[0], stack, n)
        clamps_ctrl += cl
        if err != STATUS_OK:
            status, n_valid = err, t
            break
        ut = np.zeros(nu)
        for h in range(kappa):
            for j in range(q):
                ut += n[j] * (inp.gains[j, h] @ yrel_fad[h])
        u[t] = ut
        uft = inp.alpha_f * ut
        uf[t] = uft
        ytrig[t] = yrel_fad[0]

        zt = np.zeros(nz)
        for i in range(p):
            zt += m[i] * (inp.cz[i] @ xt)
        z[t] = zt

        t_now[0] = float(t)
        dt = np.zeros(nd)
        try:
            for c in range(nd):
                dt[c] = _run_program(inp.d_code, inp.d_code_off, inp.d_consts,
                                     inp.d_const_off, c, t_now, stack)
        except ex.ExprDomainError:
            status, n_valid = STATUS_EXPR_DOMAIN, t
            break
        d[t] = dt

        if t < T:
            xnext = np.zeros(nx)
            for i in range(p):
                xnext += m[i] * (inp.a[i] @ xt + inp.bu[i] @ uft + inp.bd[i] @ dt)
            norm = float(np.sqrt(xnext @ xnext))
            if not np.isfinite(norm) or norm > inp.overflow:
                status, n_valid = STATUS_OVERFLOW, t + 1
                break
            x[t + 1] = xnext

    return {
        "x": x, "y": y, "ytrig": ytrig, "u": u, "uf": uf, "z": z, "d": d,
        "varpi": varpi, "trig": trig, "xi": xi,
        "status": status, "n_valid": n_valid,
        "clamps_plant": clamps_plant, "clamps_ctrl": clamps_ctrl,
    }
