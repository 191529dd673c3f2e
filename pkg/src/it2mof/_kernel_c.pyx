# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stepping kernel; the contract twin of ``_kernel_py``.

Executes the flattened membership/disturbance stack programs and the
closed-loop recursion in C.  Opcode numbering matches ``it2mof.expr``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport NAN, cos, exp, fabs, floor, isfinite, pow, sin, sqrt

cnp.import_array()

cdef enum:
    K_OK = 0
    K_OVERFLOW = 1
    K_DEGENERATE = 2
    K_EXPR_DOMAIN = 3


cdef double _run_prog(const int[:, ::1] code, int c0, int c1,
                      const double[::1] consts, int k0,
                      const double* vals, double* stack, int* err) noexcept nogil:
    cdef int pc, op, arg, top = -1
    cdef double a, b
    for pc in range(c0, c1):
        op = code[pc, 0]
        arg = code[pc, 1]
        if op == 0:    # PUSH
            top += 1
            stack[top] = consts[k0 + arg]
        elif op == 1:  # LOAD
            top += 1
            stack[top] = vals[arg]
        elif op == 2:
            stack[top - 1] += stack[top]
            top -= 1
        elif op == 3:
            stack[top - 1] -= stack[top]
            top -= 1
        elif op == 4:
            stack[top - 1] *= stack[top]
            top -= 1
        elif op == 5:
            if stack[top] == 0.0:
                err[0] = K_EXPR_DOMAIN
                return NAN
            stack[top - 1] /= stack[top]
            top -= 1
        elif op == 6:
            stack[top] = -stack[top]
        elif op == 7:
            a = stack[top - 1]
            b = stack[top]
            if a == 0.0 and b < 0.0:
                err[0] = K_EXPR_DOMAIN
                return NAN
            if a < 0.0 and b != floor(b):
                err[0] = K_EXPR_DOMAIN
                return NAN
            stack[top - 1] = pow(a, b)
            top -= 1
        elif op == 8:
            stack[top] = sin(stack[top])
        elif op == 9:
            stack[top] = cos(stack[top])
        elif op == 10:
            stack[top] = exp(stack[top])
        elif op == 11:
            stack[top] = fabs(stack[top])
        elif op == 12:
            if stack[top] < stack[top - 1]:
                stack[top - 1] = stack[top]
            top -= 1
        else:
            if stack[top] > stack[top - 1]:
                stack[top - 1] = stack[top]
            top -= 1
    return stack[top]


cdef inline double _clamp01(double v) noexcept nogil:
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


cdef int _memberships(const int[:, ::1] code, const int[::1] code_off,
                      const double[::1] consts, const int[::1] const_off,
                      const signed char[::1] residual,
                      const int[::1] prem_idx, const double[::1] prem_lo,
                      const double[::1] prem_hi, int n_rules,
                      const double* vec, double* prem_vals, double* stack,
                      double* out, int* clamped) noexcept nogil:
    cdef int s, r, res_at = -1
    cdef double v, lo, up, bl, w, acc = 0.0
    cdef int err = 0
    for s in range(prem_idx.shape[0]):
        v = vec[prem_idx[s]]
        if v < prem_lo[s]:
            v = prem_lo[s]
            clamped[0] += 1
        elif v > prem_hi[s]:
            v = prem_hi[s]
            clamped[0] += 1
        prem_vals[s] = v
    for r in range(n_rules):
        if residual[r]:
            res_at = r
            out[r] = 0.0
            continue
        lo = _run_prog(code, code_off[3 * r], code_off[3 * r + 1],
                       consts, const_off[3 * r], prem_vals, stack, &err)
        up = _run_prog(code, code_off[3 * r + 1], code_off[3 * r + 2],
                       consts, const_off[3 * r + 1], prem_vals, stack, &err)
        bl = _run_prog(code, code_off[3 * r + 2], code_off[3 * r + 3],
                       consts, const_off[3 * r + 2], prem_vals, stack, &err)
        if err != 0:
            return K_EXPR_DOMAIN
        if not (isfinite(lo) and isfinite(up) and isfinite(bl)):
            return K_EXPR_DOMAIN
        lo = _clamp01(lo)
        up = _clamp01(up)
        bl = _clamp01(bl)
        w = (1.0 - bl) * lo + bl * up
        out[r] = w
        acc += w
    if res_at >= 0:
        w = 1.0 - acc
        if w < 0.0:
            w = 0.0
        out[res_at] = w
        acc += w
    if not acc > 1e-300:
        return K_DEGENERATE
    for r in range(n_rules):
        out[r] /= acc
    return K_OK


def run_loop(inp):
    cdef int kappa = len(inp.varrho)
    cdef int p = inp.a.shape[0]
    cdef int q = inp.gains.shape[0]
    cdef int nx = inp.a.shape[1]
    cdef int nu = inp.bu.shape[2]
    cdef int nd = inp.bd.shape[2]
    cdef int ny = inp.cy.shape[1]
    cdef int nz = inp.cz.shape[1]
    cdef int T = inp.horizon

    cdef const double[:, :, ::1] A = inp.a
    cdef const double[:, :, ::1] Bu = inp.bu
    cdef const double[:, :, ::1] Bd = inp.bd
    cdef const double[:, :, ::1] Cy = inp.cy
    cdef const double[:, :, ::1] Cz = inp.cz
    cdef const double[:, :, :, ::1] K = inp.gains
    cdef const double[::1] varrho = inp.varrho
    cdef const double[:, ::1] omega = inp.omega
    cdef const double[::1] fades = inp.fades
    cdef const double[::1] x0 = inp.x0

    pm = inp.plant_mf
    cm = inp.ctrl_mf
    cdef const int[:, ::1] pm_code = pm.code
    cdef const int[::1] pm_code_off = pm.code_off
    cdef const double[::1] pm_consts = pm.consts
    cdef const int[::1] pm_const_off = pm.const_off
    cdef const signed char[::1] pm_res = pm.residual
    cdef const int[::1] pm_idx = pm.prem_idx
    cdef const double[::1] pm_lo = pm.prem_lo
    cdef const double[::1] pm_hi = pm.prem_hi
    cdef const int[:, ::1] cm_code = cm.code
    cdef const int[::1] cm_code_off = cm.code_off
    cdef const double[::1] cm_consts = cm.consts
    cdef const int[::1] cm_const_off = cm.const_off
    cdef const signed char[::1] cm_res = cm.residual
    cdef const int[::1] cm_idx = cm.prem_idx
    cdef const double[::1] cm_lo = cm.prem_lo
    cdef const double[::1] cm_hi = cm.prem_hi
    cdef const int[:, ::1] d_code = inp.d_code
    cdef const int[::1] d_code_off = inp.d_code_off
    cdef const double[::1] d_consts = inp.d_consts
    cdef const int[::1] d_const_off = inp.d_const_off

    cdef double rho = inp.rho
    cdef double nu_t = inp.nu_t
    cdef double mu = inp.mu
    cdef double varpi0 = inp.varpi0
    cdef int detm = inp.detm
    cdef int literal = inp.literal_varpi
    cdef double alpha_f = inp.alpha_f
    cdef double overflow = inp.overflow

    x_arr = np.zeros((T + 1, nx))
    y_arr = np.zeros((T + 1, ny))
    ytrig_arr = np.zeros((T + 1, ny))
    u_arr = np.zeros((T + 1, nu))
    uf_arr = np.zeros((T + 1, nu))
    z_arr = np.zeros((T + 1, nz))
    d_arr = np.zeros((T + 1, nd))
    varpi_arr = np.zeros(T + 1)
    trig_arr = np.zeros(T + 1, dtype=np.int8)
    xi_arr = np.full(T + 1, np.nan)
    cdef double[:, ::1] X = x_arr
    cdef double[:, ::1] Y = y_arr
    cdef double[:, ::1] YT = ytrig_arr
    cdef double[:, ::1] U = u_arr
    cdef double[:, ::1] UF = uf_arr
    cdef double[:, ::1] Z = z_arr
    cdef double[:, ::1] D = d_arr
    cdef double[::1] VP = varpi_arr
    cdef signed char[::1] TR = trig_arr
    cdef double[::1] XI = xi_arr

    cdef int max_stack = max(pm.max_stack, cm.max_stack, inp.d_max_stack, 1)
    cdef int max_prem = max(pm_idx.shape[0], cm_idx.shape[0], 1)
    stack_buf = np.zeros(max_stack)
    prem_buf = np.zeros(max_prem)
    m_buf = np.zeros(p)
    n_buf = np.zeros(q)
    yhist_buf = np.zeros((kappa, ny))
    yrel_raw_buf = np.zeros((kappa, ny))
    yrel_fad_buf = np.zeros((kappa, ny))
    ehat_buf = np.zeros(ny)
    work_buf = np.zeros(max(nx, nu, nz, nd, 1))
    tvar_buf = np.zeros(1)
    cdef double[::1] stack = stack_buf
    cdef double[::1] prem = prem_buf
    cdef double[::1] m = m_buf
    cdef double[::1] n = n_buf
    cdef double[:, ::1] yhist = yhist_buf
    cdef double[:, ::1] yrel_raw = yrel_raw_buf
    cdef double[:, ::1] yrel_fad = yrel_fad_buf
    cdef double[::1] ehat = ehat_buf
    cdef double[::1] work = work_buf
    cdef double[::1] tvar = tvar_buf

    cdef int status = K_OK
    cdef int n_valid = T + 1
    cdef int clamps_plant = 0
    cdef int clamps_ctrl = 0
    cdef int t, i, j, h, r, c, err, fired
    cdef double vp = varpi0
    cdef double qy, qe, check, acc, fade, raw_next, norm, dval

    with nogil:
        for r in range(nx):
            X[0, r] = x0[r]
        for t in range(T + 1):
            err = _memberships(pm_code, pm_code_off, pm_consts, pm_const_off,
                               pm_res, pm_idx, pm_lo, pm_hi, p,
                               &X[t, 0], &prem[0], &stack[0], &m[0],
                               &clamps_plant)
            if err != K_OK:
                status = err
                n_valid = t
                break
            for r in range(ny):
                acc = 0.0
                for i in range(p):
                    for c in range(nx):
                        acc += m[i] * Cy[i, r, c] * X[t, c]
                Y[t, r] = acc

            if t == 0:
                for h in range(kappa):
                    for r in range(ny):
                        yhist[h, r] = Y[0, r]
                        yrel_raw[h, r] = Y[0, r]
            else:
                for h in range(kappa - 1, 0, -1):
                    for r in range(ny):
                        yhist[h, r] = yhist[h - 1, r]
                for r in range(ny):
                    yhist[0, r] = Y[t, r]

            if detm:
                for r in range(ny):
                    ehat[r] = yhist[0, r] - yrel_raw[0, r]
            else:
                for r in range(ny):
                    ehat[r] = 0.0
                for h in range(kappa):
                    for r in range(ny):
                        ehat[r] += varrho[h] * (yhist[h, r] - yrel_raw[h, r])
            qy = 0.0
            qe = 0.0
            for r in range(ny):
                for c in range(ny):
                    qy += Y[t, r] * omega[r, c] * Y[t, c]
                    qe += ehat[r] * omega[r, c] * ehat[c]
            check = vp / nu_t + rho * qy - qe
            fired = 1 if (t == 0 or check <= 0.0) else 0

            if fired:
                fade = fades[t]
                for h in range(kappa):
                    for r in range(ny):
                        yrel_raw[h, r] = yhist[h, r]
                        yrel_fad[h, r] = fade * yhist[h, r]
                TR[t] = 1
                XI[t] = fade

            VP[t] = vp
            raw_next = mu * vp + rho * qy - qe
            if fired and not literal:
                vp = mu * vp + rho * qy
            else:
                vp = raw_next

            err = _memberships(cm_code, cm_code_off, cm_consts, cm_const_off,
                               cm_res, cm_idx, cm_lo, cm_hi, q,
                               &yrel_fad[0, 0], &prem[0], &stack[0], &n[0],
                               &clamps_ctrl)
            if err != K_OK:
                status = err
                n_valid = t
                break
            for r in range(nu):
                acc = 0.0
                for h in range(kappa):
                    for j in range(q):
                        for c in range(ny):
                            acc += n[j] * K[j, h, r, c] * yrel_fad[h, c]
                U[t, r] = acc
                UF[t, r] = alpha_f * acc
            for r in range(ny):
                YT[t, r] = yrel_fad[0, r]

            for r in range(nz):
                acc = 0.0
                for i in range(p):
                    for c in range(nx):
                        acc += m[i] * Cz[i, r, c] * X[t, c]
                Z[t, r] = acc

            tvar[0] = <double> t
            err = 0
            for c in range(nd):
                dval = _run_prog(d_code, d_code_off[c], d_code_off[c + 1],
                                 d_consts, d_const_off[c], &tvar[0],
                                 &stack[0], &err)
                if err != 0:
                    break
                D[t, c] = dval
            if err != 0:
                status = K_EXPR_DOMAIN
                n_valid = t
                break

            if t < T:
                norm = 0.0
                for r in range(nx):
                    acc = 0.0
                    for i in range(p):
                        for c in range(nx):
                            acc += m[i] * A[i, r, c] * X[t, c]
                        for c in range(nu):
                            acc += m[i] * Bu[i, r, c] * UF[t, c]
                        for c in range(nd):
                            acc += m[i] * Bd[i, r, c] * D[t, c]
                    work[r] = acc
                    norm += acc * acc
                norm = sqrt(norm)
                if not isfinite(norm) or norm > overflow:
                    status = K_OVERFLOW
                    n_valid = t + 1
                    break
                for r in range(nx):
                    X[t + 1, r] = work[r]

    return {
        "x": x_arr, "y": y_arr, "ytrig": ytrig_arr, "u": u_arr, "uf": uf_arr,
        "z": z_arr, "d": d_arr, "varpi": varpi_arr, "trig": trig_arr,
        "xi": xi_arr, "status": status, "n_valid": n_valid,
        "clamps_plant": clamps_plant, "clamps_ctrl": clamps_ctrl,
    }
