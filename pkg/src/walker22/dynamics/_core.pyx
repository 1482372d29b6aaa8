# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled integrator kernel.

Operation-for-operation mirror of ``_pycore.py`` (Dormand-Prince 5(4),
FSAL, PI step control, blowup diagnosis, forced-output transport).  Keep
the two in sync; tests compare them step by step.
"""

from libc.math cimport fabs, isfinite, pow as cpow, sqrt
from libc.stdlib cimport free, malloc

import numpy as np

DEF NDIM_MAX = 24
DEF PWMAX = 33

cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0, A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0

cdef double SAFETY = 0.9
cdef double BETA = 0.04
cdef double EXPO1 = 0.2 - 0.04 * 0.75
cdef double FAC_SHRINK = 0.2
cdef double FAC_GROW = 10.0
cdef double EPS4 = 4.0 * 2.220446049250313e-16

cdef int WINDOW = 10

VERDICT_COMPLETED = 0
VERDICT_BLOWUP = 1
VERDICT_BUDGET = 2
DIVQ_NONE = 0
DIVQ_VELOCITY = 1
DIVQ_OVERFLOW = 2

cdef int SYM_I[10]
cdef int SYM_J[10]
SYM_I[0] = 0; SYM_J[0] = 0
SYM_I[1] = 0; SYM_J[1] = 1
SYM_I[2] = 0; SYM_J[2] = 2
SYM_I[3] = 0; SYM_J[3] = 3
SYM_I[4] = 1; SYM_J[4] = 1
SYM_I[5] = 1; SYM_J[5] = 2
SYM_I[6] = 1; SYM_J[6] = 3
SYM_I[7] = 2; SYM_J[7] = 2
SYM_I[8] = 2; SYM_J[8] = 3
SYM_I[9] = 3; SYM_J[9] = 3

cdef int PAIR_IDX[4][4]
cdef int _pi, _pj, _pk
for _pk in range(10):
    PAIR_IDX[SYM_I[_pk]][SYM_J[_pk]] = _pk
    PAIR_IDX[SYM_J[_pk]][SYM_I[_pk]] = _pk


cdef struct Packed:
    double* coeffs
    int* exps
    long long* offsets
    int npoly
    int max_deg


cdef inline void _eval_gammas(Packed* pm, double* x, double* gam) nogil:
    cdef double pw[4][PWMAX]
    cdef int v, e, p
    cdef long long t
    cdef double acc, s
    for v in range(4):
        pw[v][0] = 1.0
        acc = 1.0
        for e in range(1, pm.max_deg + 1):
            acc = acc * x[v]
            pw[v][e] = acc
    for p in range(pm.npoly):
        s = 0.0
        for t in range(pm.offsets[p], pm.offsets[p + 1]):
            s += (pm.coeffs[t] * pw[0][pm.exps[4 * t]]
                  * pw[1][pm.exps[4 * t + 1]]
                  * pw[2][pm.exps[4 * t + 2]]
                  * pw[3][pm.exps[4 * t + 3]])
        gam[p] = s


cdef inline void _geodesic_rhs(Packed* pm, double* y, double* dy) nogil:
    cdef double gam[40]
    cdef int k, idx, i, j, base
    cdef double acc, c, term
    _eval_gammas(pm, y, gam)
    dy[0] = y[4]
    dy[1] = y[5]
    dy[2] = y[6]
    dy[3] = y[7]
    for k in range(4):
        base = k * 10
        acc = 0.0
        for idx in range(10):
            c = gam[base + idx]
            if c != 0.0:
                i = SYM_I[idx]
                j = SYM_J[idx]
                term = c * y[4 + i] * y[4 + j]
                if i != j:
                    term = term + term
                acc += term
        dy[4 + k] = -acc


cdef inline void _transport_rhs(Packed* pm, double* y, double* dy) nogil:
    cdef double gam[40]
    cdef int k, idx, i, j, base, a, off
    cdef double acc, c, term, vi, ej
    _eval_gammas(pm, y, gam)
    dy[0] = y[4]
    dy[1] = y[5]
    dy[2] = y[6]
    dy[3] = y[7]
    for k in range(4):
        base = k * 10
        acc = 0.0
        for idx in range(10):
            c = gam[base + idx]
            if c != 0.0:
                i = SYM_I[idx]
                j = SYM_J[idx]
                term = c * y[4 + i] * y[4 + j]
                if i != j:
                    term = term + term
                acc += term
        dy[4 + k] = -acc
    for a in range(4):
        off = 8 + 4 * a
        for k in range(4):
            base = k * 10
            acc = 0.0
            for i in range(4):
                vi = y[4 + i]
                if vi != 0.0:
                    for j in range(4):
                        ej = y[off + j]
                        if ej != 0.0:
                            acc += gam[base + PAIR_IDX[i][j]] * vi * ej
            dy[off + k] = -acc


cdef inline void _rhs(Packed* pm, double* y, double* dy, int ndim) nogil:
    if ndim == 8:
        _geodesic_rhs(pm, y, dy)
    else:
        _transport_rhs(pm, y, dy)


cdef double _rms_scaled(double* vec, double* sc, int n) nogil:
    cdef double s = 0.0, r
    cdef int i
    for i in range(n):
        r = vec[i] / sc[i]
        s += r * r
    return sqrt(s / n)


cdef double _initial_step(Packed* pm, double* y0, double* f0, double span,
                          double rtol, double atol, int ndim) nogil:
    cdef double sc[NDIM_MAX]
    cdef double y1[NDIM_MAX]
    cdef double f1[NDIM_MAX]
    cdef double diff[NDIM_MAX]
    cdef int i, ok
    cdef double d0, d1, d2, h0, h1, m
    for i in range(ndim):
        sc[i] = atol + rtol * fabs(y0[i])
    d0 = _rms_scaled(y0, sc, ndim)
    d1 = _rms_scaled(f0, sc, ndim)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    if h0 > span:
        h0 = span
    for i in range(ndim):
        y1[i] = y0[i] + h0 * f0[i]
    _rhs(pm, y1, f1, ndim)
    ok = 1
    for i in range(ndim):
        if not isfinite(f1[i]):
            ok = 0
    if ok:
        for i in range(ndim):
            diff[i] = f1[i] - f0[i]
        d2 = _rms_scaled(diff, sc, ndim) / h0
    else:
        d2 = 1e308 * 10.0  # inf
    m = d1 if d1 > d2 else d2
    if not isfinite(m) or m <= 1e-15:
        h1 = h0 * 1e-3
        if h1 < 1e-6:
            h1 = 1e-6
    else:
        h1 = cpow(0.01 / m, 1.0 / 6.0)
    h0 = 100.0 * h0
    if h1 < h0:
        h0 = h1
    if span < h0:
        h0 = span
    return h0


cdef int _step(Packed* pm, double* y, double* k1, double h,
               double* ynew, double* ev, double* k7, int ndim) nogil:
    """One DP54 stage sweep; returns 1 when ynew is finite."""
    cdef double y2[NDIM_MAX]
    cdef double k2[NDIM_MAX]
    cdef double k3[NDIM_MAX]
    cdef double k4[NDIM_MAX]
    cdef double k5[NDIM_MAX]
    cdef double k6[NDIM_MAX]
    cdef int i, finite
    for i in range(ndim):
        y2[i] = y[i] + h * (A21 * k1[i])
    _rhs(pm, y2, k2, ndim)
    for i in range(ndim):
        y2[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
    _rhs(pm, y2, k3, ndim)
    for i in range(ndim):
        y2[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
    _rhs(pm, y2, k4, ndim)
    for i in range(ndim):
        y2[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i]
                            + A54 * k4[i])
    _rhs(pm, y2, k5, ndim)
    for i in range(ndim):
        y2[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                            + A64 * k4[i] + A65 * k5[i])
    _rhs(pm, y2, k6, ndim)
    for i in range(ndim):
        ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                              + B5 * k5[i] + B6 * k6[i])
    _rhs(pm, ynew, k7, ndim)
    for i in range(ndim):
        ev[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                     + E6 * k6[i] + E7 * k7[i])
    finite = 1
    for i in range(ndim):
        if not isfinite(ynew[i]):
            finite = 0
    return finite


cdef double _error_norm(double* y, double* ynew, double* ev,
                        double rtol, double atol, int ndim) nogil:
    cdef double s = 0.0, sc, r, m
    cdef int i
    for i in range(ndim):
        m = fabs(y[i])
        if fabs(ynew[i]) > m:
            m = fabs(ynew[i])
        sc = atol + rtol * m
        r = ev[i] / sc
        s += r * r
    return sqrt(s / ndim)


cdef int _fill_packed(object pmobj, Packed* pm,
                      double[::1] coeffs, int[:, ::1] exps,
                      long long[::1] offsets) except -1:
    pm.coeffs = &coeffs[0] if coeffs.shape[0] else NULL
    pm.exps = &exps[0, 0] if exps.shape[0] else NULL
    pm.offsets = &offsets[0]
    pm.npoly = offsets.shape[0] - 1
    pm.max_deg = int(pmobj.max_deg)
    if pm.max_deg >= PWMAX:
        raise ValueError("polynomial degree exceeds compiled kernel cap")
    return 0


def integrate(pmobj, y0, double t0, double horizon, double rtol, double atol,
              double h_min, double v_max, long long max_steps):
    cdef double[::1] coeffs = np.ascontiguousarray(pmobj.gam_coeffs)
    cdef int[:, ::1] exps = np.ascontiguousarray(pmobj.gam_exps,
                                                 dtype=np.int32)
    cdef long long[::1] offsets = np.ascontiguousarray(pmobj.gam_offsets,
                                                       dtype=np.int64)
    cdef Packed pm
    _fill_packed(pmobj, &pm, coeffs, exps, offsets)

    cdef int ndim = 8
    cdef double y[NDIM_MAX]
    cdef double k1[NDIM_MAX]
    cdef double ynew[NDIM_MAX]
    cdef double ev[NDIM_MAX]
    cdef double k7[NDIM_MAX]
    cdef int i
    for i in range(ndim):
        y[i] = float(y0[i])
    cdef double t = t0

    ts = [t0]
    ys = [[y[i] for i in range(ndim)]]

    _rhs(&pm, y, k1, ndim)
    cdef int finite = 1
    for i in range(ndim):
        if not isfinite(k1[i]):
            finite = 0
    if not finite:
        return {"ts": ts, "ys": ys, "naccept": 0, "nreject": 0,
                "min_step": 0.0, "verdict": VERDICT_BUDGET,
                "t_star": t, "t_star_unc": 0.0, "divq": DIVQ_OVERFLOW}

    cdef double h = _initial_step(&pm, y, k1, horizon - t, rtol, atol, ndim)
    cdef double facold = 1e-4
    cdef long long naccept = 0, nreject = 0, nsteps = 0
    cdef double min_step = h, last_h = h
    cdef int overflow = 0, rejected_last = 0
    cdef int verdict = VERDICT_BUDGET
    cdef int divq = DIVQ_NONE

    cdef double win_t[12]
    cdef double win_v[12]
    cdef int win_n = 0
    cdef double vinf, floor, err, fac11, fac, hnew
    cdef int last, monotone, w

    while True:
        if t >= horizon:
            verdict = VERDICT_COMPLETED
            break
        if nsteps >= max_steps:
            verdict = VERDICT_BUDGET
            break
        floor = h_min
        if EPS4 * fabs(t) > floor:
            floor = EPS4 * fabs(t)
        if h < floor:
            vinf = win_v[win_n - 1] if win_n > 0 else 0.0
            monotone = 1 if win_n == WINDOW + 1 else 0
            if monotone:
                for w in range(win_n - 1):
                    if not (win_v[w + 1] > win_v[w]):
                        monotone = 0
            if monotone and (vinf > v_max or overflow):
                verdict = VERDICT_BLOWUP
                if overflow and vinf <= v_max:
                    divq = DIVQ_OVERFLOW
                else:
                    divq = DIVQ_VELOCITY
            else:
                verdict = VERDICT_BUDGET
                if overflow:
                    divq = DIVQ_OVERFLOW
            break
        last = 0
        if t + h >= horizon:
            h = horizon - t
            last = 1
        nsteps += 1
        finite = _step(&pm, y, k1, h, ynew, ev, k7, ndim)
        if finite:
            err = _error_norm(y, ynew, ev, rtol, atol, ndim)
        else:
            err = 1e308 * 10.0
        if not isfinite(err):
            overflow = 1
            rejected_last = 1
            nreject += 1
            h = h * 0.1
            continue
        if err <= 1.0:
            fac11 = cpow(err, EXPO1)
            fac = fac11 / cpow(facold, BETA)
            fac = fac / SAFETY
            if fac > 1.0 / FAC_SHRINK:
                fac = 1.0 / FAC_SHRINK
            if fac < 1.0 / FAC_GROW:
                fac = 1.0 / FAC_GROW
            hnew = h / fac
            facold = err if err > 1e-4 else 1e-4
            t = horizon if last else t + h
            for i in range(ndim):
                y[i] = ynew[i]
                k1[i] = k7[i]
            naccept += 1
            if h < min_step:
                min_step = h
            last_h = h
            vinf = fabs(y[4])
            for i in range(5, 8):
                if fabs(y[i]) > vinf:
                    vinf = fabs(y[i])
            if win_n == WINDOW + 1:
                for w in range(win_n - 1):
                    win_t[w] = win_t[w + 1]
                    win_v[w] = win_v[w + 1]
                win_n -= 1
            win_t[win_n] = t
            win_v[win_n] = vinf
            win_n += 1
            ts.append(t)
            ys.append([y[i] for i in range(ndim)])
            if rejected_last:
                if hnew > h:
                    hnew = h
            rejected_last = 0
            h = hnew
        else:
            rejected_last = 1
            nreject += 1
            fac11 = cpow(err, EXPO1)
            fac = fac11 / SAFETY
            if fac > 1.0 / FAC_SHRINK:
                fac = 1.0 / FAC_SHRINK
            h = h / fac

    cdef double t_star, t_star_unc, w1, w2
    if win_n >= 2 and win_v[win_n - 1] > 0 and win_v[win_n - 2] > 0:
        w1 = 1.0 / win_v[win_n - 2]
        w2 = 1.0 / win_v[win_n - 1]
        if w1 > w2:
            t_star = win_t[win_n - 1] + w2 * (
                win_t[win_n - 1] - win_t[win_n - 2]) / (w1 - w2)
        else:
            t_star = win_t[win_n - 1]
    elif win_n >= 1:
        t_star = win_t[win_n - 1]
    else:
        t_star = 0.0
    t_star_unc = last_h
    return {"ts": ts, "ys": ys, "naccept": naccept, "nreject": nreject,
            "min_step": min_step, "verdict": verdict,
            "t_star": t_star, "t_star_unc": t_star_unc, "divq": divq}


def transport(pmobj, y0, double t0, out_ts, double rtol, double atol,
              double h_min, long long max_steps):
    cdef double[::1] coeffs = np.ascontiguousarray(pmobj.gam_coeffs)
    cdef int[:, ::1] exps = np.ascontiguousarray(pmobj.gam_exps,
                                                 dtype=np.int32)
    cdef long long[::1] offsets = np.ascontiguousarray(pmobj.gam_offsets,
                                                       dtype=np.int64)
    cdef Packed pm
    _fill_packed(pmobj, &pm, coeffs, exps, offsets)

    cdef int ndim = 24
    cdef double y[NDIM_MAX]
    cdef double k1[NDIM_MAX]
    cdef double ynew[NDIM_MAX]
    cdef double ev[NDIM_MAX]
    cdef double k7[NDIM_MAX]
    cdef int i
    for i in range(ndim):
        y[i] = float(y0[i])
    cdef double t = t0
    cdef double[::1] targets = np.ascontiguousarray(out_ts, dtype=np.float64)
    cdef long long n_out = targets.shape[0]

    rows = []
    cdef long long idx = 0
    cdef double ref = fabs(t) if fabs(t) > 1.0 else 1.0
    if n_out and fabs(targets[0] - t) <= 1e-15 * ref:
        rows.append([y[i] for i in range(ndim)])
        idx = 1
    if idx >= n_out:
        return {"rows": rows, "reached": idx, "naccept": 0, "nreject": 0}

    _rhs(&pm, y, k1, ndim)
    cdef int finite = 1
    for i in range(ndim):
        if not isfinite(k1[i]):
            finite = 0
    if not finite:
        return {"rows": rows, "reached": idx, "naccept": 0, "nreject": 0}

    cdef double h_rec = _initial_step(&pm, y, k1, targets[n_out - 1] - t,
                                      rtol, atol, ndim)
    cdef double facold = 1e-4
    cdef long long naccept = 0, nreject = 0, nsteps = 0
    cdef int rejected_last = 0
    cdef double h, target, err, fac11, fac, hnew, floor
    cdef int hit

    while idx < n_out:
        if nsteps >= max_steps:
            break
        floor = h_min
        if EPS4 * fabs(t) > floor:
            floor = EPS4 * fabs(t)
        if h_rec < floor:
            break
        target = targets[idx]
        hit = 0
        h = h_rec
        if t + h >= target:
            h = target - t
            hit = 1
        nsteps += 1
        finite = _step(&pm, y, k1, h, ynew, ev, k7, ndim)
        if finite:
            err = _error_norm(y, ynew, ev, rtol, atol, ndim)
        else:
            err = 1e308 * 10.0
        if not isfinite(err):
            nreject += 1
            rejected_last = 1
            h_rec = h * 0.1
            continue
        if err <= 1.0:
            fac11 = cpow(err, EXPO1)
            fac = fac11 / cpow(facold, BETA)
            fac = fac / SAFETY
            if fac > 1.0 / FAC_SHRINK:
                fac = 1.0 / FAC_SHRINK
            if fac < 1.0 / FAC_GROW:
                fac = 1.0 / FAC_GROW
            hnew = h / fac
            facold = err if err > 1e-4 else 1e-4
            t = target if hit else t + h
            for i in range(ndim):
                y[i] = ynew[i]
                k1[i] = k7[i]
            naccept += 1
            if hit:
                rows.append([y[i] for i in range(ndim)])
                idx += 1
            if rejected_last:
                if hnew > h:
                    hnew = h
            rejected_last = 0
            if hit:
                h_rec = hnew if hnew > h_rec else h_rec
            else:
                h_rec = hnew
        else:
            nreject += 1
            rejected_last = 1
            fac11 = cpow(err, EXPO1)
            fac = fac11 / SAFETY
            if fac > 1.0 / FAC_SHRINK:
                fac = 1.0 / FAC_SHRINK
            h_rec = h / fac

    return {"rows": rows, "reached": idx, "naccept": naccept,
            "nreject": nreject}
