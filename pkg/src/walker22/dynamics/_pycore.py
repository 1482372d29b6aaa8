"""Pure-Python integrator kernel.

Same algorithm, operation for operation, as the compiled kernel in
``_core.pyx``: Dormand-Prince 5(4) with the FSAL stage reused, a
proportional-integral step controller, a step-floor/monotone-growth blowup
diagnosis, and forced output times for frame transport.  Keep the two files
in sync; a test compares them step by step when the extension is built.
"""

from __future__ import annotations

import math

from walker22.dynamics._pack import PAIR_INDEX, SYM_PAIRS

# Dormand-Prince 5(4) tableau
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                      64448.0 / 6561.0, -212.0 / 729.0)
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                           46732.0 / 5247.0, 49.0 / 176.0,
                           -5103.0 / 18656.0)
B1, B3, B4, B5, B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                      -2187.0 / 6784.0, 11.0 / 84.0)
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

SAFETY = 0.9
BETA = 0.04
EXPO1 = 0.2 - BETA * 0.75
FAC_SHRINK = 0.2   # strongest allowed shrink factor
FAC_GROW = 10.0    # strongest allowed growth factor

VERDICT_COMPLETED = 0
VERDICT_BLOWUP = 1
VERDICT_BUDGET = 2

DIVQ_NONE = 0
DIVQ_VELOCITY = 1
DIVQ_OVERFLOW = 2

_WINDOW = 10  # accepted steps over which |v|inf must grow monotonically


def _eval_gammas(coeffs, exps, offsets, x, max_deg):
    """Evaluate all packed Christoffel polynomials at x (length-4)."""
    pw = [[1.0] * (max_deg + 1) for _ in range(4)]
    for v in range(4):
        xv = x[v]
        row = pw[v]
        acc = 1.0
        for e in range(1, max_deg + 1):
            acc = acc * xv
            row[e] = acc
    p0, p1, p2, p3 = pw
    out = [0.0] * (len(offsets) - 1)
    for p in range(len(out)):
        s = 0.0
        for t in range(offsets[p], offsets[p + 1]):
            e = exps[t]
            s += coeffs[t] * p0[e[0]] * p1[e[1]] * p2[e[2]] * p3[e[3]]
        out[p] = s
    return out


def _geodesic_rhs(coeffs, exps, offsets, max_deg, y):
    gam = _eval_gammas(coeffs, exps, offsets, y[0:4], max_deg)
    dy = [0.0] * 8
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
                i, j = SYM_PAIRS[idx]
                term = c * y[4 + i] * y[4 + j]
                if i != j:
                    term = term + term
                acc += term
        dy[4 + k] = -acc
    return dy


def _transport_rhs(coeffs, exps, offsets, max_deg, y):
    gam = _eval_gammas(coeffs, exps, offsets, y[0:4], max_deg)
    dy = [0.0] * 24
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
                i, j = SYM_PAIRS[idx]
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
                    row = PAIR_INDEX[i]
                    for j in range(4):
                        ej = y[off + j]
                        if ej != 0.0:
                            acc += gam[base + row[j]] * vi * ej
            dy[off + k] = -acc
    return dy


def _rms_scaled(vec, sc):
    s = 0.0
    for x, c in zip(vec, sc):
        r = x / c
        s += r * r
    return math.sqrt(s / len(vec))


def _initial_step(rhs, y0, f0, span, rtol, atol):
    n = len(y0)
    sc = [atol + rtol * abs(y0[i]) for i in range(n)]
    d0 = _rms_scaled(y0, sc)
    d1 = _rms_scaled(f0, sc)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = [y0[i] + h0 * f0[i] for i in range(n)]
    f1 = rhs(y1)
    ok = all(math.isfinite(v) for v in f1)
    if ok:
        d2 = _rms_scaled([f1[i] - f0[i] for i in range(n)], sc) / h0
    else:
        d2 = float("inf")
    m = max(d1, d2)
    if not math.isfinite(m) or m <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / m) ** (1.0 / 6.0)
    return min(100.0 * h0, h1, span)


def _step(rhs, y, k1, h):
    """One DP54 step.  Returns (y5, err_vec, k7) with FSAL k7 = f(y5)."""
    n = len(y)
    y2 = [y[i] + h * (A21 * k1[i]) for i in range(n)]
    k2 = rhs(y2)
    y3 = [y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in range(n)]
    k3 = rhs(y3)
    y4 = [y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
          for i in range(n)]
    k4 = rhs(y4)
    y5s = [y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i]
                       + A54 * k4[i]) for i in range(n)]
    k5 = rhs(y5s)
    y6 = [y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                      + A64 * k4[i] + A65 * k5[i]) for i in range(n)]
    k6 = rhs(y6)
    ynew = [y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                        + B5 * k5[i] + B6 * k6[i]) for i in range(n)]
    k7 = rhs(ynew)
    ev = [h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
               + E6 * k6[i] + E7 * k7[i]) for i in range(n)]
    return ynew, ev, k7


def _error_norm(y, ynew, ev, rtol, atol):
    n = len(y)
    s = 0.0
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        r = ev[i] / sc
        s += r * r
    return math.sqrt(s / n)


def integrate(pm, y0, t0, horizon, rtol, atol, h_min, v_max, max_steps):
    """Adaptive geodesic integration with finite-time-blowup diagnosis."""
    coeffs, exps, offsets = pm.as_lists()
    max_deg = pm.max_deg

    def rhs(y):
        return _geodesic_rhs(coeffs, exps, offsets, max_deg, y)

    y = list(map(float, y0))
    t = float(t0)
    ts = [t]
    ys = [list(y)]
    f0 = rhs(y)
    if not all(math.isfinite(v) for v in f0):
        return {
            "ts": ts, "ys": ys, "naccept": 0, "nreject": 0,
            "min_step": 0.0, "verdict": VERDICT_BUDGET,
            "t_star": t, "t_star_unc": 0.0, "divq": DIVQ_OVERFLOW,
        }
    h = _initial_step(rhs, y, f0, horizon - t, rtol, atol)
    k1 = f0
    facold = 1e-4
    naccept = 0
    nreject = 0
    min_step = h
    window = []  # (t, |v|inf) of recent accepted steps
    overflow = False
    rejected_last = False
    verdict = VERDICT_BUDGET
    divq = DIVQ_NONE
    nsteps = 0
    last_h = h
    while True:
        if t >= horizon:
            verdict = VERDICT_COMPLETED
            break
        if nsteps >= max_steps:
            verdict = VERDICT_BUDGET
            break
        floor = max(h_min, 4.0 * 2.220446049250313e-16 * abs(t))
        if h < floor:
            vinf = window[-1][1] if window else 0.0
            monotone = _is_monotone(window)
            if monotone and (vinf > v_max or overflow):
                verdict = VERDICT_BLOWUP
                divq = DIVQ_OVERFLOW if overflow and vinf <= v_max \
                    else DIVQ_VELOCITY
            else:
                verdict = VERDICT_BUDGET
                if overflow:
                    divq = DIVQ_OVERFLOW
            break
        last = False
        if t + h >= horizon:
            h = horizon - t
            last = True
        nsteps += 1
        ynew, ev, k7 = _step(rhs, y, k1, h)
        finite = all(math.isfinite(v) for v in ynew)
        err = _error_norm(y, ynew, ev, rtol, atol) if finite else float("inf")
        if not math.isfinite(err):
            overflow = True
            rejected_last = True
            nreject += 1
            h = h * 0.1
            continue
        if err <= 1.0:
            fac11 = err ** EXPO1
            fac = fac11 / (facold ** BETA)
            fac = max(1.0 / FAC_GROW, min(1.0 / FAC_SHRINK, fac / SAFETY))
            hnew = h / fac
            facold = max(err, 1e-4)
            t = horizon if last else t + h
            y = ynew
            k1 = k7
            naccept += 1
            if h < min_step:
                min_step = h
            last_h = h
            vinf = max(abs(y[4]), abs(y[5]), abs(y[6]), abs(y[7]))
            window.append((t, vinf))
            if len(window) > _WINDOW + 1:
                window.pop(0)
            ts.append(t)
            ys.append(list(y))
            if rejected_last:
                hnew = min(hnew, h)
            rejected_last = False
            h = hnew
        else:
            rejected_last = True
            nreject += 1
            fac11 = err ** EXPO1
            h = h / min(1.0 / FAC_SHRINK, fac11 / SAFETY)
    t_star, t_star_unc = _extrapolate_tstar(window, last_h)
    return {
        "ts": ts, "ys": ys, "naccept": naccept, "nreject": nreject,
        "min_step": min_step, "verdict": verdict,
        "t_star": t_star, "t_star_unc": t_star_unc, "divq": divq,
    }


def _is_monotone(window):
    if len(window) < _WINDOW + 1:
        return False
    vals = [w[1] for w in window[-(_WINDOW + 1):]]
    return all(b > a for a, b in zip(vals, vals[1:]))


def _extrapolate_tstar(window, last_h):
    if len(window) >= 2 and window[-1][1] > 0 and window[-2][1] > 0:
        t1, v1 = window[-2]
        t2, v2 = window[-1]
        w1, w2 = 1.0 / v1, 1.0 / v2
        if w1 > w2:
            return t2 + w2 * (t2 - t1) / (w1 - w2), last_h
    if window:
        return window[-1][0], last_h
    return 0.0, last_h


def transport(pm, y0, t0, out_ts, rtol, atol, h_min, max_steps):
    """Joint geodesic+frame integration recording at forced output times."""
    coeffs, exps, offsets = pm.as_lists()
    max_deg = pm.max_deg

    def rhs(y):
        return _transport_rhs(coeffs, exps, offsets, max_deg, y)

    y = list(map(float, y0))
    t = float(t0)
    rows = []
    idx = 0
    n_out = len(out_ts)
    if n_out and abs(out_ts[0] - t) <= 1e-15 * max(1.0, abs(t)):
        rows.append(list(y))
        idx = 1
    if idx >= n_out:
        return {"rows": rows, "reached": idx, "naccept": 0, "nreject": 0}
    f0 = rhs(y)
    if not all(math.isfinite(v) for v in f0):
        return {"rows": rows, "reached": idx, "naccept": 0, "nreject": 0}
    h_rec = _initial_step(rhs, y, f0, out_ts[-1] - t, rtol, atol)
    k1 = f0
    facold = 1e-4
    naccept = 0
    nreject = 0
    nsteps = 0
    rejected_last = False
    while idx < n_out:
        if nsteps >= max_steps:
            break
        floor = max(h_min, 4.0 * 2.220446049250313e-16 * abs(t))
        if h_rec < floor:
            break
        target = out_ts[idx]
        hit = False
        h = h_rec
        if t + h >= target:
            h = target - t
            hit = True
        nsteps += 1
        ynew, ev, k7 = _step(rhs, y, k1, h)
        finite = all(math.isfinite(v) for v in ynew)
        err = _error_norm(y, ynew, ev, rtol, atol) if finite else float("inf")
        if not math.isfinite(err):
            nreject += 1
            rejected_last = True
            h_rec = h * 0.1
            continue
        if err <= 1.0:
            fac11 = err ** EXPO1
            fac = fac11 / (facold ** BETA)
            fac = max(1.0 / FAC_GROW, min(1.0 / FAC_SHRINK, fac / SAFETY))
            hnew = h / fac
            facold = max(err, 1e-4)
            t = target if hit else t + h
            y = ynew
            k1 = k7
            naccept += 1
            if hit:
                rows.append(list(y))
                idx += 1
            if rejected_last:
                hnew = min(hnew, h)
            rejected_last = False
            # a step clipped to hit an output time does not cap the next one
            h_rec = max(hnew, h_rec) if hit else hnew
        else:
            nreject += 1
            rejected_last = True
            fac11 = err ** EXPO1
            h_rec = h / min(1.0 / FAC_SHRINK, fac11 / SAFETY)
    return {"rows": rows, "reached": idx, "naccept": naccept,
            "nreject": nreject}


def geodesic_rhs(pm, y):
    coeffs, exps, offsets = pm.as_lists()
    return _geodesic_rhs(coeffs, exps, offsets, pm.max_deg, list(map(float, y)))
