"""Geodesic integration, parallel transport, trajectory monitors and the
finite-time blowup machinery for Walker metrics.

The stepping kernel exists twice: a compiled extension (``_core``) for the
hot loop and a pure-Python twin (``_pycore``) selected automatically when
the extension is unavailable; set ``WALKER22_BACKEND=python`` to force the
fallback.  ``benchmarks/bench_integrator.py`` compares the two.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from walker22 import geometry
from walker22.dynamics import _pycore
from walker22.dynamics._pack import packed_for
from walker22.geometry import PreconditionError, WalkerMetric

try:  # compiled kernel is optional
    from walker22.dynamics import _core as _compiled
except ImportError:  # pragma: no cover - depends on build environment
    _compiled = None


def active_backend(name: str | None = None) -> str:
    """Resolve which kernel will run: 'compiled' or 'python'."""
    if name is None:
        name = os.environ.get("WALKER22_BACKEND", "auto")
    if name in ("python", "pure"):
        return "python"
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel requested but not built")
        return "compiled"
    return "compiled" if _compiled is not None else "python"


def _kernel(backend: str | None):
    return _compiled if active_backend(backend) == "compiled" else _pycore


VERDICT_NAMES = {
    _pycore.VERDICT_COMPLETED: "completed",
    _pycore.VERDICT_BLOWUP: "blowup",
    _pycore.VERDICT_BUDGET: "budget-exhausted",
}
DIVQ_NAMES = {
    _pycore.DIVQ_NONE: None,
    _pycore.DIVQ_VELOCITY: "velocity-sup",
    _pycore.DIVQ_OVERFLOW: "evaluation-overflow",
}


@dataclass(frozen=True)
class GeodesicState:
    t: float
    x: tuple
    v: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(c) for c in self.x))
        object.__setattr__(self, "v", tuple(float(c) for c in self.v))
        if len(self.x) != 4 or len(self.v) != 4:
            raise ValueError("state needs four position and four velocity "
                             "components")
        if not all(math.isfinite(c) for c in self.x + self.v):
            raise ValueError("state components must be finite")


@dataclass(frozen=True)
class IntegrateOptions:
    horizon: float
    rtol: float = 1e-8
    atol: float = 1e-10
    h_min: float = 1e-12
    v_max: float = 1e8
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not (self.horizon > 0 and self.rtol > 0 and self.atol > 0
                and self.h_min > 0 and self.v_max > 0 and self.max_steps > 0):
            raise ValueError("integration options must be positive")


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # (n, 8): x1..x4, v1..v4
    monitors: dict = field(default_factory=dict)
    label: str = ""

    @property
    def x(self) -> np.ndarray:
        return self.states[:, 0:4]

    @property
    def v(self) -> np.ndarray:
        return self.states[:, 4:8]

    def final_state(self) -> GeodesicState:
        row = self.states[-1]
        return GeodesicState(float(self.t[-1]), tuple(row[:4]), tuple(row[4:]))


@dataclass(frozen=True)
class IntegrationOutcome:
    verdict: str  # completed | blowup | budget-exhausted
    t_star: float | None
    t_star_uncertainty: float | None
    diverging_quantity: str | None
    stats: dict

    def to_json_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "t_star": self.t_star,
            "t_star_uncertainty": self.t_star_uncertainty,
            "diverging_quantity": self.diverging_quantity,
            "stats": dict(sorted(self.stats.items())),
        }


@dataclass(frozen=True)
class FrameTrajectory:
    t: np.ndarray
    frames: np.ndarray  # (n, 4, 4): frames[s][a] = components of e_{a+1}
    states: np.ndarray  # (n, 8) joint re-integration of the base geodesic

    def gram(self, metric: WalkerMetric, sample: int) -> np.ndarray:
        x = self.states[sample, 0:4]
        g = np.array(metric.metric_matrix(tuple(x)), dtype=float)
        e = self.frames[sample]
        return e @ g @ e.T


def integrate_geodesic(metric: WalkerMetric, state0: GeodesicState,
                       opts: IntegrateOptions | None = None,
                       backend: str | None = None,
                       **option_overrides):
    """Integrate the geodesic equation with blowup diagnosis.

    Returns ``(Trajectory, IntegrationOutcome)``.  The trajectory holds all
    accepted steps and an ``energy`` monitor (g(v,v) per sample).
    """
    if opts is None:
        opts = IntegrateOptions(**option_overrides)
    elif option_overrides:
        raise TypeError("pass either opts or keyword overrides, not both")
    if opts.horizon <= state0.t:
        raise ValueError("horizon must exceed the initial time")
    pm = packed_for(metric)
    y0 = list(state0.x) + list(state0.v)
    res = _kernel(backend).integrate(
        pm, y0, state0.t, opts.horizon, opts.rtol, opts.atol,
        opts.h_min, opts.v_max, opts.max_steps,
    )
    ts = np.asarray(res["ts"], dtype=float)
    ys = np.asarray(res["ys"], dtype=float).reshape(len(ts), 8)
    traj = Trajectory(t=ts, states=ys, monitors={}, label=metric.label)
    traj.monitors["energy"] = energy_series(metric, traj)
    verdict = VERDICT_NAMES[res["verdict"]]
    outcome = IntegrationOutcome(
        verdict=verdict,
        t_star=res["t_star"] if verdict == "blowup" else None,
        t_star_uncertainty=(res["t_star_unc"] if verdict == "blowup"
                            else None),
        diverging_quantity=(DIVQ_NAMES[res["divq"]] if verdict == "blowup"
                            else None),
        stats={
            "steps": res["naccept"],
            "rejected_steps": res["nreject"],
            "min_step": res["min_step"],
        },
    )
    return traj, outcome


def geodesic_rhs(metric: WalkerMetric, state: GeodesicState):
    """Right-hand side (dx/dt, dv/dt) of the geodesic system at a state."""
    pm = packed_for(metric)
    dy = _pycore.geodesic_rhs(pm, list(state.x) + list(state.v))
    return tuple(dy[0:4]), tuple(dy[4:8])


# --- monitors ---------------------------------------------------------------


def _poly_rows(poly, xrows: np.ndarray) -> np.ndarray:
    vals = np.zeros(len(xrows))
    for exps, coeff in poly.terms().items():
        term = np.full(len(xrows), float(coeff))
        for v in range(4):
            if exps[v]:
                term = term * xrows[:, v] ** exps[v]
        vals += term
    return vals


def energy_series(metric: WalkerMetric, traj: Trajectory) -> np.ndarray:
    x, v = traj.x, traj.v
    p33 = _poly_rows(metric.psi33, x)
    p34 = _poly_rows(metric.psi34, x)
    p44 = _poly_rows(metric.psi44, x)
    return (2.0 * v[:, 0] * v[:, 2] + 2.0 * v[:, 1] * v[:, 3]
            + p33 * v[:, 2] ** 2 + 2.0 * p34 * v[:, 2] * v[:, 3]
            + p44 * v[:, 3] ** 2)


def ricci_series(metric: WalkerMetric, traj: Trajectory) -> np.ndarray:
    ric = metric.fields.ricci
    x, v = traj.x, traj.v
    out = np.zeros(len(x))
    for i in range(4):
        for j in range(4):
            p = ric[i][j]
            if not p.is_zero():
                out += _poly_rows(p, x) * v[:, i] * v[:, j]
    return out


def curvature_component_series(metric: WalkerMetric, traj: Trajectory,
                               indices: tuple, frame: FrameTrajectory
                               ) -> np.ndarray:
    """Lowered curvature on transported frame vectors, e.g. R(e1,e3,e3,e4).

    ``indices`` names frame legs (1-based); the frame's own base states are
    used so the series is self-consistent with the transport run.
    """
    if frame is None:
        raise ValueError("curvature-component monitor requires a frame")
    if len(indices) != 4 or any(i not in (1, 2, 3, 4) for i in indices):
        raise ValueError("indices must be four frame numbers in 1..4")
    rl = metric.fields.riemann_lowered
    x = frame.states[:, 0:4]
    n = len(x)
    out = np.zeros(n)
    legs = [frame.frames[:, i - 1, :] for i in indices]
    for i in range(4):
        for j in range(4):
            for k in range(4):
                for l in range(4):
                    p = rl[i][j][k][l]
                    if not p.is_zero():
                        out += (_poly_rows(p, x) * legs[0][:, i]
                                * legs[1][:, j] * legs[2][:, k]
                                * legs[3][:, l])
    return out


def monitor(metric: WalkerMetric, traj: Trajectory, which: str,
            indices: tuple | None = None,
            frame: FrameTrajectory | None = None) -> np.ndarray:
    """Named series along a trajectory: energy, ricci, or a curvature
    component on a transported frame."""
    if which == "energy":
        return energy_series(metric, traj)
    if which == "ricci":
        return ricci_series(metric, traj)
    if which == "curvature_component":
        if indices is None:
            raise ValueError("curvature_component needs indices")
        return curvature_component_series(metric, traj, indices, frame)
    raise ValueError(f"unknown monitor {which!r}")


# --- parallel transport -----------------------------------------------------


def parallel_transport(metric: WalkerMetric, traj: Trajectory,
                       frame0, rtol: float = 1e-8, atol: float = 1e-10,
                       h_min: float = 1e-12, max_steps: int = 2_000_000,
                       backend: str | None = None) -> FrameTrajectory:
    """Transport a frame along a trajectory, sampled at the trajectory's
    own time grid (the geodesic is re-integrated jointly with the frame)."""
    frame0 = np.asarray(frame0, dtype=float)
    if frame0.shape != (4, 4):
        raise ValueError("frame0 must be four 4-vectors")
    pm = packed_for(metric)
    y0 = list(traj.states[0]) + list(frame0.reshape(16))
    out_ts = [float(t) for t in traj.t]
    res = _kernel(backend).transport(
        pm, y0, float(traj.t[0]), out_ts, rtol, atol, h_min, max_steps,
    )
    rows = np.asarray(res["rows"], dtype=float).reshape(res["reached"], 24)
    return FrameTrajectory(
        t=np.asarray(out_ts[: res["reached"]]),
        frames=rows[:, 8:24].reshape(res["reached"], 4, 4),
        states=rows[:, 0:8],
    )


# --- strict-metric quadrature oracle ----------------------------------------


def strict_geodesic_reference(metric: WalkerMetric, state0: GeodesicState,
                              horizon: float,
                              ts: np.ndarray | None = None) -> Trajectory:
    """Independent reference trajectory for strict metrics.

    For coefficients depending only on x3, x4 those coordinates are affine
    in time and the transverse accelerations are explicit functions of t;
    x1, x2 follow by (Gauss-Legendre) quadrature, so no step control is
    involved.  Accuracy is quadrature-exact for polynomial data.
    """
    if not metric.is_strict():
        raise PreconditionError(
            "reference solution requires a strict metric "
            "(psi depending only on x3, x4)"
        )
    if ts is None:
        ts = np.linspace(state0.t, horizon, 257)
    ts = np.asarray(ts, dtype=float)
    x0, v0 = state0.x, state0.v
    t0 = state0.t

    p33, p34, p44 = metric.psi33, metric.psi34, metric.psi44
    d3_33, d4_33 = p33.diff(3), p33.diff(4)
    d3_44, d4_44 = p44.diff(3), p44.diff(4)
    d3_34, d4_34 = p34.diff(3), p34.diff(4)
    f1_parts = [
        (-0.5 * v0[2] * v0[2], d3_33),
        (-float(v0[2] * v0[3]), d4_33),
        (-0.5 * v0[3] * v0[3], 2 * d4_34 - d3_44),
    ]
    f2_parts = [
        (-0.5 * v0[2] * v0[2], 2 * d3_34 - d4_33),
        (-float(v0[2] * v0[3]), d3_44),
        (-0.5 * v0[3] * v0[3], d4_44),
    ]

    def accel(tau, parts):
        x3 = x0[2] + v0[2] * (tau - t0)
        x4 = x0[3] + v0[3] * (tau - t0)
        pt = (0.0, 0.0, x3, x4)
        return sum(c * p.eval_float(pt) for c, p in parts)

    nodes, weights = np.polynomial.legendre.leggauss(48)
    rows = np.zeros((len(ts), 8))
    for s, t in enumerate(ts):
        span = t - t0
        half = 0.5 * span
        taus = t0 + half * (nodes + 1.0)
        f1 = np.array([accel(tau, f1_parts) for tau in taus])
        f2 = np.array([accel(tau, f2_parts) for tau in taus])
        wt = weights * half
        x1 = x0[0] + v0[0] * span + float(np.sum(wt * (t - taus) * f1))
        x2 = x0[1] + v0[1] * span + float(np.sum(wt * (t - taus) * f2))
        v1 = v0[0] + float(np.sum(wt * f1))
        v2 = v0[1] + float(np.sum(wt * f2))
        x3 = x0[2] + v0[2] * span
        x4 = x0[3] + v0[3] * span
        rows[s] = (x1, x2, x3, x4, v1, v2, v0[2], v0[3])
    return Trajectory(t=ts, states=rows, monitors={}, label=metric.label)


# --- blowup certificate ------------------------------------------------------


@dataclass(frozen=True)
class BlowupCertificate:
    """Finite-time blowup certificate for f'' = Xi(f', f), f(0)=f'(0)=1.

    Applies when the caller asserts Xi(x, y) >= epsilon * x^a * y^b on
    [1, inf)^2; the conclusion (finite maximal time with diverging f', f'')
    holds when epsilon > 0, a, b >= 0 and 2a + b >= 3.
    """

    epsilon: Fraction
    a: Fraction
    b: Fraction

    @property
    def verdict(self) -> str:
        eps, a, b = Fraction(self.epsilon), Fraction(self.a), Fraction(self.b)
        if eps > 0 and a >= 0 and b >= 0 and 2 * a + b >= 3:
            return "certified-blowup"
        return "not-applicable"

    def to_json_dict(self) -> dict:
        return {
            "epsilon": str(Fraction(self.epsilon)),
            "a": str(Fraction(self.a)),
            "b": str(Fraction(self.b)),
            "verdict": self.verdict,
        }


def blowup_certificate(epsilon, a, b) -> str:
    return BlowupCertificate(Fraction(epsilon), Fraction(a),
                             Fraction(b)).verdict


# --- export ------------------------------------------------------------------


def trajectory_to_csv(traj: Trajectory, fh) -> None:
    names = sorted(traj.monitors)
    header = "t,x1,x2,x3,x4,v1,v2,v3,v4"
    if names:
        header += "," + ",".join(names)
    fh.write(header + "\n")
    for s in range(len(traj.t)):
        cells = [f"{traj.t[s]:.17g}"]
        cells += [f"{v:.17g}" for v in traj.states[s]]
        cells += [f"{traj.monitors[n][s]:.17g}" for n in names]
        fh.write(",".join(cells) + "\n")


def outcome_to_json(outcome: IntegrationOutcome) -> str:
    return json.dumps(outcome.to_json_dict(), sort_keys=True, indent=2)
