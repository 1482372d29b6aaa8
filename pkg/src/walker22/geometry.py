"""Curvature machinery for Walker metrics on R^4 with signature (2,2).

The metric is determined by three coefficient polynomials: in the coordinate
frame the only nonzero inner products are ``g(d1,d3) = g(d2,d4) = 1`` together
with ``g(d3,d3) = psi33``, ``g(d3,d4) = psi34`` and ``g(d4,d4) = psi44``.
Because the inverse metric is again polynomial in closed form, every
curvature quantity (Christoffel symbols, Riemann, Ricci, scalar, Weyl, the
Jacobi operators) is a polynomial field; the fields are built once per metric
with exact rational coefficients and evaluated at points on demand.

Sign conventions.  The curvature operator is the commutator convention
``R(x,y) = [nabla_x, nabla_y] - nabla_[x,y]`` and the Ricci contraction is
``rho(x,y) = sum_ij g^ij g(R(x,e_i)e_j, y)``.  Reported four-index components
use the slot order fixed by the calibration check ``R(d1,d3,d3,d1) = 4k`` on
the non-diagonalizable Osserman family, i.e. ``R(x,y,z,w) = g(R(x,y)w, z)``;
both anchors are asserted in the test suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

from walker22._linalg4 import mat_inverse, mat_vec
from walker22.expression import Poly4, parse, render

_RANGE = range(4)
_SYM_PAIRS = [(i, j) for i in _RANGE for j in _RANGE if i <= j]


class PreconditionError(ValueError):
    """An operation was called outside its stated precondition."""


def _is_exact_point(point) -> bool:
    return all(
        isinstance(c, (int, Fraction)) and not isinstance(c, bool)
        for c in point
    )


def _eval_scalar(p: Poly4, point):
    if _is_exact_point(point):
        return p.eval_exact(point)
    return p.eval_float(point)


def _eval_grid(grid, point):
    """Recursively evaluate a nested structure of Poly4 at a point."""
    if isinstance(grid, Poly4):
        return _eval_scalar(grid, point)
    return tuple(_eval_grid(g, point) for g in grid)


def rational_str(value: Fraction) -> str:
    value = Fraction(value)
    return str(value)


class WalkerMetric:
    """A signature-(2,2) Walker metric determined by psi33, psi34, psi44."""

    dimension = 4
    signature = (2, 2)

    def __init__(self, psi33: Poly4, psi34: Poly4, psi44: Poly4,
                 label: str = ""):
        self.psi33 = psi33
        self.psi34 = psi34
        self.psi44 = psi44
        self.label = label

    def __repr__(self):
        return f"WalkerMetric({self.label or 'unnamed'})"

    @classmethod
    def from_dict(cls, data: dict) -> "WalkerMetric":
        params = {
            name: Fraction(text)
            for name, text in (data.get("parameters") or {}).items()
        }
        return cls(
            psi33=parse(data.get("psi33", "0"), params),
            psi34=parse(data.get("psi34", "0"), params),
            psi44=parse(data.get("psi44", "0"), params),
            label=data.get("label", ""),
        )

    @classmethod
    def from_json(cls, path) -> "WalkerMetric":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "parameters": {},
            "psi33": render(self.psi33),
            "psi34": render(self.psi34),
            "psi44": render(self.psi44),
        }

    def is_strict(self) -> bool:
        """True when the psi coefficients depend only on x3, x4."""
        return not any(
            p.depends_on(v)
            for p in (self.psi33, self.psi34, self.psi44)
            for v in (1, 2)
        )

    def has_cross_term_only(self) -> bool:
        return self.psi33.is_zero() and self.psi44.is_zero()

    # --- pointwise metric ---------------------------------------------

    def metric_matrix(self, point):
        f = self.fields
        return _eval_grid(f.metric, point)

    def inverse_metric(self, point):
        f = self.fields
        return _eval_grid(f.inverse, point)

    @cached_property
    def fields(self) -> "CurvatureFields":
        return CurvatureFields(self)


class CurvatureFields:
    """Exact polynomial curvature fields of a Walker metric.

    Heavyweight members are built lazily and cached, so a metric used only
    for geodesics never pays for its Weyl tensor.
    """

    def __init__(self, metric: WalkerMetric):
        self._m = metric

    @cached_property
    def metric(self):
        z = Poly4.zero()
        one = Poly4.one()
        m = self._m
        return (
            (z, z, one, z),
            (z, z, z, one),
            (one, z, m.psi33, m.psi34),
            (z, one, m.psi34, m.psi44),
        )

    @cached_property
    def inverse(self):
        # closed form: the block structure makes g^{-1} polynomial
        z = Poly4.zero()
        one = Poly4.one()
        m = self._m
        return (
            (-m.psi33, -m.psi34, one, z),
            (-m.psi34, -m.psi44, z, one),
            (one, z, z, z),
            (z, one, z, z),
        )

    @cached_property
    def metric_gradient(self):
        g = self.metric
        return tuple(
            tuple(tuple(g[i][j].diff(l + 1) for j in _RANGE) for i in _RANGE)
            for l in _RANGE
        )

    @cached_property
    def christoffel(self):
        """gamma[k][i][j] with nabla_{d_i} d_j = gamma[k][i][j] d_k."""
        dg = self.metric_gradient
        ginv = self.inverse
        half = Fraction(1, 2)
        gamma = [[[Poly4.zero()] * 4 for _ in _RANGE] for _ in _RANGE]
        for i in _RANGE:
            for j in _RANGE:
                if j < i:
                    continue
                comps = []
                for l in _RANGE:
                    comps.append(dg[i][j][l] + dg[j][i][l] - dg[l][i][j])
                for k in _RANGE:
                    acc = Poly4.zero()
                    for l in _RANGE:
                        if not ginv[k][l].is_zero() and not comps[l].is_zero():
                            acc = acc + ginv[k][l] * comps[l]
                    acc = half * acc
                    gamma[k][i][j] = acc
                    gamma[k][j][i] = acc
        return tuple(tuple(tuple(row) for row in plane) for plane in gamma)

    @cached_property
    def riemann_mixed(self):
        """rm[l][i][j][k] with R(d_i,d_j)d_k = rm[l][i][j][k] d_l."""
        gam = self.christoffel
        dgam = tuple(
            tuple(
                tuple(tuple(gam[l][i][j].diff(a + 1) for j in _RANGE)
                      for i in _RANGE)
                for l in _RANGE
            )
            for a in _RANGE
        )
        zero = Poly4.zero()
        rm = [[[[zero] * 4 for _ in _RANGE] for _ in _RANGE] for _ in _RANGE]
        for i in _RANGE:
            for j in _RANGE:
                if j <= i:
                    continue
                for k in _RANGE:
                    for l in _RANGE:
                        acc = dgam[i][l][j][k] - dgam[j][l][i][k]
                        for m in _RANGE:
                            acc = acc + gam[l][i][m] * gam[m][j][k]
                            acc = acc - gam[l][j][m] * gam[m][i][k]
                        rm[l][i][j][k] = acc
                        rm[l][j][i][k] = -acc
        return tuple(
            tuple(tuple(tuple(p) for p in plane) for plane in block)
            for block in rm
        )

    @cached_property
    def riemann_lowered(self):
        """Four-index components in the reported slot order (see module doc)."""
        rm = self.riemann_mixed
        g = self.metric
        return self._lower(rm)

    def _lower(self, mixed):
        g = self.metric
        out = []
        for i in _RANGE:
            plane_i = []
            for j in _RANGE:
                plane_j = []
                for k in _RANGE:
                    row = []
                    for l in _RANGE:
                        acc = Poly4.zero()
                        for m in _RANGE:
                            if not g[m][k].is_zero():
                                acc = acc + mixed[m][i][j][l] * g[m][k]
                        row.append(acc)
                    plane_j.append(tuple(row))
                plane_i.append(tuple(plane_j))
            out.append(tuple(plane_i))
        return tuple(out)

    @cached_property
    def ricci_operator(self):
        """rop[l][m]: the (1,1) Ricci endomorphism rho d_m = rop[l][m] d_l."""
        rm = self.riemann_mixed
        ginv = self.inverse
        rop = []
        for l in _RANGE:
            row = []
            for m in _RANGE:
                acc = Poly4.zero()
                for i in _RANGE:
                    for j in _RANGE:
                        if not ginv[i][j].is_zero():
                            acc = acc + ginv[i][j] * rm[l][m][i][j]
                row.append(acc)
            rop.append(tuple(row))
        return tuple(rop)

    @cached_property
    def ricci(self):
        rop = self.ricci_operator
        g = self.metric
        ric = []
        for m in _RANGE:
            row = []
            for n in _RANGE:
                acc = Poly4.zero()
                for l in _RANGE:
                    if not g[l][n].is_zero():
                        acc = acc + rop[l][m] * g[l][n]
                row.append(acc)
            ric.append(tuple(row))
        return tuple(ric)

    @cached_property
    def scalar(self):
        ginv = self.inverse
        ric = self.ricci
        acc = Poly4.zero()
        for i in _RANGE:
            for j in _RANGE:
                if not ginv[i][j].is_zero():
                    acc = acc + ginv[i][j] * ric[i][j]
        return acc

    @cached_property
    def weyl_mixed(self):
        """wm[l][i][j][k] with W(d_i,d_j)d_k = wm[l][i][j][k] d_l, m = 4."""
        rm = self.riemann_mixed
        g = self.metric
        rop = self.ricci_operator
        ric = self.ricci
        tau6 = Fraction(1, 6) * self.scalar
        half = Fraction(1, 2)
        wm = []
        for l in _RANGE:
            block = []
            for i in _RANGE:
                plane = []
                for j in _RANGE:
                    row = []
                    for k in _RANGE:
                        # trace-free completion of R; the sign of the Ricci
                        # bracket is fixed by requiring every g-trace of the
                        # lowered tensor to vanish (asserted in tests)
                        acc = rm[l][i][j][k]
                        if l == i:
                            acc = acc + tau6 * g[j][k] - half * ric[j][k]
                        if l == j:
                            acc = acc - tau6 * g[i][k] + half * ric[i][k]
                        acc = acc + half * (g[i][k] * rop[l][j])
                        acc = acc - half * (g[j][k] * rop[l][i])
                        row.append(acc)
                    plane.append(tuple(row))
                block.append(tuple(plane))
            wm.append(tuple(block))
        return tuple(wm)

    @cached_property
    def weyl_lowered(self):
        return self._lower(self.weyl_mixed)


# --- point operations -----------------------------------------------------


def christoffel(metric: WalkerMetric, point):
    """Christoffel symbols gamma[k][i][j] evaluated at a point."""
    return _eval_grid(metric.fields.christoffel, point)


def cross_term_ricci(metric: WalkerMetric, point):
    """Closed-form Ricci for metrics with psi33 = psi44 = 0.

    This is the independent shortcut used as an oracle against the general
    pipeline; only the cross coefficient psi34 enters.
    """
    if not metric.has_cross_term_only():
        raise PreconditionError(
            "closed-form Ricci requires psi33 = psi44 = 0"
        )
    p = metric.psi34
    d1, d2, d3, d4 = (p.diff(v) for v in (1, 2, 3, 4))
    half = Fraction(1, 2)
    rho13 = half * d1.diff(2)
    rho14 = half * d1.diff(1)
    rho23 = half * d2.diff(2)
    rho33 = half * (-(d2 * d2) + 2 * d2.diff(3))
    rho44 = half * (-(d1 * d1) + 2 * d1.diff(4))
    rho34 = half * (d1 * d2 + 2 * p * d1.diff(2) - d1.diff(3) - d2.diff(4))
    zero = Poly4.zero()
    grid = (
        (zero, zero, rho13, rho14),
        (zero, zero, rho23, rho13),
        (rho13, rho23, rho33, rho34),
        (rho14, rho13, rho34, rho44),
    )
    return _eval_grid(grid, point)


def jacobi_operator(metric: WalkerMetric, point, x: Sequence):
    """Matrix of y -> R(y, x)x in the coordinate frame at a point."""
    rm = _eval_grid(metric.fields.riemann_mixed, point)
    return _direction_square(rm, x)


def conformal_jacobi_operator(metric: WalkerMetric, point, x: Sequence):
    """Matrix of y -> W(y, x)x in the coordinate frame at a point."""
    wm = _eval_grid(metric.fields.weyl_mixed, point)
    return _direction_square(wm, x)


def _direction_square(mixed_vals, x):
    x = tuple(x)
    op = []
    for l in _RANGE:
        row = []
        for j in _RANGE:
            acc = 0
            for i in _RANGE:
                if not x[i]:
                    continue
                for k in _RANGE:
                    if x[k]:
                        acc = acc + mixed_vals[l][j][i][k] * x[i] * x[k]
            row.append(acc)
        op.append(tuple(row))
    return tuple(op)


def ricci_quadratic(metric: WalkerMetric, point, v: Sequence):
    """rho(v, v) at a point; float path permitted."""
    ric = _eval_grid(metric.fields.ricci, point)
    total = 0
    for i in _RANGE:
        for j in _RANGE:
            if ric[i][j]:
                total = total + ric[i][j] * v[i] * v[j]
    return total


def inner_product(metric: WalkerMetric, point, u: Sequence, w: Sequence):
    g = metric.metric_matrix(point)
    total = 0
    for i in _RANGE:
        for j in _RANGE:
            if g[i][j]:
                total = total + g[i][j] * u[i] * w[j]
    return total


@dataclass(frozen=True)
class CurvatureReport:
    """All curvature data of a metric at a single point, exact."""

    point: tuple
    christoffel: tuple
    riemann: tuple  # four-index, reported slot order
    ricci: tuple
    scalar: Fraction
    weyl: tuple  # four-index, reported slot order

    def to_json_dict(self) -> dict:
        def fmt(v):
            return rational_str(v) if isinstance(v, (int, Fraction)) else repr(v)

        def four_index(t):
            out = {}
            for i in _RANGE:
                for j in _RANGE:
                    for k in _RANGE:
                        for l in _RANGE:
                            v = t[i][j][k][l]
                            if v:
                                out[f"{i+1},{j+1},{k+1},{l+1}"] = fmt(v)
            return dict(sorted(out.items()))

        gamma = {}
        for k in _RANGE:
            for i in _RANGE:
                for j in _RANGE:
                    if i <= j and self.christoffel[k][i][j]:
                        gamma[f"{k+1};{i+1},{j+1}"] = fmt(
                            self.christoffel[k][i][j]
                        )
        return {
            "point": [fmt(c) for c in self.point],
            "christoffel": dict(sorted(gamma.items())),
            "riemann": four_index(self.riemann),
            "ricci": [[fmt(v) for v in row] for row in self.ricci],
            "scalar": fmt(self.scalar),
            "weyl": four_index(self.weyl),
        }


def curvature_report(metric: WalkerMetric, point) -> CurvatureReport:
    f = metric.fields
    return CurvatureReport(
        point=tuple(point),
        christoffel=_eval_grid(f.christoffel, point),
        riemann=_reorder_display(_eval_grid(f.riemann_lowered, point)),
        ricci=_eval_grid(f.ricci, point),
        scalar=_eval_grid(f.scalar, point),
        weyl=_reorder_display(_eval_grid(f.weyl_lowered, point)),
    )


def _reorder_display(lowered_vals):
    # fields store g(R(d_i,d_j)d_l, d_k) directly, already display order
    return lowered_vals


# --- generic dense oracle ---------------------------------------------------


class DensePointCurvature:
    """Pointwise curvature via generic index loops and Gaussian inversion.

    Independent witness for the closed-form pipeline: no Walker shortcuts,
    the inverse metric is computed numerically (exact rationals) at the
    point, and derivatives of the inverse use d(g^{-1}) = -g^{-1} dg g^{-1}.
    A constant conformal factor can be applied to the metric entries.
    """

    def __init__(self, metric_field, point, scale: Fraction = Fraction(1)):
        point = tuple(point)
        scale = Fraction(scale)
        g_poly = metric_field
        self.g = tuple(
            tuple(scale * g_poly[i][j].eval_exact(point) for j in _RANGE)
            for i in _RANGE
        )
        self.ginv = mat_inverse(self.g)
        dg = []
        for a in _RANGE:
            dg.append(tuple(
                tuple(scale * g_poly[i][j].diff(a + 1).eval_exact(point)
                      for j in _RANGE)
                for i in _RANGE
            ))
        self.dg = tuple(dg)
        ddg = []
        for a in _RANGE:
            plane = []
            for b in _RANGE:
                plane.append(tuple(
                    tuple(
                        scale
                        * g_poly[i][j].diff(a + 1).diff(b + 1).eval_exact(point)
                        for j in _RANGE
                    )
                    for i in _RANGE
                ))
            ddg.append(tuple(plane))
        self.ddg = tuple(ddg)
        self._build()

    def _build(self):
        half = Fraction(1, 2)
        g, ginv, dg, ddg = self.g, self.ginv, self.dg, self.ddg

        def dcomp(m, j, k):
            return dg[j][k][m] + dg[k][j][m] - dg[m][j][k]

        def ddcomp(a, m, j, k):
            return ddg[a][j][k][m] + ddg[a][k][j][m] - ddg[a][m][j][k]

        gamma = tuple(
            tuple(
                tuple(
                    half * sum(ginv[l][m] * dcomp(m, j, k) for m in _RANGE)
                    for k in _RANGE
                )
                for j in _RANGE
            )
            for l in _RANGE
        )
        # d_a (g^{-1}) = -g^{-1} (d_a g) g^{-1}
        dginv = []
        for a in _RANGE:
            inner = tuple(
                tuple(
                    sum(dg[a][i][m] * ginv[m][j] for m in _RANGE)
                    for j in _RANGE
                )
                for i in _RANGE
            )
            dginv.append(tuple(
                tuple(
                    -sum(ginv[i][m] * inner[m][j] for m in _RANGE)
                    for j in _RANGE
                )
                for i in _RANGE
            ))
        dgamma = tuple(
            tuple(
                tuple(
                    tuple(
                        half * sum(
                            dginv[a][l][m] * dcomp(m, j, k)
                            + ginv[l][m] * ddcomp(a, m, j, k)
                            for m in _RANGE
                        )
                        for k in _RANGE
                    )
                    for j in _RANGE
                )
                for l in _RANGE
            )
            for a in _RANGE
        )
        rm = [[[[Fraction(0)] * 4 for _ in _RANGE] for _ in _RANGE]
              for _ in _RANGE]
        for i in _RANGE:
            for j in _RANGE:
                for k in _RANGE:
                    for l in _RANGE:
                        acc = dgamma[i][l][j][k] - dgamma[j][l][i][k]
                        for m in _RANGE:
                            acc += gamma[l][i][m] * gamma[m][j][k]
                            acc -= gamma[l][j][m] * gamma[m][i][k]
                        rm[l][i][j][k] = acc
        self.gamma = gamma
        self.riemann_mixed = tuple(
            tuple(tuple(tuple(r) for r in plane) for plane in block)
            for block in rm
        )
        rop = tuple(
            tuple(
                sum(
                    ginv[i][j] * self.riemann_mixed[l][m][i][j]
                    for i in _RANGE
                    for j in _RANGE
                )
                for m in _RANGE
            )
            for l in _RANGE
        )
        self.ricci_operator = rop
        self.ricci = tuple(
            tuple(
                sum(rop[l][m] * g[l][n] for l in _RANGE) for n in _RANGE
            )
            for m in _RANGE
        )
        self.scalar = sum(
            ginv[i][j] * self.ricci[i][j] for i in _RANGE for j in _RANGE
        )
        tau6 = self.scalar / 6
        wm = [[[[Fraction(0)] * 4 for _ in _RANGE] for _ in _RANGE]
              for _ in _RANGE]
        for l in _RANGE:
            for i in _RANGE:
                for j in _RANGE:
                    for k in _RANGE:
                        acc = self.riemann_mixed[l][i][j][k]
                        if l == i:
                            acc += tau6 * g[j][k] - half * self.ricci[j][k]
                        if l == j:
                            acc -= tau6 * g[i][k] - half * self.ricci[i][k]
                        acc += half * g[i][k] * rop[l][j]
                        acc -= half * g[j][k] * rop[l][i]
                        wm[l][i][j][k] = acc
        self.weyl_mixed = tuple(
            tuple(tuple(tuple(w) for w in plane) for plane in block)
            for block in wm
        )

    def lowered(self, mixed):
        """Four-index components in the reported slot order."""
        g = self.g
        return tuple(
            tuple(
                tuple(
                    tuple(
                        sum(mixed[m][i][j][l] * g[m][k] for m in _RANGE)
                        for l in _RANGE
                    )
                    for k in _RANGE
                )
                for j in _RANGE
            )
            for i in _RANGE
        )


def dense_point_curvature(metric: WalkerMetric, point,
                          scale: Fraction = Fraction(1)) -> DensePointCurvature:
    return DensePointCurvature(metric.fields.metric, point, scale)
