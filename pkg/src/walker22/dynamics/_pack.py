"""Flattened float views of a metric's Christoffel field.

The integrator kernels (compiled and pure Python) evaluate the 40
independent Christoffel polynomials at every stage, so the polynomials are
packed once per metric into flat coefficient/exponent arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

SYM_PAIRS = ((0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3),
             (2, 2), (2, 3), (3, 3))
PAIR_INDEX = tuple(
    tuple(SYM_PAIRS.index((min(i, j), max(i, j))) for j in range(4))
    for i in range(4)
)

MAX_DEGREE = 32  # per-variable cap; kernel power tables are sized for this


def _pack_polys(polys):
    coeffs: list[float] = []
    exps: list[tuple] = []
    offsets = [0]
    for p in polys:
        terms = sorted(p.terms().items())
        for e, c in terms:
            if max(e) > MAX_DEGREE:
                raise ValueError(
                    f"exponent {max(e)} exceeds kernel cap {MAX_DEGREE}"
                )
            coeffs.append(float(c))
            exps.append(e)
        offsets.append(len(coeffs))
    return (
        np.asarray(coeffs, dtype=np.float64),
        np.asarray(exps, dtype=np.int32).reshape(len(coeffs), 4),
        np.asarray(offsets, dtype=np.int64),
    )


@dataclass(frozen=True)
class PackedMetric:
    gam_coeffs: np.ndarray
    gam_exps: np.ndarray
    gam_offsets: np.ndarray
    max_deg: int
    _lists: dict = field(default_factory=dict, compare=False, repr=False)

    def as_lists(self):
        """Plain-list mirror for the pure-Python kernel's hot loop."""
        if not self._lists:
            self._lists["coeffs"] = self.gam_coeffs.tolist()
            self._lists["exps"] = [tuple(e) for e in self.gam_exps.tolist()]
            self._lists["offsets"] = self.gam_offsets.tolist()
        return self._lists["coeffs"], self._lists["exps"], self._lists["offsets"]


def pack_metric(metric) -> PackedMetric:
    gamma = metric.fields.christoffel
    polys = [gamma[k][i][j] for k in range(4) for (i, j) in SYM_PAIRS]
    coeffs, exps, offsets = _pack_polys(polys)
    max_deg = int(exps.max()) if len(coeffs) else 0
    return PackedMetric(coeffs, exps, offsets, max_deg)


_PACK_CACHE: dict[int, PackedMetric] = {}


def packed_for(metric) -> PackedMetric:
    key = id(metric)
    pm = _PACK_CACHE.get(key)
    if pm is None:
        pm = pack_metric(metric)
        if len(_PACK_CACHE) > 256:
            _PACK_CACHE.clear()
        _PACK_CACHE[key] = pm
    return pm
