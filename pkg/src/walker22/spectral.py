"""Exact spectral classification of 4x4 rational operators.

Characteristic and minimal polynomials are computed exactly over Q, so the
Jordan-type conclusions (diagonalizability, nilpotency index, minimal
polynomial degree) are decisions, not estimates.  Numeric eigenvalues are
obtained from the exact square-free factors, which keeps repeated roots at
full float accuracy instead of the eps^(1/multiplicity) a naive companion
solve would give.

Univariate rational polynomials are plain lists of Fractions in ascending
degree order.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from walker22 import geometry
from walker22._linalg4 import identity, mat_mul, solve_in_span
from walker22.geometry import WalkerMetric, rational_str

RatPoly = list  # list[Fraction], ascending


class SamplingBudgetError(RuntimeError):
    """Rejection sampling failed to find a usable vector."""


# --- univariate exact polynomial helpers -----------------------------------


def rp_trim(p: RatPoly) -> RatPoly:
    while p and p[-1] == 0:
        p.pop()
    return p


def rp_degree(p: RatPoly) -> int:
    return len(p) - 1


def rp_mul(a: RatPoly, b: RatPoly) -> RatPoly:
    out = [Fraction(0)] * (len(a) + len(b) - 1) if a and b else []
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return rp_trim(out)


def rp_divmod(a: RatPoly, b: RatPoly) -> tuple[RatPoly, RatPoly]:
    a = list(a)
    b = rp_trim(list(b))
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    q = [Fraction(0)] * max(0, len(a) - len(b) + 1)
    while len(a) >= len(b) and rp_trim(list(a)):
        if not a[-1]:
            a.pop()
            continue
        shift = len(a) - len(b)
        coeff = a[-1] / b[-1]
        q[shift] = coeff
        for i, y in enumerate(b):
            a[shift + i] -= coeff * y
        a.pop()
    return rp_trim(q), rp_trim(a)


def rp_gcd(a: RatPoly, b: RatPoly) -> RatPoly:
    a, b = rp_trim(list(a)), rp_trim(list(b))
    while b:
        _, r = rp_divmod(a, b)
        a, b = b, r
    if a:
        lead = a[-1]
        a = [c / lead for c in a]
    return a


def rp_derivative(p: RatPoly) -> RatPoly:
    return rp_trim([c * i for i, c in enumerate(p)][1:])


def rp_sub(a: RatPoly, b: RatPoly) -> RatPoly:
    n = max(len(a), len(b))
    a = list(a) + [Fraction(0)] * (n - len(a))
    b = list(b) + [Fraction(0)] * (n - len(b))
    return rp_trim([x - y for x, y in zip(a, b)])


def rp_eval(p: RatPoly, z):
    total = 0 * z
    for c in reversed(p):
        total = total * z + (float(c) if isinstance(z, (float, complex)) else c)
    return total


def rp_monic(p: RatPoly) -> RatPoly:
    p = rp_trim(list(p))
    if p:
        lead = p[-1]
        p = [c / lead for c in p]
    return p


def square_free_decomposition(p: RatPoly) -> list[tuple[RatPoly, int]]:
    """Yun's algorithm: returns [(monic factor, multiplicity)] with
    square-free, pairwise coprime factors whose weighted product is p."""
    p = rp_monic(p)
    if rp_degree(p) < 1:
        return []
    dp = rp_derivative(p)
    a = rp_gcd(p, dp)
    if rp_degree(a) < 1:
        return [(p, 1)]
    b, _ = rp_divmod(p, a)
    c, _ = rp_divmod(dp, a)
    d = rp_sub(c, rp_derivative(b))
    out = []
    i = 1
    while rp_degree(b) >= 1:
        g = rp_gcd(b, d)
        if rp_degree(g) >= 1:
            out.append((g, i))
        b, _ = rp_divmod(b, g)
        c, _ = rp_divmod(d, g)
        d = rp_sub(c, rp_derivative(b))
        i += 1
    return out


# --- operators --------------------------------------------------------------


def _as_exact_matrix(op) -> tuple:
    if isinstance(op, Operator4):
        op = op.matrix
    rows = tuple(tuple(Fraction(x) for x in row) for row in op)
    if len(rows) != 4 or any(len(r) != 4 for r in rows):
        raise ValueError("operator must be 4x4")
    return rows


def char_poly(op) -> RatPoly:
    """Monic characteristic polynomial, ascending coefficients, exact
    (Faddeev-LeVerrier)."""
    a = _as_exact_matrix(op)
    coeffs = [Fraction(1)]  # leading
    m = a
    cs = []
    for k in range(1, 5):
        trace = sum(m[i][i] for i in range(4))
        ck = -trace / k
        cs.append(ck)
        if k < 4:
            shifted = tuple(
                tuple(m[i][j] + (ck if i == j else 0) for j in range(4))
                for i in range(4)
            )
            m = mat_mul(a, shifted)
    # p(t) = t^4 + cs[0] t^3 + cs[1] t^2 + cs[2] t + cs[3]
    return [cs[3], cs[2], cs[1], cs[0], Fraction(1)]


def min_poly(op) -> RatPoly:
    """Monic minimal polynomial via exact linear dependence of matrix powers."""
    a = _as_exact_matrix(op)
    powers = [identity(4)]
    for _ in range(4):
        powers.append(mat_mul(powers[-1], a))
    vecs = [[m[i][j] for i in range(4) for j in range(4)] for m in powers]
    for d in range(1, 5):
        sol = solve_in_span(vecs[:d], [-x for x in vecs[d]])
        if sol is not None:
            return list(sol) + [Fraction(1)]
    raise AssertionError("Cayley-Hamilton violated")  # unreachable


def is_diagonalizable(op) -> bool:
    m = min_poly(op)
    return rp_degree(rp_gcd(m, rp_derivative(m))) == 0


def nilpotency_index(op) -> int | None:
    """d with min_poly = t^d, or None when the operator is not nilpotent."""
    m = min_poly(op)
    if all(c == 0 for c in m[:-1]):
        return rp_degree(m)
    return None


def _polish_root(coeffs_desc: np.ndarray, dcoeffs_desc: np.ndarray, z: complex,
                 iterations: int = 3) -> complex:
    for _ in range(iterations):
        fz = complex(np.polyval(coeffs_desc, z))
        dfz = complex(np.polyval(dcoeffs_desc, z))
        if dfz == 0:
            break
        step = fz / dfz
        if not (math.isfinite(step.real) and math.isfinite(step.imag)):
            break
        z = z - step
    return z


def _roots_square_free(factor: RatPoly) -> list[complex]:
    deg = rp_degree(factor)
    if deg == 0:
        return []
    if deg == 1:
        return [complex(float(-factor[0] / factor[1]))]
    desc = np.array([float(c) for c in reversed(factor)])
    ddesc = np.polyder(desc)
    roots = [
        _polish_root(desc, ddesc, complex(z)) for z in np.roots(desc)
    ]
    scale = max(1.0, max(abs(z) for z in roots))
    cleaned = []
    for z in roots:
        if abs(z.imag) <= 1e-12 * scale:
            z = complex(z.real, 0.0)
        cleaned.append(z)
    # pair complex roots into exact conjugates (real coefficients)
    out: list[complex] = []
    pending = [z for z in cleaned if z.imag != 0]
    out.extend(z for z in cleaned if z.imag == 0)
    pending.sort(key=lambda z: (z.real, abs(z.imag), z.imag))
    while pending:
        z = pending.pop(0)
        mate_idx = min(
            range(len(pending)),
            key=lambda i: abs(pending[i] - z.conjugate()),
            default=None,
        )
        if mate_idx is None:
            out.append(z)
            continue
        w = pending.pop(mate_idx)
        avg = (z + w.conjugate()) / 2
        out.extend([avg, avg.conjugate()])
    return out


def spectrum_sort_key(z: complex):
    z = complex(z.real + 0.0, z.imag + 0.0)  # normalize negative zeros
    return (abs(z), cmath.phase(z) if z != 0 else 0.0)


def eigenvalues(char: RatPoly) -> tuple[complex, ...]:
    """All four roots with multiplicity, sorted by modulus then argument.

    The exact square-free decomposition supplies multiplicities, so repeated
    roots do not lose accuracy.
    """
    char = rp_monic(list(char))
    if rp_degree(char) != 4:
        raise ValueError("expected a monic quartic")
    roots: list[complex] = []
    for factor, mult in square_free_decomposition(char):
        for z in _roots_square_free(factor):
            roots.extend([z] * mult)
    roots.sort(key=spectrum_sort_key)
    return tuple(roots)


@dataclass(frozen=True)
class SpectralReport:
    """Jordan-relevant data of a 4x4 operator with exact entries."""

    char_poly: tuple
    min_poly: tuple
    eigenvalues: tuple
    diagonalizable: bool
    nilpotency_index: int | None

    @classmethod
    def from_operator(cls, op) -> "SpectralReport":
        cp = char_poly(op)
        mp = min_poly(op)
        gcd = rp_gcd(mp, rp_derivative(mp))
        nilp = rp_degree(mp) if all(c == 0 for c in mp[:-1]) else None
        return cls(
            char_poly=tuple(cp),
            min_poly=tuple(mp),
            eigenvalues=eigenvalues(cp),
            diagonalizable=rp_degree(gcd) == 0,
            nilpotency_index=nilp,
        )

    def to_json_dict(self) -> dict:
        return {
            "char_poly": [rational_str(c) for c in self.char_poly],
            "min_poly": [rational_str(c) for c in self.min_poly],
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "diagonalizable": self.diagonalizable,
            "nilpotency_index": self.nilpotency_index,
        }


@dataclass(frozen=True)
class Operator4:
    """A 4x4 operator together with its defining context."""

    matrix: tuple
    point: tuple
    vector: tuple


# --- unit vectors and scans -------------------------------------------------


@dataclass(frozen=True)
class UnitVector:
    """A g-unit tangent vector.

    ``components`` are floats scaled by 1/sqrt(|g(v,v)|); when the sample was
    drawn with exact arithmetic, ``raw`` holds the unscaled rational vector
    and ``norm_sq`` its exact g-norm, so operators built from it can be
    normalized exactly (J(v)/|g(v,v)| equals J of the unit vector).
    """

    components: tuple
    causal_sign: int
    raw: tuple | None = None
    norm_sq: Fraction | None = None


def _quadratic_form(gp, v):
    total = 0
    for i in range(4):
        for j in range(4):
            if gp[i][j]:
                total = total + gp[i][j] * v[i] * v[j]
    return total


def sample_unit_vector(gp, sign: int, rng, max_tries: int = 10000,
                       threshold: float = 1e-3) -> UnitVector:
    """Rejection-sample a unit vector of the requested causal sign.

    ``gp`` is the metric matrix at a point; exact entries give an exact
    sample (see :class:`UnitVector`).  Deterministic for a given generator
    state.
    """
    exact = all(
        isinstance(x, (int, Fraction)) and not isinstance(x, bool)
        for row in gp for x in row
    )
    for _ in range(max_tries):
        nums = rng.integers(-64, 65, size=4)
        if not nums.any():
            continue
        if exact:
            v = tuple(Fraction(int(n), 64) for n in nums)
            q = _quadratic_form(gp, v)
            if q == 0 or abs(q) <= Fraction(1, 1000):
                continue
            if (q > 0) != (sign > 0):
                continue
            scale = 1.0 / math.sqrt(abs(float(q)))
            return UnitVector(
                components=tuple(float(c) * scale for c in v),
                causal_sign=sign,
                raw=v,
                norm_sq=q,
            )
        v = tuple(float(n) / 64.0 for n in nums)
        q = _quadratic_form(gp, v)
        if abs(q) <= threshold or (q > 0) != (sign > 0):
            continue
        scale = 1.0 / math.sqrt(abs(q))
        return UnitVector(
            components=tuple(c * scale for c in v),
            causal_sign=sign,
        )
    raise SamplingBudgetError(
        f"no unit vector of sign {sign:+d} found in {max_tries} draws"
    )


def unit_normalized_operator(metric: WalkerMetric, point, kind: str,
                             vec: UnitVector) -> tuple:
    """Exact matrix of the Jacobi-type operator at a unit vector.

    Uses the quadratic rescale J(c v) = c^2 J(v): dividing J(raw) by
    |g(raw, raw)| equals evaluating at the unit-normalized vector, without
    leaving rational arithmetic.
    """
    if vec.raw is None or vec.norm_sq is None:
        raise ValueError("exact normalization needs an exact sample")
    if kind == "jacobi":
        op = geometry.jacobi_operator(metric, point, vec.raw)
    elif kind == "conformal":
        op = geometry.conformal_jacobi_operator(metric, point, vec.raw)
    else:
        raise ValueError(f"unknown operator kind {kind!r}")
    scale = Fraction(1) / abs(vec.norm_sq)
    return tuple(tuple(x * scale for x in row) for row in op)


@dataclass(frozen=True)
class ScanResult:
    """Outcome of sampling Jacobi-type spectra over unit vectors."""

    constant: bool
    spacelike_spectrum: tuple
    timelike_spectrum: tuple
    cross_class_match: bool
    witness: tuple | None  # (vector components, spectrum) of first mismatch
    samples: int

    def to_json_dict(self) -> dict:
        return {
            "constant": self.constant,
            "spacelike_spectrum": [[z.real, z.imag]
                                   for z in self.spacelike_spectrum],
            "timelike_spectrum": [[z.real, z.imag]
                                  for z in self.timelike_spectrum],
            "cross_class_match": self.cross_class_match,
            "witness": (
                None if self.witness is None else {
                    "vector": list(self.witness[0]),
                    "spectrum": [[z.real, z.imag] for z in self.witness[1]],
                }
            ),
            "samples": self.samples,
        }


def spectra_close(a: Sequence[complex], b: Sequence[complex],
                  tol: float) -> bool:
    if len(a) != len(b):
        return False
    sa = sorted(a, key=spectrum_sort_key)
    sb = sorted(b, key=spectrum_sort_key)
    return all(abs(x - y) <= tol for x, y in zip(sa, sb))


def osserman_scan(metric: WalkerMetric, point, kind: str = "jacobi",
                  n: int = 8, tol: float = 1e-8, rng=None,
                  seed: int | None = None) -> ScanResult:
    """Sample unit spacelike and timelike vectors and compare spectra.

    ``constant`` reports within-class constancy for both causal classes;
    the spacelike class versus the negated timelike class is reported
    separately as ``cross_class_match``.
    """
    if n < 2:
        raise ValueError("need at least two samples per causal class")
    if rng is None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(
            0 if seed is None else seed)))
    gp = metric.metric_matrix(point)
    spectra = {1: [], -1: []}
    vectors = {1: [], -1: []}
    for sign in (1, -1):
        for _ in range(n):
            vec = sample_unit_vector(gp, sign, rng)
            op = unit_normalized_operator(metric, point, kind, vec)
            spectra[sign].append(eigenvalues(char_poly(op)))
            vectors[sign].append(vec.components)
    constant = True
    witness = None
    for sign in (1, -1):
        ref = spectra[sign][0]
        for vec, spec in zip(vectors[sign], spectra[sign]):
            if not spectra_close(ref, spec, tol):
                constant = False
                witness = (vec, spec)
                break
        if not constant:
            break
    neg_timelike = [tuple(-z for z in s) for s in spectra[-1]]
    cross = spectra_close(spectra[1][0], neg_timelike[0], tol)
    return ScanResult(
        constant=constant,
        spacelike_spectrum=tuple(sorted(spectra[1][0],
                                        key=spectrum_sort_key)),
        timelike_spectrum=tuple(sorted(spectra[-1][0],
                                       key=spectrum_sort_key)),
        cross_class_match=cross,
        witness=witness,
        samples=n,
    )
