"""Exact sparse polynomial arithmetic in the chart coordinates x1..x4.

A polynomial is stored as a map from exponent 4-tuples to nonzero rational
coefficients (``fractions.Fraction``), so identity testing is exact and the
representation is canonical: two polynomials are equal iff their term maps
are equal.  The zero polynomial is the empty map.

Scalars are plain ``Fraction`` values throughout; ``Fraction`` already
guarantees a positive denominator and a reduced, unique representation.

The surface syntax accepted by :func:`parse` is a small arithmetic grammar::

    expr     := term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := base ('^' uint)?
    base     := uint | name | '(' expr ')' | '-' factor

Names are the coordinates ``x1..x4`` or parameter identifiers bound at parse
time; implicit multiplication is not allowed; whitespace is insignificant.
A ``/`` divisor must reduce to a nonzero constant (it is folded into the
coefficients), which keeps the result a polynomial.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Exponents = tuple  # 4-tuple of nonnegative ints
Scalar = Union[int, Fraction]

_ZERO_EXP = (0, 0, 0, 0)
_VAR_EXPS = ((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1))
VAR_NAMES = ("x1", "x2", "x3", "x4")


class ExpressionError(ValueError):
    """Malformed expression text; carries the offending character position."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class EvaluationOverflowError(ArithmeticError):
    """Float evaluation produced a non-finite value."""


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return Fraction(value)
    raise TypeError(f"expected an exact rational scalar, got {value!r}")


class Poly4:
    """Sparse polynomial over Q in x1..x4, canonical by construction."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Exponents, Scalar] | None = None):
        clean: dict[Exponents, Fraction] = {}
        if terms:
            for exps, coeff in terms.items():
                exps = tuple(exps)
                if len(exps) != 4 or any(
                    not isinstance(e, int) or e < 0 for e in exps
                ):
                    raise ValueError(f"bad exponent tuple {exps!r}")
                c = _as_fraction(coeff)
                if c:
                    c = clean.get(exps, Fraction(0)) + c
                    if c:
                        clean[exps] = c
                    else:
                        clean.pop(exps, None)
        self._terms = clean

    # --- constructors -------------------------------------------------

    @classmethod
    def zero(cls) -> "Poly4":
        return cls()

    @classmethod
    def one(cls) -> "Poly4":
        return cls({_ZERO_EXP: 1})

    @classmethod
    def constant(cls, c: Scalar) -> "Poly4":
        return cls({_ZERO_EXP: c})

    @classmethod
    def variable(cls, index: int) -> "Poly4":
        """The coordinate polynomial x<index>, index in 1..4."""
        if index not in (1, 2, 3, 4):
            raise ValueError("variable index must be 1..4")
        return cls({_VAR_EXPS[index - 1]: 1})

    # --- inspection ---------------------------------------------------

    def terms(self) -> dict[Exponents, Fraction]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return not self._terms or set(self._terms) == {_ZERO_EXP}

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("polynomial is not constant")
        return self._terms.get(_ZERO_EXP, Fraction(0))

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    def max_exponent(self, var: int) -> int:
        if not self._terms:
            return 0
        return max(e[var - 1] for e in self._terms)

    def depends_on(self, var: int) -> bool:
        return any(e[var - 1] for e in self._terms)

    # --- ring operations ----------------------------------------------

    def _promote(self, other) -> "Poly4 | None":
        if isinstance(other, Poly4):
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return Poly4.constant(other)
        return None

    def __add__(self, other):
        other = self._promote(other)
        if other is None:
            return NotImplemented
        terms = dict(self._terms)
        for exps, c in other._terms.items():
            s = terms.get(exps, Fraction(0)) + c
            if s:
                terms[exps] = s
            else:
                terms.pop(exps, None)
        out = Poly4.__new__(Poly4)
        out._terms = terms
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Poly4.__new__(Poly4)
        out._terms = {e: -c for e, c in self._terms.items()}
        return out

    def __sub__(self, other):
        other = self._promote(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._promote(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = self._promote(other)
        if other is None:
            return NotImplemented
        terms: dict[Exponents, Fraction] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = (e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2], e1[3] + e2[3])
                s = terms.get(e, Fraction(0)) + c1 * c2
                if s:
                    terms[e] = s
                else:
                    terms.pop(e, None)
        out = Poly4.__new__(Poly4)
        out._terms = terms
        return out

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("polynomial power must be a nonnegative integer")
        result = Poly4.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def __eq__(self, other):
        other = self._promote(other)
        if other is None:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    # --- calculus and evaluation ----------------------------------------

    def diff(self, var: int) -> "Poly4":
        """Exact partial derivative with respect to x<var>, var in 1..4."""
        if var not in (1, 2, 3, 4):
            raise ValueError("variable index must be 1..4")
        i = var - 1
        terms: dict[Exponents, Fraction] = {}
        for exps, c in self._terms.items():
            e = exps[i]
            if e:
                d = list(exps)
                d[i] = e - 1
                terms[tuple(d)] = c * e
        out = Poly4.__new__(Poly4)
        out._terms = terms
        return out

    def eval_exact(self, point: Sequence) -> Fraction:
        """Value at a point with exact rational coordinates."""
        coords = tuple(_as_fraction(c) for c in point)
        if len(coords) != 4:
            raise ValueError("point must have four coordinates")
        total = Fraction(0)
        for exps, c in self._terms.items():
            term = c
            for x, e in zip(coords, exps):
                if e:
                    term *= x**e
            total += term
        return total

    def eval_float(self, point: Sequence) -> float:
        """Value at a float point; raises on overflow to non-finite."""
        coords = tuple(float(c) for c in point)
        if len(coords) != 4:
            raise ValueError("point must have four coordinates")
        if not all(math.isfinite(c) for c in coords):
            raise ValueError("point coordinates must be finite")
        total = 0.0
        for exps, c in self._terms.items():
            term = float(c)
            for x, e in zip(coords, exps):
                for _ in range(e):
                    term *= x
            total += term
        if not math.isfinite(total):
            raise EvaluationOverflowError(
                f"evaluation overflowed to {total!r}"
            )
        return total

    # --- rendering ------------------------------------------------------

    def __str__(self) -> str:
        return render(self)

    def __repr__(self) -> str:
        return f"Poly4({render(self)})"


def differentiate(p: Poly4, var: int) -> Poly4:
    return p.diff(var)


def _term_sort_key(exps: Exponents):
    # graded, then lexicographic with x1 heaviest; descending overall
    return (-sum(exps), tuple(-e for e in exps))


def render(p: Poly4) -> str:
    """Deterministic text form; ``parse(render(p))`` returns ``p``."""
    if p.is_zero():
        return "0"
    pieces: list[str] = []
    for exps in sorted(p._terms, key=_term_sort_key):
        coeff = p._terms[exps]
        mono = "*".join(
            name if e == 1 else f"{name}^{e}"
            for name, e in zip(VAR_NAMES, exps)
            if e
        )
        mag = abs(coeff)
        if not mono:
            body = str(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{mag}*{mono}"
        if not pieces:
            pieces.append(body if coeff > 0 else f"-{body}")
        else:
            pieces.append(f"+ {body}" if coeff > 0 else f"- {body}")
    return " ".join(pieces)


# --- parser -------------------------------------------------------------

_SYMBOLS = set("+-*/^()")


def _tokenize(text: str):
    tokens: list[tuple[str, str, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(("int", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        if ch in _SYMBOLS:
            tokens.append((ch, ch, i))
            i += 1
            continue
        raise ExpressionError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, params: Mapping[str, Scalar]):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.params = {name: _as_fraction(v) for name, v in params.items()}

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.advance()
        if tok[0] != kind:
            raise ExpressionError(
                f"expected {kind!r}, found {tok[1]!r}", tok[2]
            )
        return tok

    def parse(self) -> Poly4:
        p = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionError(f"unexpected {tok[1]!r}", tok[2])
        return p

    def expr(self) -> Poly4:
        p = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> Poly4:
        p = self.factor()
        while self.peek()[0] in ("*", "/"):
            op, _, pos = self.advance()
            q = self.factor()
            if op == "*":
                p = p * q
            else:
                if not q.is_constant():
                    raise ExpressionError(
                        "division requires a constant divisor", pos
                    )
                d = q.constant_value()
                if d == 0:
                    raise ExpressionError("division by zero", pos)
                p = p * (Fraction(1) / d)
        return p

    def factor(self) -> Poly4:
        p = self.base()
        if self.peek()[0] == "^":
            _, _, pos = self.advance()
            tok = self.peek()
            if tok[0] == "-":
                raise ExpressionError("negative exponent is not allowed", tok[2])
            if tok[0] != "int":
                raise ExpressionError(
                    "exponent must be an unsigned integer", tok[2]
                )
            self.advance()
            p = p ** int(tok[1])
        return p

    def base(self) -> Poly4:
        tok = self.advance()
        kind, value, pos = tok
        if kind == "int":
            return Poly4.constant(int(value))
        if kind == "name":
            if value in VAR_NAMES:
                return Poly4.variable(VAR_NAMES.index(value) + 1)
            if value in self.params:
                return Poly4.constant(self.params[value])
            raise ExpressionError(f"unbound parameter {value!r}", pos)
        if kind == "(":
            p = self.expr()
            self.expect(")")
            return p
        if kind == "-":
            return -self.factor()
        raise ExpressionError(f"unexpected {value!r}", pos)


def parse(text: str, params: Mapping[str, Scalar] | None = None) -> Poly4:
    """Parse expression text into a canonical :class:`Poly4`.

    Free parameter names must all be bound in ``params``; their values are
    substituted during parsing, so the result is a concrete polynomial.
    """
    return _Parser(text, params or {}).parse()
