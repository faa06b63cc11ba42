"""Sparse multivariate polynomials with exact coefficients.

A polynomial is a map from exponent tuples to coefficients.  Coefficients are
``fractions.Fraction`` by default, but any exact field-like type with ``+``,
``*``, unary ``-`` and truthiness (zero is falsy) works; the eikonal solver
uses this with algebraic-number coefficients.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParseError


def _graded_lex_key(exp):
    return (sum(exp), tuple(-e for e in exp))


class Poly:
    """Immutable polynomial in ``nvars`` variables."""

    __slots__ = ("nvars", "terms", "_zero")

    def __init__(self, nvars: int, terms: Mapping[tuple, object] | None = None, zero=Fraction(0)):
        self.nvars = nvars
        self._zero = zero
        clean = {}
        for exp, c in (terms or {}).items():
            if len(exp) != nvars:
                raise ValueError(f"exponent {exp} does not have {nvars} entries")
            if c:
                clean[tuple(int(e) for e in exp)] = c
        self.terms = clean

    # construction helpers
    @classmethod
    def constant(cls, nvars, value, zero=Fraction(0)):
        return cls(nvars, {(0,) * nvars: value}, zero=zero)

    @classmethod
    def variable(cls, nvars, i, one=Fraction(1), zero=Fraction(0)):
        exp = [0] * nvars
        exp[i] = 1
        return cls(nvars, {tuple(exp): one}, zero=zero)

    @classmethod
    def monomial(cls, exp, coeff=Fraction(1), zero=Fraction(0)):
        return cls(len(exp), {tuple(exp): coeff}, zero=zero)

    def _new(self, terms):
        return Poly(self.nvars, terms, zero=self._zero)

    def _coerce(self, other):
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError(f"variable count mismatch: {self.nvars} vs {other.nvars}")
            return other
        return Poly.constant(self.nvars, other, zero=self._zero)

    # arithmetic
    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out[e] + c if e in out else c
        return self._new(out)

    __radd__ = __add__

    def __neg__(self):
        return self._new({e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def mul(self, other, max_degree: int | None = None):
        other = self._coerce(other)
        out = {}
        for e1, c1 in self.terms.items():
            d1 = sum(e1)
            for e2, c2 in other.terms.items():
                if max_degree is not None and d1 + sum(e2) > max_degree:
                    continue
                e = tuple(a + b for a, b in zip(e1, e2))
                p = c1 * c2
                out[e] = out[e] + p if e in out else p
        return self._new(out)

    def __mul__(self, other):
        if isinstance(other, Poly):
            return self.mul(other)
        return self._new({e: c * other for e, c in self.terms.items()})

    def __rmul__(self, other):
        return self * other

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        result = Poly.constant(self.nvars, Fraction(1) if isinstance(self._zero, Fraction) else self._one(), zero=self._zero)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def _one(self):
        for c in self.terms.values():
            return c * 0 + 1
        return Fraction(1)

    def power(self, k: int, max_degree: int | None = None):
        result = None
        for _ in range(k):
            result = self if result is None else result.mul(self, max_degree)
        if result is None:
            return Poly.constant(self.nvars, self._one(), zero=self._zero)
        return result.truncate(max_degree) if max_degree is not None else result

    def __eq__(self, other):
        if not isinstance(other, Poly):
            other = self._coerce(other)
        return self.nvars == other.nvars and (self - other).is_zero()

    def __hash__(self):
        return hash((self.nvars, tuple(sorted(self.terms.items(), key=lambda kv: kv[0]))))

    def is_zero(self):
        return not self.terms

    # structure
    def degree(self):
        return max((sum(e) for e in self.terms), default=-1)

    def lowest_degree(self):
        return min((sum(e) for e in self.terms), default=None)

    def homogeneous_part(self, k: int):
        return self._new({e: c for e, c in self.terms.items() if sum(e) == k})

    def truncate(self, max_degree: int):
        return self._new({e: c for e, c in self.terms.items() if sum(e) <= max_degree})

    def coefficient(self, exp):
        return self.terms.get(tuple(exp), self._zero)

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: _graded_lex_key(kv[0]))

    def diff(self, i: int):
        out = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            ne = list(e)
            ne[i] -= 1
            out[tuple(ne)] = c * e[i]
        return self._new(out)

    def gradient(self):
        return [self.diff(i) for i in range(self.nvars)]

    def map_coefficients(self, f, zero=None):
        return Poly(self.nvars, {e: f(c) for e, c in self.terms.items()},
                    zero=self._zero if zero is None else zero)

    # evaluation
    def __call__(self, point: Sequence):
        if len(point) != self.nvars:
            raise ValueError("point has wrong dimension")
        total = self._zero
        for e, c in self.terms.items():
            term = c
            for xi, k in zip(point, e):
                if k:
                    term = term * xi ** k
            total = total + term
        return total

    def evaluate_array(self, *coords):
        """Float evaluation on numpy arrays (broadcast together)."""
        if len(coords) != self.nvars:
            raise ValueError("wrong number of coordinate arrays")
        arrays = [np.asarray(c, dtype=float) for c in coords]
        shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
        out = np.zeros(shape)
        powers = [dict() for _ in arrays]
        for e, c in self.terms.items():
            term = np.full(shape, float(c))
            for i, k in enumerate(e):
                if k:
                    if k not in powers[i]:
                        powers[i][k] = arrays[i] ** k
                    term = term * powers[i][k]
            out = out + term
        return out

    def compose(self, inner: Sequence["Poly"], max_degree: int | None = None):
        """Return ``self(inner_1, ..., inner_n)``.

        With ``max_degree`` set, every inner polynomial must have zero constant
        term so that truncation is consistent.
        """
        if len(inner) != self.nvars:
            raise ValueError("compose needs one inner polynomial per variable")
        m = inner[0].nvars
        if any(p.nvars != m for p in inner):
            raise ValueError("inner polynomials disagree on variable count")
        if max_degree is not None:
            for p in inner:
                if p.coefficient((0,) * m):
                    raise ValueError("compose with truncation needs inner maps without constant term")
        one = self._one()
        cache = [dict() for _ in inner]

        def pw(i, k):
            if k not in cache[i]:
                if k == 0:
                    cache[i][k] = Poly.constant(m, one, zero=self._zero)
                else:
                    cache[i][k] = pw(i, k - 1).mul(inner[i], max_degree)
            return cache[i][k]

        total = Poly(m, {}, zero=self._zero)
        for e, c in self.terms.items():
            term = Poly.constant(m, c, zero=self._zero)
            for i, k in enumerate(e):
                if k:
                    term = term.mul(pw(i, k), max_degree)
            total = total + term
        return total

    def shift(self, center: Sequence):
        """Return ``y -> self(center + y)``."""
        n = self.nvars
        inner = [Poly.constant(n, center[i], zero=self._zero) + Poly.variable(n, i, zero=self._zero)
                 for i in range(n)]
        return self.compose(inner)

    def __repr__(self):
        return f"Poly({format_poly(self)!r})"

    def __str__(self):
        return format_poly(self)


def format_fraction(q) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def format_poly(p: Poly, names: Sequence[str] | None = None) -> str:
    if p.is_zero():
        return "0"
    names = names or [f"x{i + 1}" for i in range(p.nvars)]
    parts = []
    for e, c in p.sorted_terms():
        factors = []
        for name, k in zip(names, e):
            if k == 1:
                factors.append(name)
            elif k > 1:
                factors.append(f"{name}^{k}")
        coeff = format_fraction(c) if isinstance(c, (Fraction, int)) else f"({c})"
        if factors:
            if coeff == "1":
                parts.append("*".join(factors))
            elif coeff == "-1":
                parts.append("-" + "*".join(factors))
            else:
                parts.append(coeff + "*" + "*".join(factors))
        else:
            parts.append(coeff)
    out = " + ".join(parts)
    return out.replace("+ -", "- ")


# parsing

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<var>x(?P<idx>\d+))|(?P<op>[-+*/^()]))")


class _Parser:
    def __init__(self, text, nvars, line=None, aliases=None):
        self.text = text
        self.nvars = nvars
        self.line = line
        self.aliases = aliases or {}
        self.tokens = []
        pos = 0
        src = text
        for name, idx in self.aliases.items():
            src = re.sub(rf"\b{name}\b", f"x{idx + 1}", src)
        self.src = src
        while pos < len(src):
            if src[pos:].strip() == "":
                break
            m = _TOKEN.match(src, pos)
            if not m or m.end() == pos:
                raise ParseError(f"unexpected character {src[pos:].strip()[:1]!r}", line, pos + 1)
            col = m.start() + len(m.group(0)) - len(m.group(0).lstrip()) + 1
            if m.group("num"):
                self.tokens.append(("num", int(m.group("num")), col))
            elif m.group("var"):
                self.tokens.append(("var", int(m.group("idx")), col))
            else:
                self.tokens.append(("op", m.group("op"), col))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, len(self.src) + 1)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def error(self, message):
        _, _, col = self.peek()
        raise ParseError(message, self.line, col)

    def parse(self):
        if not self.tokens:
            self.error("empty expression")
        p = self.expr()
        if self.i != len(self.tokens):
            self.error(f"unexpected token {self.peek()[1]!r}")
        return p

    def expr(self):
        p = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self):
        p = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            p = p * self.factor()
        return p

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            f = self.factor()
            return f if val == "+" else -f
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            kind, val, _ = self.peek()
            if kind != "num":
                self.error("exponent must be a nonnegative integer")
            self.take()
            base = base ** val
        return base

    def atom(self):
        kind, val, _ = self.peek()
        if kind == "num":
            self.take()
            q = Fraction(val)
            if self.peek()[0] == "op" and self.peek()[1] == "/":
                self.take()
                kind2, den, _ = self.peek()
                if kind2 != "num":
                    self.error("denominator must be an integer")
                if den == 0:
                    self.error("zero denominator")
                self.take()
                q = Fraction(val, den)
            return Poly.constant(self.nvars, q)
        if kind == "var":
            self.take()
            if not 1 <= val <= self.nvars:
                self.error(f"variable x{val} outside x1..x{self.nvars}")
            return Poly.variable(self.nvars, val - 1)
        if kind == "op" and val == "(":
            self.take()
            p = self.expr()
            if self.peek()[1] != ")":
                self.error("missing closing parenthesis")
            self.take()
            return p
        if kind is None:
            self.error("unexpected end of expression")
        self.error(f"unexpected token {val!r}")


def parse_poly(text: str, nvars: int, line: int | None = None, aliases=None) -> Poly:
    """Parse a polynomial in ``x1..x<nvars>`` with rational literals ``a/b``.

    ``aliases`` maps extra variable names (``x``, ``y``, ``z``) to indices.
    """
    return _Parser(text, nvars, line, aliases).parse()


def parse_rational(token: str, line: int | None = None) -> Fraction:
    try:
        return Fraction(token.strip())
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"not a rational number: {token!r}", line) from None


def jacobian(polys: Sequence[Poly]):
    return [[p.diff(j) for j in range(p.nvars)] for p in polys]


def rational_matrix_at_zero(polys: Sequence[Poly]):
    """Linear part of a polynomial map as a list of rows of Fractions."""
    n = polys[0].nvars
    rows = []
    for p in polys:
        row = []
        for j in range(n):
            e = [0] * n
            e[j] = 1
            row.append(p.coefficient(tuple(e)))
        rows.append(row)
    return rows


def identity_map(nvars: int) -> tuple[Poly, ...]:
    return tuple(Poly.variable(nvars, i) for i in range(nvars))


def monomials_of_degree(nvars: int, k: int) -> list[tuple]:
    """Exponent tuples of total degree ``k`` in graded-lex order."""
    if nvars == 0:
        return [()] if k == 0 else []
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(tuple(prefix + [remaining]))
            return
        for a in range(remaining, -1, -1):
            rec(prefix + [a], remaining - a, slots - 1)

    rec([], k, nvars)
    return out


def from_terms(nvars: int, items: Iterable[tuple[Sequence[int], object]]) -> Poly:
    return Poly(nvars, {tuple(e): c for e, c in items})
