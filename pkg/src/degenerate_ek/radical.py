"""Exact arithmetic in Q(q^(1/nu)) for a positive rational q.

The generator ``c`` is the positive real root of ``c^nu = q``.  The ring
Q[c]/(c^nu - q) is reduced to the field Q[c]/(c^n - r) where q = r^(nu/n)
with n as small as possible; x^n - r is then irreducible over Q, so every
nonzero element is invertible and equality is coefficient equality.
"""

from __future__ import annotations

from fractions import Fraction
from functools import cached_property

from .exact_linalg import solve


def _iroot(value: int, k: int):
    """Exact integer k-th root of a nonnegative int, or None."""
    if value < 0:
        return None
    if value in (0, 1):
        return value
    guess = int(round(value ** (1.0 / k))) if value.bit_length() < 1000 else 1 << (value.bit_length() // k)
    # Newton iteration from above, then local correction
    x = max(guess, 1)
    while True:
        y = ((k - 1) * x + value // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    for cand in (x - 1, x, x + 1, guess):
        if cand >= 0 and cand ** k == value:
            return cand
    return None


def exact_rational_root(q: Fraction, k: int):
    """r with r^k = q and r > 0, or None if q is not a k-th power in Q."""
    q = Fraction(q)
    if q <= 0:
        return None
    num = _iroot(q.numerator, k)
    den = _iroot(q.denominator, k)
    if num is None or den is None:
        return None
    return Fraction(num, den)


class RadicalField:
    """Q(c) with c the positive root of c^nu = q."""

    def __init__(self, nu: int, q):
        q = Fraction(q)
        if nu < 1:
            raise ValueError("nu must be positive")
        if q <= 0:
            raise ValueError("the radicand must be positive")
        self.nu = nu
        self.q = q
        # largest g | nu with q a rational g-th power
        best_g, best_r = 1, q
        for g in range(nu, 0, -1):
            if nu % g == 0:
                r = exact_rational_root(q, g)
                if r is not None:
                    best_g, best_r = g, r
                    break
        self.degree = nu // best_g
        self.base = best_r

    def __eq__(self, other):
        return isinstance(other, RadicalField) and (self.degree, self.base) == (other.degree, other.base)

    def __hash__(self):
        return hash((self.degree, self.base))

    def __repr__(self):
        return f"RadicalField(c^{self.nu} = {self.q}; reduced c^{self.degree} = {self.base})"

    def describe(self):
        if self.degree == 1:
            return f"c = {self.base}"
        return f"c^{self.degree} = {self.base}"

    def element(self, coeffs):
        coeffs = [Fraction(v) for v in coeffs]
        if len(coeffs) > self.degree:
            raise ValueError("too many coefficients for this field")
        coeffs += [Fraction(0)] * (self.degree - len(coeffs))
        return RadicalNumber(self, tuple(coeffs))

    def __call__(self, value):
        if isinstance(value, RadicalNumber):
            if value.field != self:
                raise ValueError("element belongs to a different field")
            return value
        return self.element([value])

    @cached_property
    def zero(self):
        return self.element([0])

    @cached_property
    def one(self):
        return self.element([1])

    @cached_property
    def generator(self):
        """The element c (the chosen root of c^nu = q)."""
        if self.degree == 1:
            return self.element([self.base])
        return self.element([0, 1])

    def generator_float(self):
        return float(self.base) ** (1.0 / self.degree)


class RadicalNumber:
    """Element a_0 + a_1 c + ... + a_{n-1} c^{n-1} of a RadicalField."""

    __slots__ = ("field", "coeffs")

    def __init__(self, field: RadicalField, coeffs: tuple):
        self.field = field
        self.coeffs = coeffs

    def _lift(self, other):
        if isinstance(other, RadicalNumber):
            if other.field != self.field:
                raise ValueError("mixing elements of different fields")
            return other
        if isinstance(other, (int, Fraction)):
            return self.field.element([other])
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return RadicalNumber(self.field, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return RadicalNumber(self.field, tuple(-a for a in self.coeffs))

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return RadicalNumber(self.field, tuple(a * other for a in self.coeffs))
        other = self._lift(other)
        if other is NotImplemented:
            return other
        n = self.field.degree
        prod = [Fraction(0)] * (2 * n - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    if b:
                        prod[i + j] += a * b
        base = self.field.base
        for k in range(2 * n - 2, n - 1, -1):
            if prod[k]:
                prod[k - n] += base * prod[k]
        return RadicalNumber(self.field, tuple(prod[:n]))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        result = self.field.one
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def inverse(self):
        if not self:
            raise ZeroDivisionError("inverse of zero")
        n = self.field.degree
        # columns: self * c^i
        cols = []
        g = self.field.element([0, 1]) if n > 1 else None
        cur = self
        for i in range(n):
            cols.append(cur.coeffs)
            if g is not None:
                cur = cur * g
        matrix = [[cols[j][i] for j in range(n)] for i in range(n)]
        rhs = [Fraction(1)] + [Fraction(0)] * (n - 1)
        x, _, _ = solve(matrix, rhs)
        return RadicalNumber(self.field, tuple(x))

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return RadicalNumber(self.field, tuple(a / other for a in self.coeffs))
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return other * self.inverse()

    def __bool__(self):
        return any(self.coeffs)

    def __eq__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return False
        return self.coeffs == other.coeffs

    def __hash__(self):
        if not any(self.coeffs[1:]):
            return hash(self.coeffs[0])
        return hash((self.field, self.coeffs))

    def is_rational(self):
        return not any(self.coeffs[1:])

    def rational(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self} is not rational")
        return self.coeffs[0]

    def __float__(self):
        g = self.field.generator_float()
        return float(sum(float(a) * g ** k for k, a in enumerate(self.coeffs)))

    def __str__(self):
        parts = []
        for k, a in enumerate(self.coeffs):
            if not a:
                continue
            text = str(a.numerator) if a.denominator == 1 else f"{a.numerator}/{a.denominator}"
            if k == 1:
                text += "·c"
            elif k > 1:
                text += f"·c^{k}"
            parts.append(text)
        return " + ".join(parts).replace("+ -", "- ") if parts else "0"

    def __repr__(self):
        return f"RadicalNumber({self}; {self.field.describe()})"
