"""Exact values of the form sum_m c_m * sqrt(m) and quotients of them.

Square roots of distinct squarefree integers are linearly independent over Q,
so keying coefficients by the squarefree part gives a canonical form and
exact equality. Floats appear only in ``float()``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from numbers import Rational

from .arith import factorize


@lru_cache(maxsize=1 << 16)
def split_square(n: int) -> tuple[int, int]:
    """``n = a^2 * m`` with ``m`` squarefree; returns ``(a, m)``."""
    if n < 1:
        raise ValueError(f"sqrt of non-positive {n}")
    a, m = 1, 1
    for p, e in factorize(n):
        a *= p ** (e // 2)
        if e % 2:
            m *= p
    return a, m


class SurdSum:
    """Element of Q[sqrt(2), sqrt(3), ...] stored as ``{squarefree m: c_m}``."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms: dict[int, Fraction] = {}
        if terms:
            for m, c in terms.items():
                self._add_term(m, Fraction(c))

    @classmethod
    def sqrt(cls, n: int, coeff=1) -> "SurdSum":
        out = cls()
        out._add_term(n, Fraction(coeff))
        return out

    @classmethod
    def rational(cls, value) -> "SurdSum":
        return cls({1: value})

    def _add_term(self, n: int, c: Fraction) -> None:
        if not c:
            return
        a, m = split_square(n)
        v = self.terms.get(m, 0) + c * a
        if v:
            self.terms[m] = v
        else:
            self.terms.pop(m, None)

    def add_scaled(self, other, k=1) -> "SurdSum":
        """In-place ``self += k * other``; returns self."""
        k = Fraction(k)
        if isinstance(other, SurdSum):
            for m, c in other.terms.items():
                v = self.terms.get(m, 0) + c * k
                if v:
                    self.terms[m] = v
                else:
                    self.terms.pop(m, None)
        else:
            self._add_term(1, Fraction(other) * k)
        return self

    def copy(self) -> "SurdSum":
        out = SurdSum()
        out.terms = dict(self.terms)
        return out

    def is_rational(self) -> bool:
        return all(m == 1 for m in self.terms)

    def as_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError("value is irrational")
        return self.terms.get(1, Fraction(0))

    def __add__(self, other):
        if isinstance(other, (SurdSum, Rational)):
            return self.copy().add_scaled(other)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (SurdSum, Rational)):
            return self.copy().add_scaled(other, -1)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        out = SurdSum()
        out.terms = {m: -c for m, c in self.terms.items()}
        return out

    def __mul__(self, other):
        if isinstance(other, Rational):
            k = Fraction(other)
            out = SurdSum()
            if k:
                out.terms = {m: c * k for m, c in self.terms.items()}
            return out
        if isinstance(other, SurdSum):
            out = SurdSum()
            for m1, c1 in self.terms.items():
                for m2, c2 in other.terms.items():
                    out._add_term(m1 * m2, c1 * c2)
            return out
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Rational):
            return self * (1 / Fraction(other))
        if isinstance(other, SurdSum):
            if other.is_rational():
                return self * (1 / other.as_fraction())
            return SurdQuotient(self, other)
        return NotImplemented

    def __eq__(self, other):
        if isinstance(other, SurdSum):
            return self.terms == other.terms
        if isinstance(other, Rational):
            return self.terms == ({1: Fraction(other)} if other else {})
        if isinstance(other, SurdQuotient):
            return other == self
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    def __float__(self):
        return math.fsum(float(c) * math.sqrt(m) for m, c in sorted(self.terms.items()))

    def __repr__(self):
        if not self.terms:
            return "SurdSum(0)"
        parts = [f"{c}" if m == 1 else f"{c}*sqrt({m})" for m, c in sorted(self.terms.items())]
        return "SurdSum(" + " + ".join(parts) + ")"


class SurdQuotient:
    """``num / den`` with both parts SurdSums and ``den`` nonzero."""

    __slots__ = ("num", "den")

    def __init__(self, num, den):
        self.num = num if isinstance(num, SurdSum) else SurdSum.rational(num)
        self.den = den if isinstance(den, SurdSum) else SurdSum.rational(den)
        if not self.den:
            raise ZeroDivisionError("zero denominator")

    def __add__(self, other):
        if isinstance(other, SurdQuotient):
            if other.den == self.den:
                return SurdQuotient(self.num + other.num, self.den)
            return SurdQuotient(self.num * other.den + other.num * self.den, self.den * other.den)
        if isinstance(other, (SurdSum, Rational)):
            return SurdQuotient(self.num + self.den * other, self.den)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return SurdQuotient(-self.num, self.den)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (SurdSum, Rational)):
            return SurdQuotient(self.num * other, self.den)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Rational):
            return SurdQuotient(self.num, self.den * other)
        return NotImplemented

    def __eq__(self, other):
        if isinstance(other, SurdQuotient):
            return self.num * other.den == other.num * self.den
        if isinstance(other, (SurdSum, Rational)):
            return self.num == self.den * other
        return NotImplemented

    def __hash__(self):
        return hash((self.num, self.den))

    def __float__(self):
        return float(self.num) / float(self.den)

    def __repr__(self):
        return f"SurdQuotient({self.num!r} / {self.den!r})"


def to_float(value) -> float:
    return float(value)


def render(value, digits: int = 12) -> str:
    """Decimal rendering with ``digits`` significant digits."""
    x = float(value)
    if x == 0:
        return "0"
    return format(x, f".{digits}g")
