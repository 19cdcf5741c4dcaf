"""Positive definite binary quadratic forms and Hurwitz class numbers.

Hurwitz class numbers live in (1/12)Z, so they are carried as ``Twelfths``
(the value times 12). Two independent code paths produce them: ``hurwitz``
enumerates reduced forms of one discriminant, ``build_hurwitz_table`` sweeps
every reduced triple up to a bound in a single compiled pass.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, total_ordering
from typing import NamedTuple

import numba
import numpy as np

from .arith import factorize, is_fundamental_discriminant, mobius_sieve
from .errors import DomainError, ResourceError, TableLimitError

MAX_HURWITZ_ENTRIES = 1 << 27

# n-range block for the sieve; keeps the written window in cache
_BLOCK = 1 << 16


class FormTriple(NamedTuple):
    a: int
    b: int
    c: int

    @property
    def discriminant(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    def is_primitive(self) -> bool:
        return math.gcd(math.gcd(self.a, self.b), self.c) == 1

    def __call__(self, x: int, y: int) -> int:
        return self.a * x * x + self.b * x * y + self.c * y * y


@total_ordering
@dataclass(frozen=True)
class Twelfths:
    """Exact rational with denominator dividing 12, stored as ``num12 = 12 * value``."""

    num12: int

    @classmethod
    def from_fraction(cls, value) -> "Twelfths":
        value = Fraction(value) * 12
        if value.denominator != 1:
            raise DomainError(f"{value / 12} is not a multiple of 1/12")
        return cls(int(value))

    def as_fraction(self) -> Fraction:
        return Fraction(self.num12, 12)

    def __add__(self, other):
        if isinstance(other, Twelfths):
            return Twelfths(self.num12 + other.num12)
        if isinstance(other, int):
            return Twelfths(self.num12 + 12 * other)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return Twelfths(-self.num12)

    def __mul__(self, k):
        if isinstance(k, int):
            return Twelfths(self.num12 * k)
        return NotImplemented

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, Twelfths):
            return self.num12 == other.num12
        if isinstance(other, (int, Fraction)):
            return self.as_fraction() == other
        return NotImplemented

    def __lt__(self, other):
        if isinstance(other, Twelfths):
            return self.num12 < other.num12
        return self.as_fraction() < Fraction(other)

    def __hash__(self):
        return hash(self.as_fraction())

    def __float__(self):
        return self.num12 / 12

    def __repr__(self):
        return f"Twelfths({self.as_fraction()})"


def _check_disc(disc: int) -> None:
    if disc >= 0 or disc % 4 not in (0, 1):
        raise DomainError(f"{disc} is not a negative discriminant")


def _form_weight12(a: int, b: int, c: int) -> int:
    # 12 * weight: multiples of x^2+y^2 count 1/2, of x^2+xy+y^2 count 1/3
    if a == c and b == 0:
        return 6
    if a == b == c:
        return 4
    return 12


def reduced_forms(disc: int) -> list[FormTriple]:
    """All reduced triples of discriminant ``disc``, imprimitive ones included."""
    _check_disc(disc)
    n = -disc
    out = []
    a = 1
    while 3 * a * a <= n:
        for b in range(-a + 1, a + 1):
            if (b - disc) % 2:
                continue
            num = b * b + n
            if num % (4 * a):
                continue
            c = num // (4 * a)
            if c < a or (a == c and b < 0):
                continue
            out.append(FormTriple(a, b, c))
        a += 1
    out.sort(key=lambda f: (f.a, f.b))
    return out


@lru_cache(maxsize=1 << 16)
def _hurwitz_num12(disc: int) -> int:
    if disc > 0 or disc % 4 in (2, 3):
        return 0
    if disc == 0:
        return -1
    return sum(_form_weight12(*f) for f in reduced_forms(disc))


def hurwitz(disc: int) -> Twelfths:
    """Hurwitz class number H(disc), by direct enumeration.

    Positive or non-discriminant arguments give 0 and ``H(0) = -1/12``.
    """
    return Twelfths(_hurwitz_num12(disc))


def class_count_weighted(disc: int) -> Twelfths:
    """Weighted count of primitive reduced forms of discriminant ``disc`` (h_w)."""
    _check_disc(disc)
    return Twelfths(sum(_form_weight12(*f) for f in reduced_forms(disc) if f.is_primitive()))


def class_number_fund(D: int) -> tuple[int, int]:
    """``(h_D, u_D)`` for a fundamental discriminant ``-D``."""
    if not is_fundamental_discriminant(-D):
        raise DomainError(f"-{D} is not a fundamental discriminant")
    h = sum(1 for f in reduced_forms(-D) if f.is_primitive())
    u = 3 if D == 3 else 2 if D == 4 else 1
    return h, u


@numba.njit(cache=True, nogil=True)
def _sieve_block(lo, hi, out):
    # out[n - lo] += 12 * (weight of every reduced triple with 4ac - b^2 = n), lo <= n < hi
    amax = int(math.sqrt((hi - 1) / 3.0)) + 1
    for a in range(1, amax + 1):
        a4 = 4 * a
        for b in range(0, a + 1):
            bb = b * b
            if 4 * a * a - bb >= hi:
                continue
            c = a
            cl = (lo + bb + a4 - 1) // a4
            if cl > c:
                c = cl
            n = a4 * c - bb
            if b == 0:
                w_diag, w = 6, 12
            elif b == a:
                w_diag, w = 4, 12
            else:
                w_diag, w = 12, 24
            if c == a and n < hi:
                out[n - lo] += w_diag
                n += a4
            while n < hi:
                out[n - lo] += w
                n += a4


@numba.njit(cache=True, nogil=True)
def _sieve_span(lo, hi, out, block):
    # fills out[0 : hi - lo] for n in [lo, hi)
    start = lo
    while start < hi:
        stop = min(hi, start + block)
        _sieve_block(start, stop, out[start - lo : stop - lo])
        start = stop


@dataclass(frozen=True, eq=False)
class HurwitzTable:
    """``values[n] = 12 * H(-n)`` for ``0 <= n <= limit``."""

    limit: int
    values: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, HurwitzTable):
            return NotImplemented
        return self.limit == other.limit and np.array_equal(self.values, other.values)

    def covers(self, disc: int) -> bool:
        return disc > 0 or -disc <= self.limit

    def num12(self, disc: int) -> int:
        if disc > 0:
            return 0
        if -disc > self.limit:
            raise TableLimitError("hurwitz", -disc, self.limit)
        return int(self.values[-disc])

    def __getitem__(self, disc: int) -> Twelfths:
        return Twelfths(self.num12(disc))

    def num12_array(self, discs: np.ndarray) -> np.ndarray:
        """Vectorised ``num12`` over an integer array of discriminants."""
        discs = np.asarray(discs, dtype=np.int64)
        out = np.zeros(discs.shape, dtype=np.int64)
        neg = discs <= 0
        if neg.any():
            n = -discs[neg]
            if n.max() > self.limit:
                raise TableLimitError("hurwitz", int(n.max()), self.limit)
            out[neg] = self.values[n]
        return out


def build_hurwitz_table(limit: int, threads: int = 1, max_entries: int = MAX_HURWITZ_ENTRIES) -> HurwitzTable:
    if limit < 4:
        raise DomainError("hurwitz table limit must be >= 4")
    if limit + 1 > max_entries:
        raise ResourceError(f"hurwitz table limit {limit} exceeds budget of {max_entries} entries")
    values = np.zeros(limit + 1, dtype=np.int64)
    values[0] = -1
    if threads <= 1:
        _sieve_span(1, limit + 1, values[1:], _BLOCK)
    else:
        # disjoint output slices per task; the result is independent of scheduling
        edges = np.linspace(1, limit + 1, 4 * threads + 1).astype(np.int64)
        spans = [(int(lo), int(hi)) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda s: _sieve_span(s[0], s[1], values[s[0] : s[1]], _BLOCK), spans))
    values.flags.writeable = False
    return HurwitzTable(limit, values)


def weighted_class_counts(table: HurwitzTable, disc: int) -> dict[int, int]:
    """``{f: 12 * h_w(disc / f^2)}`` over all conductors ``f`` of ``disc``.

    Obtained from the table by Moebius inversion of ``H(d) = sum_f h_w(d / f^2)``.
    """
    _check_disc(disc)
    n = -disc
    conductors = _conductors(n)
    out = {}
    for f in conductors:
        total = 0
        for g in conductors:
            if g % f == 0:
                mu = _mu_small(g // f)
                if mu:
                    total += mu * table.num12(-(n // (g * g)))
        out[f] = total
    return out


def _conductors(n: int) -> list[int]:
    # f with f^2 | n and -n/f^2 a discriminant
    out = []
    f = 1
    while f * f <= n:
        if n % (f * f) == 0 and (-(n // (f * f))) % 4 in (0, 1):
            out.append(f)
        f += 1
    return out


_MU_CACHE = mobius_sieve(4096)


def _mu_small(n: int) -> int:
    if n < len(_MU_CACHE):
        return int(_MU_CACHE[n])
    fac = factorize(n)
    if any(e > 1 for _, e in fac):
        return 0
    return -1 if len(fac) % 2 else 1
