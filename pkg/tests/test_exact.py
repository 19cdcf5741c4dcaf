import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from murmur.exact import SurdQuotient, SurdSum, render, split_square

fractions = st.fractions(min_value=-50, max_value=50, max_denominator=30)
radicands = st.integers(1, 400)
surds = st.dictionaries(radicands, fractions, max_size=5).map(
    lambda d: sum((SurdSum.sqrt(n, c) for n, c in d.items()), SurdSum())
)


def test_split_square():
    assert split_square(72) == (6, 2)
    assert split_square(1) == (1, 1)
    assert split_square(30) == (1, 30)


def test_canonical_form():
    assert SurdSum.sqrt(8) == SurdSum.sqrt(2, 2)
    assert SurdSum.sqrt(9) == 3
    assert SurdSum.sqrt(2) - SurdSum.sqrt(2) == 0
    assert not (SurdSum.sqrt(2) - SurdSum.sqrt(2))
    assert SurdSum.sqrt(2) * SurdSum.sqrt(6) == SurdSum.sqrt(3, 2)


@settings(max_examples=150)
@given(surds, surds, fractions)
def test_ring_laws_and_float(a, b, k):
    assert a + b == b + a
    assert (a + b) * k == a * k + b * k
    assert math.isclose(float(a * b), float(a) * float(b), rel_tol=1e-9, abs_tol=1e-6)
    assert math.isclose(float(a + b), float(a) + float(b), rel_tol=1e-9, abs_tol=1e-9)


@settings(max_examples=100)
@given(surds, surds)
def test_quotients(a, b):
    if not b:
        with pytest.raises(ZeroDivisionError):
            SurdQuotient(a, b)
        return
    q = a / b
    if b.is_rational():
        assert isinstance(q, SurdSum)
    else:
        assert isinstance(q, SurdQuotient)
        assert q * b == a
    assert math.isclose(float(q), float(a) / float(b), rel_tol=1e-9, abs_tol=1e-9)


def test_quotient_sum_same_denominator():
    den = SurdSum.sqrt(2) + SurdSum.sqrt(3)
    q = SurdQuotient(Fraction(1), den) + SurdQuotient(Fraction(2), den)
    assert q.den == den and q == SurdQuotient(3, den)
    assert (q / 3) == SurdQuotient(1, den)


def test_add_scaled_in_place():
    a = SurdSum.sqrt(5)
    out = a.add_scaled(SurdSum.sqrt(20), Fraction(-1, 2))
    assert out is a and a == 0


def test_as_fraction():
    assert SurdSum.rational(Fraction(3, 4)).as_fraction() == Fraction(3, 4)
    with pytest.raises(ValueError):
        SurdSum.sqrt(2).as_fraction()


@pytest.mark.parametrize(
    "value,text",
    [
        (SurdSum.sqrt(10, Fraction(-1, 10)), "-0.316227766017"),
        (Fraction(-5, 4), "-1.25"),
        (0, "0"),
        (Fraction(1, 3), "0.333333333333"),
        (10**15, "1e+15"),
    ],
)
def test_render(value, text):
    assert render(value) == text
