from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from murmur.arith import is_fundamental_discriminant, primes_up_to
from murmur.errors import DomainError, ResourceError, TableLimitError
from murmur.quadforms import (
    FormTriple,
    Twelfths,
    build_hurwitz_table,
    class_count_weighted,
    class_number_fund,
    hurwitz,
    reduced_forms,
    weighted_class_counts,
)


def brute_forms(disc):
    """Reduced triples by scanning every (a, b, c) box with |b| <= a <= c."""
    n = -disc
    out = []
    for a in range(1, n + 1):
        for b in range(-a, a + 1):
            num = b * b + n
            if num % (4 * a):
                continue
            c = num // (4 * a)
            if c < a:
                continue
            if (b < 0) and (-b == a or a == c):
                continue
            out.append((a, b, c))
    return sorted(out)


@pytest.mark.parametrize(
    "disc,expected",
    [
        (-3, [(1, 1, 1)]),
        (-23, [(1, 1, 6), (2, -1, 3), (2, 1, 3)]),
        (-44, [(1, 0, 11), (2, 2, 6), (3, -2, 4), (3, 2, 4)]),
    ],
)
def test_reduced_forms_examples(disc, expected):
    assert [tuple(f) for f in reduced_forms(disc)] == expected


def test_reduced_forms_against_brute_force():
    for n in range(3, 800):
        if (-n) % 4 in (0, 1):
            assert [tuple(f) for f in reduced_forms(-n)] == brute_forms(-n), n


def test_reduced_forms_invariants():
    for n in range(3, 2000, 7):
        if (-n) % 4 not in (0, 1):
            continue
        for f in reduced_forms(-n):
            assert f.discriminant == -n
            assert abs(f.b) <= f.a <= f.c
            if abs(f.b) == f.a or f.a == f.c:
                assert f.b >= 0


def test_reduced_forms_rejects_non_discriminant():
    with pytest.raises(DomainError):
        reduced_forms(-5)


def test_form_triple_helpers():
    f = FormTriple(2, 2, 6)
    assert not f.is_primitive() and f(1, 1) == 10 and f.discriminant == -44


@pytest.mark.parametrize(
    "disc,value",
    [(-3, Fraction(1, 3)), (-4, Fraction(1, 2)), (0, Fraction(-1, 12)), (5, 0), (-88, 2), (-120, 4), (-44, 4), (-7, 1)],
)
def test_hurwitz_examples(disc, value):
    assert hurwitz(disc).as_fraction() == value


def test_hurwitz_non_discriminants_vanish():
    for n in range(1, 200):
        if (-n) % 4 in (2, 3):
            assert hurwitz(-n) == 0


def test_twelfths_arithmetic():
    a, b = Twelfths(4), Twelfths.from_fraction(Fraction(1, 2))
    assert a + b == Fraction(5, 6)
    assert (a * 3).as_fraction() == 1
    assert -a == Fraction(-1, 3) and a - b == Fraction(-1, 6)
    assert a < b and float(b) == 0.5
    with pytest.raises(DomainError):
        Twelfths.from_fraction(Fraction(1, 5))


def test_kronecker_hurwitz_identity_small():
    # p = 2: H(-8) + 2 H(-7) + 2 H(-4)
    assert hurwitz(-8) + hurwitz(-7) * 2 + hurwitz(-4) * 2 == 4


def test_table_examples():
    t = build_hurwitz_table(200)
    assert t[-104] == 6 and t[-7] == 1
    assert t.values[0] == -1


def test_table_matches_on_demand():
    t = build_hurwitz_table(6000)
    for n in range(0, 6001):
        assert t.num12(-n) == hurwitz(-n).num12, n


def test_table_threaded_matches_serial():
    a = build_hurwitz_table(50_000)
    b = build_hurwitz_table(50_000, threads=3)
    assert a == b


def test_table_invariants(hurwitz_table):
    v = hurwitz_table.values
    n = np.arange(len(v))
    assert np.all(v[(n % 4 == 1) | (n % 4 == 2)] == 0)
    assert v[0] == -1
    valid = (n >= 3) & ((n % 4 == 0) | (n % 4 == 3))
    assert np.all(v[valid] >= 4)


def test_table_limits():
    t = build_hurwitz_table(100)
    with pytest.raises(TableLimitError):
        t.num12(-101)
    with pytest.raises(TableLimitError):
        t.num12_array(np.array([-5, -200]))
    assert t.num12(7) == 0
    assert list(t.num12_array(np.array([3, 0, -3, -4]))) == [0, -1, 4, 6]
    with pytest.raises(ResourceError):
        build_hurwitz_table(1000, max_entries=10)
    with pytest.raises(DomainError):
        build_hurwitz_table(3)


def test_table_read_only(hurwitz_table):
    with pytest.raises(ValueError):
        hurwitz_table.values[3] = 0


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([int(p) for p in primes_up_to(2000)]))
def test_kronecker_hurwitz_property(p):
    total = Twelfths(0)
    s = 0
    while s * s <= 4 * p:
        term = hurwitz(s * s - 4 * p)
        total = total + (term if s == 0 else term * 2)
        s += 1
    assert total == 2 * p


def test_hurwitz_decomposition_over_conductors(hurwitz_table):
    for n in range(3, 5001):
        disc = -n
        if disc % 4 not in (0, 1):
            continue
        total = 0
        f = 1
        while f * f <= n:
            if n % (f * f) == 0 and (disc // (f * f)) % 4 in (0, 1):
                d = disc // (f * f)
                if is_fundamental_discriminant(d):
                    h, u = class_number_fund(-d)
                    # forms of the maximal order carry weight 1/u
                    total += 12 * h // u
                else:
                    total += class_count_weighted(d).num12
            f += 1
        assert total == hurwitz_table.num12(disc), n


def test_weighted_class_counts_match_enumeration(hurwitz_table):
    for n in range(3, 3000, 5):
        if (-n) % 4 not in (0, 1):
            continue
        counts = weighted_class_counts(hurwitz_table, -n)
        for f, value in counts.items():
            assert value == class_count_weighted(-n // (f * f)).num12


@pytest.mark.parametrize("D,expected", [(3, (1, 3)), (23, (3, 1)), (4, (1, 2))])
def test_class_number_fund(D, expected):
    assert class_number_fund(D) == expected


def test_class_number_fund_rejects_non_fundamental():
    with pytest.raises(DomainError):
        class_number_fund(12)
