import math

import numpy as np
import pytest
import sympy
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from sympy.functions.combinatorial.numbers import kronecker_symbol

from murmur.arith import (
    DiscriminantClass,
    XiPolicy,
    build_factor_table,
    check_int128,
    classify_discriminant,
    divisor_count,
    divisors,
    euler_phi,
    factorize,
    ideal_count,
    is_fundamental_discriminant,
    is_squarefree,
    kronecker,
    mertens,
    mobius,
    mobius_sieve,
    primes_up_to,
    sigma_coprime,
    squarefree_in_range,
    xi,
)
from murmur.errors import DomainError, ResourceError, UnresolvedXiBranch


# ---------------------------------------------------------------- factor table


def test_factor_table_small():
    t = build_factor_table(10)
    assert t.spf[9] == 3 and t.spf[7] == 7 and t.spf[10] == 2


def test_factor_table_large_prime(factor_table):
    assert sympy.isprime(999983)
    t = build_factor_table(1_000_000)
    assert t.spf[999983] == 999983


def test_factor_table_invariants(factor_table):
    spf = factor_table.spf
    n = np.arange(2, factor_table.limit + 1)
    assert np.all(n % spf[2:] == 0)
    primes = set(primes_up_to(factor_table.limit).tolist())
    sample = range(2, 5000)
    for k in sample:
        assert int(spf[k]) in primes
        assert (spf[k] == k) == (k in primes)


def test_factor_table_budget():
    with pytest.raises(ResourceError):
        build_factor_table(1000, max_entries=100)
    with pytest.raises(DomainError):
        build_factor_table(1)


def test_factor_table_read_only(factor_table):
    with pytest.raises(ValueError):
        factor_table.spf[5] = 1


@settings(max_examples=200)
@given(st.integers(1, 1_000_000))
def test_factorize_matches_sympy(n):
    t = build_factor_table_cached()
    expected = tuple(sorted(sympy.factorint(n).items()))
    assert factorize(n, t) == expected
    assert factorize(n) == expected
    assert math.prod(p**e for p, e in expected) == n


_TABLE = {}


def build_factor_table_cached():
    if "t" not in _TABLE:
        _TABLE["t"] = build_factor_table(1_000_000)
    return _TABLE["t"]


# ---------------------------------------------------------------- mobius, mertens


@pytest.mark.parametrize("n,expected", [(1, 1), (12, 0), (30, -1)])
def test_mobius_examples(factor_table, n, expected):
    assert mobius(n, factor_table) == expected


def test_mobius_zero_is_domain_error(factor_table):
    with pytest.raises(DomainError):
        mobius(0, factor_table)


def test_mobius_sieve_matches_sympy():
    mu = mobius_sieve(3000)
    assert mu[0] == 0
    for n in range(1, 3001):
        assert mu[n] == sympy.mobius(n)


@pytest.mark.parametrize("X,expected", [(1, 1), (2, 0), (10, -1)])
def test_mertens_examples(X, expected):
    assert mertens(X) == expected


def test_mertens_matches_table_sum(factor_table):
    mu = [mobius(n, factor_table) for n in range(1, 100_001)]
    running = np.cumsum(mu)
    for X in (1, 7, 100, 1000, 54321, 100_000):
        assert mertens(X) == running[X - 1]


# ---------------------------------------------------------------- kronecker


@pytest.mark.parametrize("a,n,expected", [(-4, 11, -1), (5, 1, 1), (-15, 2, 1), (6, 3, 0)])
def test_kronecker_examples(a, n, expected):
    assert kronecker(a, n) == expected


def test_kronecker_zero_zero():
    with pytest.raises(DomainError):
        kronecker(0, 0)


def test_kronecker_edge_conventions():
    assert kronecker(1, 0) == 1 and kronecker(-1, 0) == 1 and kronecker(2, 0) == 0
    assert kronecker(-3, -1) == -1 and kronecker(3, -1) == 1


@settings(max_examples=300)
@given(st.integers(-10_000, 10_000), st.integers(-2000, 2000))
def test_kronecker_matches_sympy(a, n):
    assume(n != 0)
    # sympy's symbol only accepts n >= 0; handle sign of n per the standard extension
    expected = kronecker_symbol(a, abs(n))
    if n < 0 and a < 0:
        expected = -expected
    assert kronecker(a, n) == expected


def test_kronecker_euler_criterion_and_reciprocity():
    for p in primes_up_to(500)[1:]:
        p = int(p)
        residues = {x * x % p for x in range(1, p)}
        for a in range(1, p):
            assert kronecker(a, p) == (1 if a in residues else -1)
        for q in primes_up_to(200)[1:]:
            q = int(q)
            if q != p:
                sign = -1 if (p % 4 == 3 and q % 4 == 3) else 1
                assert kronecker(p, q) * kronecker(q, p) == sign


@settings(max_examples=200)
@given(st.integers(-500, 500), st.integers(-500, 500), st.integers(1, 500))
def test_kronecker_multiplicative_top(a, b, n):
    assert kronecker(a * b, n) == kronecker(a, n) * kronecker(b, n)


@settings(max_examples=200)
@given(st.integers(-500, 500), st.integers(1, 500), st.integers(1, 500))
def test_kronecker_multiplicative_bottom(a, m, n):
    assert kronecker(a, m * n) == kronecker(a, m) * kronecker(a, n)


# ---------------------------------------------------------------- simple multiplicative functions


@pytest.mark.parametrize("n,expected", [(1, 1), (12, 4), (97, 96)])
def test_euler_phi_examples(factor_table, n, expected):
    assert euler_phi(n, factor_table) == expected


@pytest.mark.parametrize("n,expected", [(1, 1), (12, 6), (49, 3)])
def test_divisor_count_examples(n, expected):
    assert divisor_count(n) == expected


@pytest.mark.parametrize("n,N,expected", [(1, 11, 1), (2, 11, 3), (4, 2, 1)])
def test_sigma_coprime_examples(n, N, expected):
    assert sigma_coprime(n, N) == expected


@pytest.mark.parametrize("n,expected", [(1, True), (18, False), (2431, True)])
def test_is_squarefree_examples(factor_table, n, expected):
    assert is_squarefree(n, factor_table) is expected


@settings(max_examples=150)
@given(st.integers(1, 1000), st.integers(1, 1000))
def test_multiplicativity(m, n):
    assume(math.gcd(m, n) == 1)
    t = build_factor_table_cached()
    assert mobius(m * n, t) == mobius(m, t) * mobius(n, t)
    assert euler_phi(m * n, t) == euler_phi(m, t) * euler_phi(n, t)
    assert divisor_count(m * n) == divisor_count(m) * divisor_count(n)
    assert sigma_coprime(m * n, 7) == sigma_coprime(m, 7) * sigma_coprime(n, 7)
    for D in (3, 7, 11):
        assert ideal_count(m * n, D) == ideal_count(m, D) * ideal_count(n, D)


@settings(max_examples=100)
@given(st.integers(1, 20_000), st.integers(1, 50))
def test_sigma_coprime_against_divisors(n, N):
    assert sigma_coprime(n, N) == sum(d for d in sympy.divisors(n) if math.gcd(d, N) == 1)


def test_euler_phi_divisor_count_against_sympy(factor_table):
    for n in range(1, 3000):
        assert euler_phi(n, factor_table) == sympy.totient(n)
        assert divisor_count(n) == sympy.divisor_count(n)
        assert divisors(n) == sympy.divisors(n)


# ---------------------------------------------------------------- ideal counts


@pytest.mark.parametrize("m,D,expected", [(3, 3, 1), (2, 3, 0), (7, 3, 2), (1, 3, 1)])
def test_ideal_count_examples(m, D, expected):
    assert ideal_count(m, D) == expected


def test_ideal_count_two_routes():
    for D in (3, 7, 11):
        for m in range(1, 10_001):
            assert ideal_count(m, D) == sum(kronecker(-D, e) for e in divisors(m)), (m, D)


def test_ideal_count_non_fundamental():
    with pytest.raises(DomainError):
        ideal_count(5, 12)


# ---------------------------------------------------------------- xi


@pytest.mark.parametrize("delta,N,expected", [(-4, 11, -2), (-8, 11, 0), (-7, 15, 4), (-7, 1, 1)])
def test_xi_examples(delta, N, expected):
    assert xi(delta, N) == expected


def test_xi_strict_branch_carries_delta_and_q():
    with pytest.raises(UnresolvedXiBranch) as err:
        xi(-12, 10)
    assert err.value.delta == -12 and err.value.q == 2


def test_xi_resolved_local_factor():
    # conductor 1 keeps the character formula even when q^2 | delta
    assert xi(-12, 2, policy=XiPolicy.RESOLVED) == kronecker(-12, 2) - 1
    # conductor divisible by q gives q - 1
    assert xi(-12, 2, policy="resolved", conductor=2) == 1


def test_xi_rejects_bad_input():
    with pytest.raises(DomainError):
        xi(-5, 11)
    with pytest.raises(DomainError):
        xi(-4, 12)
    with pytest.raises(DomainError):
        xi(-12, 5, policy="resolved", conductor=3)


squarefree = st.integers(1, 3000).filter(lambda n: all(e == 1 for e in sympy.factorint(n).values()))
discriminants = st.integers(3, 5000).map(lambda n: -n).filter(lambda d: d % 4 in (0, 1))


@settings(max_examples=200)
@given(discriminants, squarefree, squarefree)
def test_xi_multiplicative(delta, N1, N2):
    assume(math.gcd(N1, N2) == 1)
    try:
        whole = xi(delta, N1 * N2)
    except UnresolvedXiBranch:
        return
    assert whole == xi(delta, N1) * xi(delta, N2)


# ---------------------------------------------------------------- discriminants


@pytest.mark.parametrize(
    "D,expected",
    [
        (15, DiscriminantClass.ODD_1_MOD_8),
        (20, DiscriminantClass.EVEN_1_MOD_4),
        (16, DiscriminantClass.NOT_CLASSIFIED),
        (3, DiscriminantClass.ODD_5_MOD_8),
        (12, DiscriminantClass.EVEN_3_MOD_4),
        (9, DiscriminantClass.NOT_CLASSIFIED),
        (7, DiscriminantClass.ODD_1_MOD_8),
        (5, DiscriminantClass.NOT_CLASSIFIED),
    ],
)
def test_classify_discriminant(D, expected):
    assert classify_discriminant(D) is expected


def test_classify_discriminant_rule():
    for D in range(3, 3000):
        cls = classify_discriminant(D)
        sqf = all(e == 1 for e in sympy.factorint(D).values())
        if D % 2 and sqf and (-D) % 8 in (1, 5):
            assert cls.value == f"Odd{(-D) % 8}Mod8"
        elif D % 4 == 0 and (D // 4) % 2 and all(e == 1 for e in sympy.factorint(D // 4).values()):
            assert cls.value == f"Even{(D // 4) % 4}Mod4"
        else:
            assert cls is DiscriminantClass.NOT_CLASSIFIED


def test_is_fundamental_discriminant():
    fundamental = {-3, -4, -7, -8, -11, -15, -19, -20, -23, -24}
    for d in range(-24, 0):
        assert is_fundamental_discriminant(d) == (d in fundamental)


def test_squarefree_in_range():
    assert squarefree_in_range(10, 20) == [10, 11, 13, 14, 15, 17, 19]
    assert squarefree_in_range(1, 3) == [1, 2, 3]


def test_check_int128():
    assert check_int128(2**126) == 2**126
    with pytest.raises(ResourceError):
        check_int128(2**127)
