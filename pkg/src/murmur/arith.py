"""Multiplicative-function kernels and sieves.

Everything here is exact integer arithmetic. Bulk tables are numpy arrays;
single evaluations use plain Python ints.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable

import numpy as np

from .errors import DomainError, ResourceError, UnresolvedXiBranch

# u32 spf entries; ~1 GiB at the cap
MAX_TABLE_ENTRIES = 1 << 28

INT128_MAX = (1 << 127) - 1

Factorization = tuple  # tuple[tuple[int, int], ...], ascending primes


class XiPolicy(str, enum.Enum):
    STRICT = "strict-partial"
    RESOLVED = "resolved"

    @classmethod
    def parse(cls, value) -> "XiPolicy":
        if isinstance(value, cls):
            return value
        aliases = {"strict": cls.STRICT, "strict-partial": cls.STRICT, "resolved": cls.RESOLVED}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise DomainError(f"unknown xi policy {value!r}") from None


class DiscriminantClass(str, enum.Enum):
    ODD_1_MOD_8 = "Odd1Mod8"
    ODD_5_MOD_8 = "Odd5Mod8"
    EVEN_1_MOD_4 = "Even1Mod4"
    EVEN_3_MOD_4 = "Even3Mod4"
    NOT_CLASSIFIED = "NotClassified"


def check_int128(x: int) -> int:
    if not -INT128_MAX - 1 <= x <= INT128_MAX:
        raise ResourceError(f"value {x} exceeds the signed 128-bit range")
    return x


@dataclass(frozen=True, eq=False)
class FactorTable:
    """Smallest-prime-factor table; ``spf[n]`` valid for ``2 <= n <= limit``.

    ``spf[0]`` and ``spf[1]`` are stored as 0.
    """

    limit: int
    spf: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, FactorTable):
            return NotImplemented
        return self.limit == other.limit and np.array_equal(self.spf, other.spf)

    def covers(self, n: int) -> bool:
        return 1 <= n <= self.limit

    def factor(self, n: int) -> Factorization:
        if not self.covers(n):
            raise DomainError(f"{n} outside factor table range [1, {self.limit}]")
        spf = self.spf
        out = []
        while n > 1:
            p = int(spf[n])
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
        return tuple(out)


def build_factor_table(limit: int, max_entries: int = MAX_TABLE_ENTRIES) -> FactorTable:
    if limit < 2:
        raise DomainError("factor table limit must be >= 2")
    if limit + 1 > max_entries:
        raise ResourceError(f"factor table limit {limit} exceeds budget of {max_entries} entries")
    spf = np.zeros(limit + 1, dtype=np.uint32)
    for p in range(2, math.isqrt(limit) + 1):
        if spf[p] == 0:
            block = spf[p * p :: p]
            block[block == 0] = p
    idx = np.flatnonzero(spf == 0)
    idx = idx[idx >= 2]
    spf[idx] = idx.astype(np.uint32)
    spf.flags.writeable = False
    return FactorTable(limit, spf)


def primes_up_to(n: int) -> np.ndarray:
    """Ascending primes ``<= n`` as an int64 array (Eratosthenes)."""
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return np.flatnonzero(sieve).astype(np.int64)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    for d in range(3, math.isqrt(n) + 1, 2):
        if n % d == 0:
            return False
    return True


def factorize(n: int, table: FactorTable | None = None) -> Factorization:
    if n < 1:
        raise DomainError(f"cannot factor {n}")
    if table is not None and table.covers(n):
        return table.factor(n)
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            out.append((d, e))
        d += 1 if d == 2 else 2
    if n > 1:
        out.append((n, 1))
    return tuple(out)


def prime_divisors(n: int, table: FactorTable | None = None) -> list[int]:
    return [p for p, _ in factorize(n, table)]


def divisors(n: int, table: FactorTable | None = None) -> list[int]:
    divs = [1]
    for p, e in factorize(n, table):
        divs = [d * p**k for d in divs for k in range(e + 1)]
    return sorted(divs)


def _in_table(n: int, table: FactorTable) -> None:
    if n < 1:
        raise DomainError(f"argument must be positive, got {n}")
    if n > table.limit:
        raise DomainError(f"{n} exceeds factor table limit {table.limit}")


def mobius(n: int, table: FactorTable) -> int:
    _in_table(n, table)
    fac = table.factor(n)
    if any(e > 1 for _, e in fac):
        return 0
    return -1 if len(fac) % 2 else 1


def mobius_sieve(limit: int) -> np.ndarray:
    """Array ``mu[0..limit]`` (``mu[0] = 0``) from a prime sieve, independent of FactorTable."""
    mu = np.ones(limit + 1, dtype=np.int8)
    mu[0] = 0
    for p in primes_up_to(limit):
        p = int(p)
        mu[p::p] *= -1
        if p * p <= limit:
            mu[p * p :: p * p] = 0
    return mu


def mertens(X: int) -> int:
    if X < 1:
        raise DomainError("mertens needs X >= 1")
    return int(mobius_sieve(X).sum(dtype=np.int64))


def is_squarefree(n: int, table: FactorTable) -> bool:
    _in_table(n, table)
    return all(e == 1 for _, e in table.factor(n))


def euler_phi(n: int, table: FactorTable) -> int:
    _in_table(n, table)
    out = 1
    for p, e in table.factor(n):
        out *= (p - 1) * p ** (e - 1)
    return out


def divisor_count(n: int, table: FactorTable | None = None) -> int:
    if n < 1:
        raise DomainError("divisor_count needs n >= 1")
    return reduce(lambda acc, pe: acc * (pe[1] + 1), factorize(n, table), 1)


def sigma_coprime(n: int, N: int, table: FactorTable | None = None) -> int:
    """Sum of the divisors of ``n`` coprime to ``N``."""
    if n < 1 or N < 1:
        raise DomainError("sigma_coprime needs n, N >= 1")
    out = 1
    for p, e in factorize(n, table):
        if N % p:
            out *= (p ** (e + 1) - 1) // (p - 1)
    return out


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a/n) for all integers, (0/0) excluded."""
    if n == 0:
        if a == 0:
            raise DomainError("kronecker(0, 0) is undefined")
        return 1 if a in (1, -1) else 0
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -1
    while n % 2 == 0:
        n //= 2
        if a % 2 == 0:
            return 0
        if a % 8 in (3, 5):
            result = -result
    a %= n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def is_fundamental_discriminant(d: int) -> bool:
    if d in (0, 1):
        return False
    if d % 4 == 1:
        return all(e == 1 for _, e in factorize(abs(d)))
    if d % 4 == 0:
        m = d // 4
        return m % 4 in (2, 3) and all(e == 1 for _, e in factorize(abs(m)))
    return False


def _check_discriminant(delta: int) -> None:
    if delta >= 0 or delta % 4 not in (0, 1):
        raise DomainError(f"{delta} is not a negative discriminant")


def xi_local(delta: int, q: int, conductor: int = 1) -> int:
    """Local factor of xi at the prime ``q`` for the order of index ``conductor``.

    ``q | conductor`` gives ``q - 1``; otherwise ``(delta/q) - 1``.
    """
    if conductor % q == 0:
        return q - 1
    return kronecker(delta, q) - 1


def xi(
    delta: int,
    N: int,
    table: FactorTable | None = None,
    policy: XiPolicy | str = XiPolicy.STRICT,
    conductor: int = 1,
) -> int:
    """Multiplicative weight xi_delta(N) for squarefree ``N``.

    Under the strict policy any prime ``q | N`` with ``q^2 | delta`` raises
    :class:`UnresolvedXiBranch`. Under the resolved policy the factor is the
    local weight of the order of discriminant ``delta / conductor^2``; callers
    sum those orders themselves (see ``traces.xi_class_sum``).
    """
    _check_discriminant(delta)
    policy = XiPolicy.parse(policy)
    if conductor < 1 or delta % (conductor * conductor) or (delta // conductor**2) % 4 not in (0, 1):
        raise DomainError(f"{conductor} is not a conductor of discriminant {delta}")
    fac = factorize(N, table)
    if any(e > 1 for _, e in fac):
        raise DomainError(f"xi needs squarefree N, got {N}")
    out = 1
    for q, _ in fac:
        if policy is XiPolicy.STRICT:
            if delta % (q * q) == 0:
                raise UnresolvedXiBranch(delta, q)
        out *= xi_local(delta, q, conductor)
    return out


def ideal_count(m: int, D: int, table: FactorTable | None = None) -> int:
    """Number of ideals of norm ``m`` in the ring of integers of Q(sqrt(-D))."""
    if m < 1:
        raise DomainError("ideal_count needs m >= 1")
    if not is_fundamental_discriminant(-D):
        raise DomainError(f"-{D} is not a fundamental discriminant")
    out = 1
    for ell, e in factorize(m, table):
        chi = kronecker(-D, ell)
        if chi == 1:
            out *= e + 1
        elif chi == -1:
            if e % 2:
                return 0
        # ramified: local count 1
    return out


def classify_discriminant(D: int) -> DiscriminantClass:
    if D < 3:
        return DiscriminantClass.NOT_CLASSIFIED
    if D % 2:
        if not all(e == 1 for _, e in factorize(D)):
            return DiscriminantClass.NOT_CLASSIFIED
        r = (-D) % 8
        if r == 1:
            return DiscriminantClass.ODD_1_MOD_8
        if r == 5:
            return DiscriminantClass.ODD_5_MOD_8
        return DiscriminantClass.NOT_CLASSIFIED
    if D % 4:
        return DiscriminantClass.NOT_CLASSIFIED
    d = D // 4
    if d % 2 == 0 or not all(e == 1 for _, e in factorize(d)):
        return DiscriminantClass.NOT_CLASSIFIED
    return DiscriminantClass.EVEN_1_MOD_4 if d % 4 == 1 else DiscriminantClass.EVEN_3_MOD_4


def squarefree_mask(lo: int, hi: int) -> np.ndarray:
    """Boolean mask over ``lo..hi`` inclusive marking squarefree integers."""
    mask = np.ones(hi - lo + 1, dtype=bool)
    for p in primes_up_to(math.isqrt(hi)):
        q = int(p) * int(p)
        start = (-lo) % q
        mask[start::q] = False
    if lo <= 0:
        mask[: 1 - lo] = False
    return mask


def squarefree_in_range(lo: int, hi: int) -> list[int]:
    if hi < lo:
        return []
    lo = max(lo, 1)
    return [lo + int(i) for i in np.flatnonzero(squarefree_mask(lo, hi))]


def coprime(a: int, b: int) -> bool:
    return math.gcd(a, b) == 1


def product(values: Iterable[int]) -> int:
    return reduce(lambda x, y: x * y, values, 1)
