"""Weight-2 newspace traces at squarefree level.

``tr_w_tp`` is the Fricke-twisted trace, free of any local weights. ``tr_tp``
carries the multiplicative xi weights and therefore depends on the xi policy.
All class-number sums are accumulated in twelfths and divided exactly at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .arith import (
    FactorTable,
    XiPolicy,
    divisors,
    factorize,
    is_prime,
    kronecker,
    xi,
)
from .errors import ConsistencyError, DomainError, UnresolvedXiBranch, UnresolvedXiError
from .quadforms import HurwitzTable, _conductors, _hurwitz_num12, class_count_weighted, weighted_class_counts


@dataclass
class TraceContext:
    factor_table: FactorTable | None = None
    hurwitz_table: HurwitzTable | None = None
    # per-context memo of resolved class sums; keyed by (delta, N)
    _xi_memo: dict = field(default_factory=dict, repr=False, compare=False)

    def h12(self, disc: int) -> int:
        if self.hurwitz_table is None:
            return _hurwitz_num12(disc)
        return self.hurwitz_table.num12(disc)

    def factor(self, n: int):
        return factorize(n, self.factor_table)


def _squarefree_factor(N: int, ctx: TraceContext):
    fac = ctx.factor(N) if ctx is not None else factorize(N)
    if any(e > 1 for _, e in fac):
        raise DomainError(f"level {N} is not squarefree")
    return fac


@lru_cache(maxsize=None)
def genus_x0(N: int) -> int:
    """Genus of X_0(N)."""
    if N < 1:
        raise DomainError("genus_x0 needs N >= 1")
    fac = factorize(N)
    index = N
    for p, _ in fac:
        index = index * (p + 1) // p
    nu2 = 0 if N % 4 == 0 else math.prod(1 + kronecker(-4, p) for p, _ in fac)
    nu3 = 0 if N % 9 == 0 else math.prod(1 + kronecker(-3, p) for p, _ in fac)
    cusps = 0
    for d in divisors(N):
        g = math.gcd(d, N // d)
        cusps += sum(1 for k in range(1, g + 1) if math.gcd(k, g) == 1)
    genus = 1 + Fraction(index, 12) - Fraction(nu2, 4) - Fraction(nu3, 3) - Fraction(cusps, 2)
    if genus.denominator != 1:
        raise ConsistencyError(f"non-integral genus {genus} at N={N}")
    return int(genus)


@lru_cache(maxsize=None)
def dim_new(N: int) -> int:
    """dim S_2^new(N) for squarefree N, by sieving genus values over divisors."""
    fac = factorize(N)
    if any(e > 1 for _, e in fac):
        raise DomainError(f"dim_new needs squarefree N, got {N}")
    total = 0
    for d in divisors(N):
        omega = len(factorize(d))
        total += (-2) ** omega * genus_x0(N // d)
    if total < 0:
        raise ConsistencyError(f"negative newspace dimension at N={N}")
    return total


def _check_level_prime(N: int, p: int, ctx: TraceContext):
    if N <= 1:
        raise DomainError("level must exceed 1")
    if not is_prime(p):
        raise DomainError(f"{p} is not prime")
    if N % p == 0:
        raise DomainError(f"p={p} divides N={N}")
    return _squarefree_factor(N, ctx)


def xi_class_sum12(delta: int, N: int, ctx: TraceContext, policy=XiPolicy.STRICT) -> int:
    """12 * xi_delta(N) * H(delta), with the resolved policy summing over orders.

    Under the resolved policy each order of conductor ``f`` contributes its
    weighted class count times the local weights at ``q | N`` (``q - 1`` when
    ``q | f``, ``(delta/q) - 1`` otherwise).
    """
    policy = XiPolicy.parse(policy)
    if policy is XiPolicy.STRICT:
        return xi(delta, N, ctx.factor_table, policy) * ctx.h12(delta)
    key = (delta, N)
    hit = ctx._xi_memo.get(key)
    if hit is not None:
        return hit
    primes = [q for q, _ in ctx.factor(N)]
    if all(delta % (q * q) for q in primes):
        value = xi(delta, N, ctx.factor_table, policy) * ctx.h12(delta)
    elif ctx.hurwitz_table is not None:
        counts = weighted_class_counts(ctx.hurwitz_table, delta)
        value = sum(hw * xi(delta, N, ctx.factor_table, policy, conductor=f) for f, hw in counts.items())
    else:
        value = sum(
            class_count_weighted(delta // (f * f)).num12 * xi(delta, N, ctx.factor_table, policy, conductor=f)
            for f in _conductors(-delta)
        )
    ctx._xi_memo[key] = value
    return value


def tr_tp(N: int, p: int, ctx: TraceContext | None = None, xi_policy=XiPolicy.STRICT) -> int:
    """Trace of T_p on S_2^new(N), N > 1 squarefree and coprime to p."""
    ctx = ctx or TraceContext()
    fac = _check_level_prime(N, p, ctx)
    mu = -1 if len(fac) % 2 else 1
    total12 = 0
    unresolved = []
    s = 0
    while s * s <= 4 * p:
        delta = s * s - 4 * p
        mult = 1 if s == 0 else 2
        if delta == 0:
            total12 += mult * ctx.h12(0)
        else:
            try:
                total12 += mult * xi_class_sum12(delta, N, ctx, xi_policy)
            except UnresolvedXiBranch:
                unresolved.append((N, p, s, delta))
        s += 1
    if unresolved:
        raise UnresolvedXiError(unresolved)
    if total12 % 24:
        raise ConsistencyError(f"tr T_p class sum not integral at N={N}, p={p}: {total12}/24")
    return -(total12 // 24) + mu * (p + 1)


def tr_w_tp(N: int, p: int, ctx: TraceContext | None = None) -> int:
    """Trace of W T_p on S_2^new(N) with W the sign-normalised Fricke involution."""
    ctx = ctx or TraceContext()
    _check_level_prime(N, p, ctx)
    total12 = 0
    s = 0
    while s * s * N <= 4 * p:
        mult = 1 if s == 0 else 2
        total12 += mult * ctx.h12(s * s * N * N - 4 * N * p)
        s += 1
    if total12 % 24:
        raise ConsistencyError(f"tr W T_p class sum not integral at N={N}, p={p}: {total12}/24")
    return total12 // 24 - (p + 1)
