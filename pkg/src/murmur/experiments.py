"""Murmuration-average pipelines.

Every pipeline maps an ``ExperimentConfig`` (plus shared tables) to a
``Series``: ordered points ``(x, x/X, exact value, class tag)``. Values stay
exact (``Fraction``, ``SurdSum`` or ``SurdQuotient``) until serialization.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .arith import (
    DiscriminantClass,
    XiPolicy,
    build_factor_table,
    check_int128,
    classify_discriminant,
    divisor_count,
    ideal_count,
    is_fundamental_discriminant,
    divisors,
    factorize,
    is_prime,
    prime_divisors,
    kronecker,
    mobius_sieve,
    primes_up_to,
    sigma_coprime,
    squarefree_mask,
)
from .errors import DomainError, MurmurError, UnresolvedXiError, ValidationError
from .exact import SurdQuotient, SurdSum
from .ingest import Dataset
from .quadforms import MAX_HURWITZ_ENTRIES, HurwitzTable, build_hurwitz_table, class_number_fund
from .traces import TraceContext, dim_new, tr_tp


class Family(str, enum.Enum):
    MF_DELTA = "MF_Delta"
    MF_NO_ROOT = "MF_NoRoot"
    MF_MOBIUS_PART = "MF_MobiusPart"
    MF_MOBIUS_SLOPE = "MF_MobiusSlope"
    MF_FIXED_ROOT_DATA = "MF_FixedRootData"
    EC_FIXED_ROOT_DATA = "EC_FixedRootData"
    EC_NO_ROOT_DATA = "EC_NoRootData"
    AL_EIGENSPACE = "AL_Eigenspace"
    CLASS_SUM = "ClassSum"
    LVALUE_OVER_D = "LValue_OverD"
    LVALUE_OVER_P = "LValue_OverP"
    BQF = "BQF"


class LevelFilter(str, enum.Enum):
    SQUAREFREE = "squarefree"
    PRIMES = "primes-only"
    INERT_PRIMES = "inert-primes"


# fixed colour order used by plots: blue, red, green, orange
AL_TAGS = ("++", "+-", "--", "-+")
BQF_TAGS = {
    DiscriminantClass.ODD_1_MOD_8: "odd1mod8",
    DiscriminantClass.ODD_5_MOD_8: "odd5mod8",
    DiscriminantClass.EVEN_1_MOD_4: "even1mod4",
    DiscriminantClass.EVEN_3_MOD_4: "even3mod4",
}


@dataclass(frozen=True)
class ExperimentConfig:
    family: Family
    X: int
    beta: Fraction = Fraction(2)
    x_max_ratio: Fraction = Fraction(4)
    weight: int = 2
    level_filter: LevelFilter = LevelFilter.SQUAREFREE
    inert_D: int | None = None
    coprimality: bool | None = None  # None: the family's own default
    smoothing_window: int = 0
    xi_policy: XiPolicy = XiPolicy.STRICT
    variant: int = 0
    bqf_class: DiscriminantClass | None = None
    al_fixed_p: int | None = None
    lvalue_D: int = 3
    mr_level_floor: int = 11
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "beta", Fraction(self.beta))
        object.__setattr__(self, "x_max_ratio", Fraction(self.x_max_ratio))
        object.__setattr__(self, "level_filter", LevelFilter(self.level_filter))
        object.__setattr__(self, "xi_policy", XiPolicy.parse(self.xi_policy))
        if self.bqf_class is not None:
            object.__setattr__(self, "bqf_class", DiscriminantClass(self.bqf_class))
        if self.beta <= 1:
            raise DomainError("beta must exceed 1")
        if self.X < 2:
            raise DomainError("X must be at least 2")
        if self.weight < 2 or self.weight % 2:
            raise DomainError("weight must be an even integer >= 2")
        if self.x_max_ratio <= 0:
            raise DomainError("x_max_ratio must be positive")
        if self.smoothing_window < 0:
            raise DomainError("smoothing window must be nonnegative")
        if self.family is Family.CLASS_SUM and self.variant not in range(5):
            raise DomainError("class-sum variant must be 0..4")

    @property
    def level_hi(self) -> int:
        return math.floor(self.beta * self.X)

    @property
    def x_max(self) -> int:
        return math.floor(self.x_max_ratio * self.X)

    @property
    def enforce_coprime(self) -> bool:
        if self.coprimality is not None:
            return self.coprimality
        return self.family is not Family.CLASS_SUM

    def echo(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, enum.Enum):
                v = v.value
            elif isinstance(v, Fraction):
                v = str(v)
            out[k] = v
        return out


@dataclass(frozen=True)
class SeriesPoint:
    x: int
    x_scaled: Fraction
    value: object
    class_tag: str


@dataclass
class Series:
    config: ExperimentConfig | None
    points: list[SeriesPoint]
    class_order: list[str]
    diagnostics: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)  # class tag -> message for empty classes

    def by_tag(self, tag: str) -> list[SeriesPoint]:
        return [pt for pt in self.points if pt.class_tag == tag]

    def values(self, tag: str | None = None) -> list:
        return [pt.value for pt in self.points if tag is None or pt.class_tag == tag]

    def xs(self, tag: str | None = None) -> list[int]:
        return [pt.x for pt in self.points if tag is None or pt.class_tag == tag]

    def value_at(self, x: int, tag: str | None = None):
        for pt in self.points:
            if pt.x == x and (tag is None or pt.class_tag == tag):
                return pt.value
        raise KeyError((x, tag))

    def ordered(self) -> list[SeriesPoint]:
        rank = {t: i for i, t in enumerate(self.class_order)}
        return sorted(self.points, key=lambda pt: (rank.get(pt.class_tag, len(rank)), pt.class_tag, pt.x))

    def check(self) -> None:
        for tag in self.class_order:
            xs = self.xs(tag)
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValidationError(f"x not strictly increasing in class {tag!r}")


def _point(x: int, X: int, value, tag: str) -> SeriesPoint:
    return SeriesPoint(x, Fraction(x, X), value, tag)


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    """Ordered map; the result never depends on ``threads``."""
    if threads <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def prime_axis(cfg: ExperimentConfig, lo: int = 2) -> list[int]:
    return [int(p) for p in primes_up_to(cfg.x_max) if p >= lo]


def levels(cfg: ExperimentConfig, lo: int | None = None, hi: int | None = None) -> list[int]:
    """Levels ``N`` with ``X <= N <= beta X`` passing the configured filter."""
    lo = cfg.X if lo is None else lo
    hi = cfg.level_hi if hi is None else hi
    if hi < lo:
        return []
    if cfg.level_filter is LevelFilter.SQUAREFREE:
        mask = squarefree_mask(lo, hi)
        return [lo + int(i) for i in np.flatnonzero(mask) if lo + int(i) > 1]
    out = [int(q) for q in primes_up_to(hi) if q >= lo]
    if cfg.level_filter is LevelFilter.INERT_PRIMES:
        if cfg.inert_D is None:
            raise DomainError("inert-primes filter needs inert_D")
        out = [q for q in out if kronecker(-cfg.inert_D, q) == -1]
    return out


# ---------------------------------------------------------------- contexts


def hurwitz_limit_needed(cfg: ExperimentConfig) -> int:
    """Largest |discriminant| a config will ask the Hurwitz table for."""
    fam = cfg.family
    pmax = cfg.x_max
    nmax = cfg.level_hi
    if fam is Family.MF_DELTA:
        return 4 * nmax * pmax
    if fam in (Family.MF_NO_ROOT, Family.MF_MOBIUS_PART):
        return 4 * pmax
    if fam is Family.CLASS_SUM:
        return max((abs(d) for d in _class_sum_args_extreme(cfg)), default=4)
    return 4


def _class_sum_args_extreme(cfg):
    # every argument is decreasing in p, so the most negative one sits at pmax
    pmax = cfg.x_max
    t_max = math.isqrt(cfg.X)
    out = []
    for N in (cfg.X, cfg.level_hi):
        for s, t in _class_sum_index(cfg.variant, t_max):
            out.append(min(0, _class_sum_arg(cfg.variant, N, pmax, s, t)))
    return out


def prepare_context(
    cfg: ExperimentConfig,
    ctx: TraceContext | None = None,
    threads: int = 1,
    max_hurwitz_entries: int = MAX_HURWITZ_ENTRIES,
) -> TraceContext:
    """Return a context whose tables cover everything ``cfg`` will request."""
    ctx = ctx or TraceContext()
    need_f = max(cfg.level_hi, 16)
    need_h = max(hurwitz_limit_needed(cfg), 4)
    ft = ctx.factor_table
    if ft is None or ft.limit < need_f:
        ft = build_factor_table(need_f)
    ht = ctx.hurwitz_table
    if ht is None or ht.limit < need_h:
        ht = build_hurwitz_table(need_h, threads=threads, max_entries=max_hurwitz_entries)
    if ft is ctx.factor_table and ht is ctx.hurwitz_table:
        return ctx
    return TraceContext(ft, ht)


# ---------------------------------------------------------------- trace-formula families


def _level_arrays(cfg, ctx):
    Ns = np.array(levels(cfg), dtype=np.int64)
    dims = np.array([dim_new(int(N)) for N in Ns], dtype=np.int64)
    return Ns, dims


def _coprime_mask(Ns: np.ndarray, p: int, enforce: bool) -> np.ndarray:
    if not enforce:
        return np.ones(Ns.shape, dtype=bool)
    return Ns % p != 0


def _delta_point(p, Ns, dims, table: HurwitzTable, enforce):
    mask = _coprime_mask(Ns, p, enforce)
    N = Ns[mask]
    den = int(dims[mask].sum())
    if den == 0:
        return None, int((~mask).sum())
    total12 = np.zeros(N.shape, dtype=np.int64)
    s = 0
    while True:
        active = s * s * N <= 4 * p
        if not active.any():
            break
        args = s * s * N[active] * N[active] - 4 * N[active] * p
        mult = 1 if s == 0 else 2
        total12[active] += mult * table.num12_array(args)
        s += 1
    if (total12 % 24).any():
        bad = int(N[np.flatnonzero(total12 % 24)[0]])
        raise MurmurError(f"tr W T_p not integral at N={bad}, p={p}")
    num = int((total12 // 24).sum()) - len(N) * (p + 1)
    return Fraction(num, den), int((~mask).sum())


def mf_delta_series(cfg: ExperimentConfig, ctx: TraceContext | None = None) -> Series:
    """w-weighted trace average B(p, X); the per-sign difference is about 2B."""
    ctx = prepare_context(cfg, ctx, threads=cfg.threads)
    Ns, dims = _level_arrays(cfg, ctx)
    if len(Ns) == 0 or int(dims.sum()) == 0:
        raise DomainError("no newforms in level range (zero denominator)")
    primes = prime_axis(cfg)
    results = _pmap(lambda p: _delta_point(p, Ns, dims, ctx.hurwitz_table, cfg.enforce_coprime), primes, cfg.threads)
    pts = [_point(p, cfg.X, v, "delta") for p, (v, _) in zip(primes, results) if v is not None]
    diag = {"levels": len(Ns), "excluded_level_pairs": sum(e for _, e in results)}
    _note_skipped(diag, [p for p, (v, _) in zip(primes, results) if v is None])
    return _finish(Series(cfg, pts, ["delta"], diag), cfg)


def _note_skipped(diag: dict, primes: list[int]) -> None:
    if primes:
        diag["skipped_primes"] = primes


def _trace_numerators(cfg, ctx, primes, Ns):
    """Per prime: ({N: tr T_p}, resolved-term count) over levels coprime to p."""

    def one(p):
        row = {}
        unresolved = []
        resolved = 0
        for N in Ns:
            N = int(N)
            if cfg.enforce_coprime and N % p == 0:
                continue
            try:
                row[N] = tr_tp(N, p, ctx, cfg.xi_policy)
            except UnresolvedXiError as exc:
                unresolved.extend(exc.terms)
            if cfg.xi_policy is XiPolicy.RESOLVED:
                resolved += _count_resolved_terms(N, p)
        return row, unresolved, resolved

    rows = _pmap(one, primes, cfg.threads)
    unresolved = [t for _, u, _ in rows for t in u]
    if unresolved:
        raise UnresolvedXiError(unresolved)
    return [r for r, _, _ in rows], sum(c for _, _, c in rows)


def _count_resolved_terms(N: int, p: int) -> int:
    count = 0
    s = 0
    while s * s <= 4 * p:
        delta = s * s - 4 * p
        if delta and any(delta % (q * q) == 0 for q in prime_divisors(N)):
            count += 1 if s == 0 else 2
        s += 1
    return count


def mf_no_root_series(cfg: ExperimentConfig, ctx: TraceContext | None = None) -> Series:
    """sqrt(N)-weighted average of tr T_p without root numbers."""
    ctx = prepare_context(cfg, ctx, threads=cfg.threads)
    Ns, dims = _level_arrays(cfg, ctx)
    if int(dims.sum()) == 0:
        raise DomainError("no newforms in level range (zero denominator)")
    dim_of = dict(zip(Ns.tolist(), dims.tolist()))
    primes = prime_axis(cfg)
    rows, resolved = _trace_numerators(cfg, ctx, primes, Ns)
    pts, skipped = [], []
    for p, row in zip(primes, rows):
        den = sum(dim_of[N] for N in row)
        if den == 0:
            skipped.append(p)
            continue
        num = SurdSum()
        for N, tr in row.items():
            if tr:
                num._add_term(N, Fraction(tr))
        pts.append(_point(p, cfg.X, num / den, "all"))
    diag = {"levels": len(Ns), "xi_policy": cfg.xi_policy.value, "xi_resolved_terms": resolved}
    _note_skipped(diag, skipped)
    return _finish(Series(cfg, pts, ["all"], diag), cfg)


def _mobius_values(cfg: ExperimentConfig, primes: Sequence[int]):
    """Per prime: (sum' sqrt(N) mu(N) as SurdSum, sum' dim_new(N))."""
    mu = mobius_sieve(cfg.level_hi)
    Ns = levels(cfg)
    dims = {N: dim_new(N) for N in Ns}
    base = SurdSum()
    for N in Ns:
        if mu[N]:
            base._add_term(N, Fraction(int(mu[N])))
    den_all = sum(dims.values())
    if den_all == 0:
        raise DomainError("no newforms in level range (zero denominator)")
    out = []
    for p in primes:
        num = base.copy()
        den = den_all
        if cfg.enforce_coprime:
            for N in Ns:
                if N % p == 0:
                    if mu[N]:
                        num._add_term(N, Fraction(-int(mu[N])))
                    den -= dims[N]
        out.append((num, den))
    return out


def mobius_series(cfg: ExperimentConfig) -> Series:
    """(p + 1) * sum' sqrt(N) mu(N) / sum' dim_new(N)."""
    primes = prime_axis(cfg)
    pts, skipped = [], []
    for p, (num, den) in zip(primes, _mobius_values(cfg, primes)):
        if den == 0:
            skipped.append(p)
            continue
        pts.append(_point(p, cfg.X, num * Fraction(p + 1, den), "mobius"))
    diag = {}
    _note_skipped(diag, skipped)
    return _finish(Series(cfg, pts, ["mobius"], diag), cfg)


def mobius_approx_series(cfg: ExperimentConfig) -> Series:
    """(p / X^2) * sum' sqrt(N) mu(N), the large-X shape of the Moebius term."""
    primes = prime_axis(cfg)
    pts = [
        _point(p, cfg.X, num * Fraction(p, cfg.X * cfg.X), "mobius-approx")
        for p, (num, _) in zip(primes, _mobius_values(cfg, primes))
    ]
    return _finish(Series(cfg, pts, ["mobius-approx"], {}), cfg)


def mobius_part(cfg: ExperimentConfig, ctx: TraceContext | None = None) -> tuple[Series, Series, Series]:
    """Split the no-root average into its Moebius and class-number parts.

    Returns ``(mobius, class_part, approx)`` with ``class_part = no_root - mobius``
    exactly, and ``approx = (p / X^2) * sum' sqrt(N) mu(N)``.
    """
    raw = replace(cfg, smoothing_window=0)
    no_root = mf_no_root_series(raw, ctx)
    primes = prime_axis(raw)
    parts = dict(zip(primes, _mobius_values(raw, primes)))
    mob_pts, cls_pts, apx_pts = [], [], []
    for nr in no_root.points:
        p = nr.x
        num, den = parts[p]
        m = num * Fraction(p + 1, den)
        mob_pts.append(_point(p, cfg.X, m, "mobius"))
        cls_pts.append(_point(p, cfg.X, nr.value - m, "class-number"))
        apx_pts.append(_point(p, cfg.X, num * Fraction(p, cfg.X * cfg.X), "mobius-approx"))
    diag = dict(no_root.diagnostics)
    out = (
        Series(cfg, mob_pts, ["mobius"], diag),
        Series(cfg, cls_pts, ["class-number"], dict(diag)),
        Series(cfg, apx_pts, ["mobius-approx"], dict(diag)),
    )
    return tuple(_finish(s, cfg) for s in out)


def fit_slope(series: Series | Iterable, x_range: tuple | None = None, tag: str | None = None):
    """Exact least-squares slope of value against x.

    ``series`` may be a Series or an iterable of ``(x, value)`` pairs. The
    result is a Fraction when all values are rational, otherwise a SurdSum.
    """
    if isinstance(series, Series):
        pairs = [(pt.x, pt.value) for pt in series.points if tag is None or pt.class_tag == tag]
    else:
        pairs = list(series)
    if x_range is not None:
        lo, hi = x_range
        pairs = [(x, v) for x, v in pairs if lo <= x <= hi]
    if len(pairs) < 2:
        raise DomainError("fit_slope needs at least two points")
    n = len(pairs)
    xbar = Fraction(sum(x for x, _ in pairs), n)
    sxx = sum((x - xbar) ** 2 for x, _ in pairs)
    if sxx == 0:
        raise DomainError("fit_slope needs two distinct x values")
    acc = SurdSum()
    for x, v in pairs:
        w = (x - xbar) / sxx
        if isinstance(v, SurdQuotient):
            raise DomainError("fit_slope does not support quotient values")
        acc.add_scaled(v, w)
    return acc.as_fraction() if acc.is_rational() else acc


def mobius_slope_series(cfg: ExperimentConfig, X_values: Sequence[int]) -> Series:
    """Slope in p of the Moebius contribution over ``p <= x_max_ratio * X``, for each X.

    Uses linearity of the slope in the values, so the full per-prime series is
    never materialised; agrees exactly with ``fit_slope(mobius_series(...))``.
    """
    pts = []
    for X in X_values:
        sub = replace(cfg, X=X, smoothing_window=0)
        primes = prime_axis(sub)
        if len(primes) < 2:
            raise DomainError(f"fewer than two primes at X={X}")
        n = len(primes)
        xbar = Fraction(sum(primes), n)
        sxx = sum((p - xbar) ** 2 for p in primes)
        slope = SurdSum()
        for p, (num, den) in zip(primes, _mobius_values(sub, primes)):
            if den == 0:
                raise DomainError(f"zero denominator at X={X}, p={p}; slope undefined")
            slope.add_scaled(num, (p - xbar) / sxx * Fraction(p + 1, den))
        pts.append(SeriesPoint(X, Fraction(X, X_values[0]), slope, "slope"))
    return Series(cfg, pts, ["slope"], {"X_values": list(X_values)})


# ---------------------------------------------------------------- data-driven families


def _dataset_weight(dataset: Dataset) -> int:
    weights = {r.weight for r in dataset}
    if len(weights) > 1:
        raise ValidationError(f"dataset mixes weights {sorted(weights)}")
    return weights.pop() if weights else 2


def _data_levels(dataset: Dataset, cfg: ExperimentConfig) -> list[int]:
    allowed = set(levels(cfg))
    return [N for N in dataset.levels() if N in allowed]


def _ap_axis(dataset: Dataset, cfg: ExperimentConfig) -> list[int]:
    primes = prime_axis(cfg)
    if dataset.pmax is not None:
        primes = [p for p in primes if p <= dataset.pmax]
    return primes


def _norm(p: int, k: int) -> Fraction:
    return Fraction(1, p ** (k // 2 - 1))


def data_fixed_root_series(dataset: Dataset, cfg: ExperimentConfig) -> Series:
    """Per-root-number averages of a_p over a newform or curve dataset."""
    k = _dataset_weight(dataset)
    Ns = _data_levels(dataset, cfg)
    primes = _ap_axis(dataset, cfg)
    pts, errors = [], {}
    for sign, tag in ((1, "+"), (-1, "-")):
        if not any(r.global_root == sign for N in Ns for r in dataset.at_level(N)):
            errors[tag] = f"empty root-number class {tag!r} in level range"
            continue
        for p in primes:
            num = den = 0
            for N in Ns:
                if cfg.enforce_coprime and N % p == 0:
                    continue
                for r in dataset.at_level(N):
                    if r.global_root == sign:
                        num += r.ap(p)
                        den += r.orbit_dim
            if den:
                pts.append(_point(p, cfg.X, _norm(p, k) * Fraction(num, den), tag))
    if len(errors) == 2:
        raise DomainError("both root-number classes are empty in the level range")
    return _finish(Series(cfg, pts, ["+", "-"], {"records": len(dataset)}, errors), cfg)


def data_no_root_series(dataset: Dataset, cfg: ExperimentConfig) -> Series:
    """sqrt(N)-weighted a_p average over a dataset, all root numbers together."""
    k = _dataset_weight(dataset)
    Ns = _data_levels(dataset, cfg)
    pts = []
    for p in _ap_axis(dataset, cfg):
        num = SurdSum()
        den = 0
        for N in Ns:
            if cfg.enforce_coprime and N % p == 0:
                continue
            tot = 0
            for r in dataset.at_level(N):
                tot += r.ap(p)
                den += r.orbit_dim
            if tot:
                num._add_term(N, Fraction(tot))
        if den == 0:
            raise DomainError(f"no records in level range at p={p}")
        pts.append(_point(p, cfg.X, num * (_norm(p, k) / den), "all"))
    return _finish(Series(cfg, pts, ["all"], {"records": len(dataset)}), cfg)


def _pq(level: int) -> tuple[int, int]:
    fac = factorize(level)
    if len(fac) != 2 or any(e != 1 for _, e in fac):
        raise ValidationError(f"level {level} is not a product of two distinct primes", record=level)
    return fac[0][0], fac[1][0]


def al_tag(record) -> str:
    """Sign pattern of local root numbers (w_p, w_q) at level pq, p < q."""
    p, q = _pq(record.level)
    return "".join("+" if record.local_root(r) == 1 else "-" for r in (p, q))


def al_records(dataset: Dataset, cfg: ExperimentConfig) -> list:
    """Records in range: q in [X, beta X] when p is fixed, else pq in [X, beta X]."""
    out = []
    for r in dataset:
        p, q = _pq(r.level)
        if cfg.al_fixed_p is not None:
            if p == cfg.al_fixed_p and cfg.X <= q <= cfg.level_hi:
                out.append(r)
        elif cfg.X <= r.level <= cfg.level_hi:
            out.append(r)
    return out


def al_class_sums(records: Sequence, ell: int, enforce_coprime: bool = True) -> dict[str, tuple[int, int]]:
    """``{tag: (sum of a_ell traces, sum of orbit dims)}`` for the four sign classes."""
    out = {t: (0, 0) for t in AL_TAGS}
    for r in records:
        if enforce_coprime and r.level % ell == 0:
            continue
        tag = al_tag(r)
        num, den = out[tag]
        out[tag] = (num + r.ap(ell), den + r.orbit_dim)
    return out


def al_eigenspace_series(dataset: Dataset, cfg: ExperimentConfig) -> Series:
    for r in dataset:
        _pq(r.level)
    k = _dataset_weight(dataset)
    recs = al_records(dataset, cfg)
    pts, errors = [], {}
    primes = _ap_axis(dataset, cfg)
    sums = [al_class_sums(recs, ell, cfg.enforce_coprime) for ell in primes]
    present = {al_tag(r) for r in recs}
    for tag in AL_TAGS:
        if tag not in present:
            errors[tag] = f"empty Atkin-Lehner class {tag!r} in range"
            continue
        for ell, row in zip(primes, sums):
            num, den = row[tag]
            if den:
                pts.append(_point(ell, cfg.X, _norm(ell, k) * Fraction(num, den), tag))
    if len(errors) == len(AL_TAGS):
        raise DomainError("all Atkin-Lehner classes are empty in range")
    return _finish(Series(cfg, pts, list(AL_TAGS), {"records": len(recs)}, errors), cfg)


# ---------------------------------------------------------------- class number sums


def _class_sum_index(variant: int, t_max: int):
    if variant in (0, 3):
        return [(s, 0) for s in (0, 1)]
    if variant in (1, 2):
        return [(s, 0) for s in range(5)]
    return [(s, t) for t in range(1, t_max + 1) for s in (0, 1)]


def _class_sum_arg(variant: int, N: int, p: int, s: int, t: int) -> int:
    if variant == 0:
        return s * s * N * N - 4 * N * p
    if variant == 1:
        return s * s * p * p - 4 * N * p
    if variant == 2:
        return s * s + 1 - 3 * N * p
    if variant == 3:
        return s * N**3 - 4 * N * N * p
    return s * s * N**3 - t * N - 4 * N * N * p


def class_sum_series(variant: int, cfg: ExperimentConfig, ctx: TraceContext | None = None) -> Series:
    """Normalised sums of Hurwitz class numbers along polynomial families."""
    cfg = replace(cfg, family=Family.CLASS_SUM, variant=variant)
    ctx = prepare_context(cfg, ctx, threads=cfg.threads)
    table = ctx.hurwitz_table
    t_max = math.isqrt(cfg.X)
    index = _class_sum_index(variant, t_max)
    Ns = levels(cfg)
    primes = prime_axis(cfg)

    def one(p):
        num12 = 0
        den = SurdSum() if variant >= 3 else 0
        for N in Ns:
            if cfg.enforce_coprime and N % p == 0:
                continue
            for s, t in index:
                num12 += table.num12(check_int128(_class_sum_arg(variant, N, p, s, t)))
            if variant == 3:
                den._add_term(N**3, Fraction(1))
            elif variant == 4:
                den._add_term(N**3, Fraction(t_max))
            else:
                den += N
        if not den:
            return None
        num = Fraction(num12, 12)
        return num / den if variant < 3 else SurdQuotient(num, den)

    if not Ns:
        raise DomainError("no levels in range")
    vals = _pmap(one, primes, cfg.threads)
    pts = [_point(p, cfg.X, v, f"A{variant}") for p, v in zip(primes, vals) if v is not None]
    diag = {"levels": len(Ns), "t_max": t_max}
    _note_skipped(diag, [p for p, v in zip(primes, vals) if v is None])
    return _finish(Series(cfg, pts, [f"A{variant}"], diag), cfg)


# ---------------------------------------------------------------- L-values


def lambda_mr(N: int, D: int, n: int, ctx: TraceContext | None = None) -> Fraction:
    """Normalised average L-value (sqrt(D) u_D^2 / 2 pi) * Lambda(N, 2, D, n).

    Evaluated from the geometric side: a main term in h_D^2 sigma_N(n), an
    ideal-count term, and a finite sum over m <= nD/N that is empty when nD < N.
    """
    if D % 4 != 3 or not is_fundamental_discriminant(-D):
        raise DomainError(f"-{D} must be a fundamental discriminant with D = 3 mod 4")
    if not is_prime(N):
        raise DomainError(f"level {N} is not prime")
    if kronecker(-D, N) != -1:
        raise DomainError(f"level {N} is not inert in Q(sqrt(-{D}))")
    if n < 1:
        raise DomainError("n must be positive")
    if n % N == 0:
        raise DomainError(f"level {N} must be coprime to n={n}")
    ft = ctx.factor_table if ctx else None
    h, u = class_number_fund(D)
    main = Fraction(12 * h * h, N - 1) * sigma_coprime(n, N, ft)
    second = u * ideal_count(n * D, D, ft) * h
    phi_sum = sum(_phi_term(m, N, D, n, ft) for m in range(1, n * D // N + 1))
    return main + second + u * u * phi_sum


def _phi_term(m, N, D, n, ft) -> int:
    return divisor_count(math.gcd(m, D)) * ideal_count(m, D, ft) * ideal_count(n * D - m * N, D, ft)


def mr_levels(cfg: ExperimentConfig, D: int) -> list[int]:
    lo = max(cfg.X, cfg.mr_level_floor)
    return [int(q) for q in primes_up_to(cfg.level_hi) if q >= lo and kronecker(-D, int(q)) == -1]


def lvalue_series(mode: str, cfg: ExperimentConfig, ctx: TraceContext | None = None) -> Series:
    """Averages of normalised L-values over inert prime levels N in [X, beta X].

    ``mode="OverD"`` varies D over primes = 3 mod 4 in (3, X] with n = 1;
    ``mode="OverP"`` fixes D and varies n = p over primes p <= X, p != D.
    """
    if mode == "OverD":
        pts = []
        for D in primes_up_to(cfg.X):
            D = int(D)
            if D <= 3 or D % 4 != 3:
                continue
            Ns = mr_levels(cfg, D)
            if not Ns:
                raise DomainError(f"no inert prime levels for D={D}")
            total = sum((lambda_mr(N, D, 1, ctx) for N in Ns), Fraction(0))
            tag = "1mod8" if (-D) % 8 == 1 else "5mod8"
            pts.append(_point(D, cfg.X, total / len(Ns), tag))
        return _finish(Series(cfg, pts, ["1mod8", "5mod8"], {}), cfg)
    if mode == "OverP":
        D = cfg.lvalue_D
        Ns = mr_levels(cfg, D)
        if not Ns:
            raise DomainError(f"no inert prime levels for D={D}")
        pts, skipped_p = [], []
        skipped = 0
        for p in primes_up_to(cfg.X):
            p = int(p)
            if D % p == 0:
                continue
            use = [N for N in Ns if N != p]
            skipped += len(Ns) - len(use)
            if not use:
                skipped_p.append(p)
                continue
            total = sum((lambda_mr(N, D, p, ctx) for N in use), Fraction(0))
            tag = "split" if kronecker(-D, p) == 1 else "inert"
            pts.append(_point(p, cfg.X, total / len(use), tag))
        diag = {"levels": len(Ns), "excluded_level_pairs": skipped}
        _note_skipped(diag, skipped_p)
        return _finish(Series(cfg, pts, ["split", "inert"], diag), cfg)
    raise DomainError(f"unknown lvalue mode {mode!r}")


# ---------------------------------------------------------------- quadratic forms


def representation_count(D: int, n: int, ctx: TraceContext | None = None) -> int:
    """Total representations of n by reduced forms of discriminant -D, via 2u * sum chi(d)."""
    if not is_fundamental_discriminant(-D):
        raise DomainError(f"-{D} is not a fundamental discriminant")
    if n < 1:
        raise DomainError("n must be positive")
    u = 3 if D == 3 else 2 if D == 4 else 1
    return 2 * u * sum(kronecker(-D, d) for d in divisors(n, ctx.factor_table if ctx else None))


def bqf_discriminants(cfg: ExperimentConfig, cls: DiscriminantClass) -> list[int]:
    return [D for D in range(cfg.X, cfg.level_hi + 1) if classify_discriminant(D) is cls]


def bqf_series(cfg: ExperimentConfig, ctx: TraceContext | None = None) -> Series:
    """(1/sqrt X) * sum over D in [X, beta X] of the class, gcd(D, p) = 1, of (-D/p)."""
    cls = cfg.bqf_class
    if cls not in BQF_TAGS:
        raise DomainError(f"bqf needs a discriminant class, got {cls}")
    Ds = bqf_discriminants(cfg, cls)
    scale = SurdSum.sqrt(cfg.X, Fraction(1, cfg.X))

    def one(p):
        return sum(kronecker(-D, p) for D in Ds if not (cfg.enforce_coprime and D % p == 0))

    primes = prime_axis(cfg)
    sums = _pmap(one, primes, cfg.threads)
    tag = BQF_TAGS[cls]
    pts = [_point(p, cfg.X, scale * k, tag) for p, k in zip(primes, sums)]
    return _finish(Series(cfg, pts, [tag], {"discriminants": len(Ds)}), cfg)


# ---------------------------------------------------------------- smoothing


def smooth(series: Series, window: int) -> Series:
    """Centered moving mean within each class, truncated at the ends."""
    if window < 0:
        raise DomainError("window must be nonnegative")
    if window == 0:
        return series
    out = []
    tags = list(dict.fromkeys(series.class_order + [pt.class_tag for pt in series.points]))
    for tag in tags:
        pts = series.by_tag(tag)
        for i, pt in enumerate(pts):
            nb = pts[max(0, i - window) : i + window + 1]
            total = nb[0].value
            for q in nb[1:]:
                total = total + q.value
            out.append(replace(pt, value=total / len(nb)))
    return Series(series.config, out, series.class_order, dict(series.diagnostics), dict(series.errors))


def _finish(series: Series, cfg: ExperimentConfig) -> Series:
    series.check()
    if cfg.smoothing_window:
        series = smooth(series, cfg.smoothing_window)
        series.diagnostics["smoothing_window"] = cfg.smoothing_window
    return series


# ---------------------------------------------------------------- dispatch


def run_experiment(cfg: ExperimentConfig, ctx: TraceContext | None = None, dataset: Dataset | None = None):
    """Dispatch on ``cfg.family``; returns a Series (mobius_part returns three)."""
    fam = cfg.family
    if fam is Family.MF_DELTA:
        return mf_delta_series(cfg, ctx)
    if fam is Family.MF_NO_ROOT:
        return mf_no_root_series(cfg, ctx)
    if fam is Family.MF_MOBIUS_PART:
        return mobius_part(cfg, ctx)
    if fam in (Family.MF_FIXED_ROOT_DATA, Family.EC_FIXED_ROOT_DATA):
        _need(dataset, fam)
        return data_fixed_root_series(dataset, cfg)
    if fam is Family.EC_NO_ROOT_DATA:
        _need(dataset, fam)
        return data_no_root_series(dataset, cfg)
    if fam is Family.AL_EIGENSPACE:
        _need(dataset, fam)
        return al_eigenspace_series(dataset, cfg)
    if fam is Family.CLASS_SUM:
        return class_sum_series(cfg.variant, cfg, ctx)
    if fam is Family.LVALUE_OVER_D:
        return lvalue_series("OverD", cfg, ctx)
    if fam is Family.LVALUE_OVER_P:
        return lvalue_series("OverP", cfg, ctx)
    if fam is Family.BQF:
        return bqf_series(cfg, ctx)
    raise DomainError(f"family {fam} has no single-X pipeline")


def _need(dataset, fam):
    if dataset is None:
        raise DomainError(f"{fam.value} needs a dataset")
