"""``murmur`` command line: sieve, run, plot, ingest."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .arith import DiscriminantClass, XiPolicy, build_factor_table
from .errors import (
    CacheError,
    DomainError,
    MurmurError,
    ResourceError,
    UnresolvedXiError,
    ValidationError,
)
from .exact import render
from .experiments import (
    ExperimentConfig,
    Family,
    LevelFilter,
    Series,
    hurwitz_limit_needed,
    mobius_approx_series,
    mobius_series,
    mobius_slope_series,
    run_experiment,
)
from .ingest import KIND_FACTOR, KIND_HURWITZ, load_dataset, load_table, records_by_sign, save_table
from .plot import CSV_HEADER, read_series_csv, render_svg
from .quadforms import build_hurwitz_table
from .traces import TraceContext

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("murmur")

EXIT_OK, EXIT_VALIDATION, EXIT_RESOURCE, EXIT_XI = 0, 2, 3, 4

FACTOR_CACHE = "factor.murm"
HURWITZ_CACHE = "hurwitz.murm"


@dataclass(frozen=True)
class Experiment:
    family: Family
    data: str | None = None  # dataset kind the experiment needs
    options: dict = field(default_factory=dict)
    doc: str = ""
    trace_free: bool = False  # Moebius-only output, needs no trace formula


CATALOG: dict[str, Experiment] = {
    "delta": Experiment(Family.MF_DELTA, doc="w-weighted trace average B(p, X) over squarefree levels"),
    "no-root": Experiment(Family.MF_NO_ROOT, doc="sqrt(N)-weighted trace average, no root numbers"),
    "mobius": Experiment(Family.MF_MOBIUS_PART, doc="Moebius term and its p/X^2 approximation", trace_free=True),
    "mobius-part": Experiment(Family.MF_MOBIUS_PART, doc="no-root average split into Moebius and class-number parts"),
    "mobius-slope": Experiment(Family.MF_MOBIUS_SLOPE, doc="slope of the Moebius term for X = --x .. --x-max"),
    "mf-fixed-root": Experiment(Family.MF_FIXED_ROOT_DATA, data="newforms", doc="per-root-number a_p averages, newform data"),
    "ec-fixed-root": Experiment(Family.EC_FIXED_ROOT_DATA, data="curves", doc="per-root-number a_p averages, curve data"),
    "ec-no-root": Experiment(Family.EC_NO_ROOT_DATA, data="curves", doc="sqrt(N)-weighted a_p average, curve data"),
    "al-eigenspace": Experiment(Family.AL_EIGENSPACE, data="newforms", doc="four local-sign classes at levels pq"),
    **{
        f"class-sum-a{v}": Experiment(Family.CLASS_SUM, options={"variant": v}, doc=f"Hurwitz class number sum A_{v}")
        for v in range(5)
    },
    "lvalue-d": Experiment(Family.LVALUE_OVER_D, doc="normalised L-value average over D, n = 1"),
    "lvalue-p": Experiment(Family.LVALUE_OVER_P, doc="normalised L-value average over n = p"),
    "bqf-odd1": Experiment(Family.BQF, options={"bqf_class": DiscriminantClass.ODD_1_MOD_8}, doc="-D = 1 mod 8"),
    "bqf-odd5": Experiment(Family.BQF, options={"bqf_class": DiscriminantClass.ODD_5_MOD_8}, doc="-D = 5 mod 8"),
    "bqf-even1": Experiment(Family.BQF, options={"bqf_class": DiscriminantClass.EVEN_1_MOD_4}, doc="D = 4d, d = 1 mod 4"),
    "bqf-even3": Experiment(Family.BQF, options={"bqf_class": DiscriminantClass.EVEN_3_MOD_4}, doc="D = 4d, d = 3 mod 4"),
}

# flag name -> default; also the accepted TOML keys
RUN_DEFAULTS = {
    "x": None,
    "beta": "2",
    "xmax_ratio": "4",
    "smooth": 0,
    "data": None,
    "cache": None,
    "threads": 1,
    "out": ".",
    "xi_policy": "strict",
    "weight": 2,
    "level_filter": "squarefree",
    "coprime": None,
    "al_p": None,
    "lvalue_d": 3,
    "mr_floor": 11,
    "x_max": None,
    "x_step": None,
}


def _fraction(text) -> Fraction:
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="murmur", description="Exact murmuration averages.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sieve", help="build and cache factor and Hurwitz tables")
    sp.add_argument("--limit", type=lambda s: int(float(s)), required=True)
    sp.add_argument("--cache", required=True)
    sp.add_argument("--threads", type=int, default=1)

    rp = sub.add_parser("run", help="compute one experiment series")
    rp.add_argument("name", choices=sorted(CATALOG))
    rp.add_argument("--config", help="TOML file; command-line flags take precedence")
    rp.add_argument("--x", type=int)
    rp.add_argument("--beta", type=_fraction)
    rp.add_argument("--xmax-ratio", dest="xmax_ratio", type=_fraction)
    rp.add_argument("--smooth", type=int)
    rp.add_argument("--data")
    rp.add_argument("--cache")
    rp.add_argument("--threads", type=int)
    rp.add_argument("--out")
    rp.add_argument("--xi-policy", dest="xi_policy", choices=["strict", "resolved"])
    rp.add_argument("--weight", type=int)
    rp.add_argument("--level-filter", dest="level_filter", choices=[f.value for f in LevelFilter])
    rp.add_argument("--coprime", dest="coprime", action="store_true", default=None)
    rp.add_argument("--no-coprime", dest="coprime", action="store_false")
    rp.add_argument("--al-p", dest="al_p", type=int, help="fix the smaller prime of N = pq")
    rp.add_argument("--lvalue-d", dest="lvalue_d", type=int)
    rp.add_argument("--mr-floor", dest="mr_floor", type=int)
    rp.add_argument("--x-max", dest="x_max", type=int, help="mobius-slope: last X")
    rp.add_argument("--x-step", dest="x_step", type=int, help="mobius-slope: X increment")

    pp = sub.add_parser("plot", help="render a series CSV as SVG")
    pp.add_argument("csv")
    pp.add_argument("svg")
    pp.add_argument("--title", default="")

    ip = sub.add_parser("ingest", help="validate a data file and summarise it")
    ip.add_argument("path")
    ip.add_argument("--kind", choices=["newforms", "curves"], required=True)
    return ap


# ---------------------------------------------------------------- tables


def _load_cached(path: Path, kind: int, limit: int):
    if not path.exists():
        return None
    try:
        table = load_table(path, expect_kind=kind)
    except CacheError as exc:
        log.warning("cache %s unusable (%s); rebuilding", path, exc)
        return None
    return table if table.limit >= limit else None


def ensure_tables(cache_dir, factor_limit: int, hurwitz_limit: int, threads: int = 1) -> tuple[TraceContext, dict]:
    """Load tables from ``cache_dir`` when they cover the limits, else build (and persist)."""
    info = {}
    tables = []
    for name, kind, limit, build in (
        (FACTOR_CACHE, KIND_FACTOR, max(factor_limit, 16), lambda n: build_factor_table(n)),
        (HURWITZ_CACHE, KIND_HURWITZ, max(hurwitz_limit, 4), lambda n: build_hurwitz_table(n, threads=threads)),
    ):
        path = Path(cache_dir) / name if cache_dir else None
        table = _load_cached(path, kind, limit) if path else None
        status = "reused"
        if table is None:
            table = build(limit)
            status = "built"
            if path:
                save_table(path, table)
        info[name] = {"path": str(path) if path else None, "limit": table.limit, "status": status}
        tables.append(table)
    return TraceContext(tables[0], tables[1]), info


def cmd_sieve(args) -> int:
    _, info = ensure_tables(args.cache, args.limit, args.limit, args.threads)
    for name, meta in info.items():
        print(f"{name}: {meta['status']} limit={meta['limit']} path={meta['path']}")
    return EXIT_OK


# ---------------------------------------------------------------- run


def merged_options(args) -> dict:
    opts = dict(RUN_DEFAULTS)
    if args.config:
        with open(args.config, "rb") as fh:
            conf = tomllib.load(fh)
        unknown = set(conf) - set(RUN_DEFAULTS)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        opts.update(conf)
    for key in RUN_DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    if opts["x"] is None:
        raise ValidationError("--x is required")
    return opts


def config_from_options(name: str, opts: dict) -> ExperimentConfig:
    exp = CATALOG[name]
    return ExperimentConfig(
        family=exp.family,
        X=int(opts["x"]),
        beta=Fraction(str(opts["beta"])),
        x_max_ratio=Fraction(str(opts["xmax_ratio"])),
        weight=int(opts["weight"]),
        level_filter=opts["level_filter"],
        coprimality=opts["coprime"],
        smoothing_window=int(opts["smooth"]),
        xi_policy=XiPolicy.parse(opts["xi_policy"]),
        al_fixed_p=opts["al_p"],
        lvalue_D=int(opts["lvalue_d"]),
        mr_level_floor=int(opts["mr_floor"]),
        threads=int(opts["threads"]),
        **exp.options,
    )


def _needs_tables(cfg: ExperimentConfig) -> bool:
    return cfg.family in (Family.MF_DELTA, Family.MF_NO_ROOT, Family.MF_MOBIUS_PART, Family.CLASS_SUM)


def compute(name: str, cfg: ExperimentConfig, opts: dict, ctx: TraceContext | None = None) -> tuple[list[Series], dict]:
    exp = CATALOG[name]
    info = {}
    dataset = None
    if exp.data:
        if not opts["data"]:
            raise ValidationError(f"experiment {name!r} needs --data")
        dataset = load_dataset(opts["data"], exp.data)
    if exp.family is Family.MF_MOBIUS_SLOPE:
        step = opts["x_step"] or max(1, cfg.X // 4)
        x_max = opts["x_max"] or cfg.X
        if x_max < cfg.X:
            raise DomainError("--x-max must be at least --x")
        return [mobius_slope_series(cfg, list(range(cfg.X, x_max + 1, step)))], info
    if exp.trace_free:
        return [mobius_series(cfg), mobius_approx_series(cfg)], info
    if ctx is None and _needs_tables(cfg):
        ctx, info = ensure_tables(opts["cache"], cfg.level_hi, hurwitz_limit_needed(cfg), cfg.threads)
    out = run_experiment(cfg, ctx, dataset)
    return (list(out) if isinstance(out, tuple) else [out]), info


def series_csv(series_list: list[Series]) -> str:
    lines = [",".join(CSV_HEADER)]
    for s in series_list:
        for pt in s.ordered():
            lines.append(f"{pt.x},{render(pt.x_scaled)},{render(pt.value)},{pt.class_tag}")
    return "\n".join(lines) + "\n"


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return str(obj)


def cmd_run(args) -> int:
    opts = merged_options(args)
    cfg = config_from_options(args.name, opts)
    t0 = time.perf_counter()
    series_list, table_info = compute(args.name, cfg, opts)
    elapsed = time.perf_counter() - t0
    out_dir = Path(opts["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{args.name}_X{cfg.X}"
    csv_path = out_dir / f"{stem}.csv"
    csv_path.write_text(series_csv(series_list))
    manifest = {
        "experiment": args.name,
        "config": cfg.echo(),
        "options": opts,
        "inputs": {opts["data"]: _digest(opts["data"])} if opts["data"] else {},
        "tables": table_info,
        "outputs": {"csv": str(csv_path)},
        "seconds": round(elapsed, 3),
        "diagnostics": {",".join(s.class_order): s.diagnostics for s in series_list},
        "errors": {k: v for s in series_list for k, v in s.errors.items()},
    }
    (out_dir / f"{stem}.manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    for s in series_list:
        for tag, msg in s.errors.items():
            log.warning("class %s: %s", tag, msg)
    print(csv_path)
    return EXIT_OK


# ---------------------------------------------------------------- plot, ingest


def cmd_plot(args) -> int:
    rows = read_series_csv(args.csv)
    if not rows:
        log.warning("%s has no data rows; writing axes only", args.csv)
    Path(args.svg).write_text(render_svg(rows, args.title))
    print(args.svg)
    return EXIT_OK


def cmd_ingest(args) -> int:
    ds = load_dataset(args.path, args.kind)
    print(f"{args.kind}: {len(ds)} records")
    levels = ds.levels()
    if levels:
        print(f"levels: {levels[0]}..{levels[-1]} ({len(levels)} distinct)")
        for lo in range(0, levels[-1] + 1, _bucket(levels[-1])):
            hi = lo + _bucket(levels[-1]) - 1
            n = sum(len(ds.at_level(N)) for N in levels if lo <= N <= hi)
            if n:
                print(f"  [{lo}, {hi}]: {n}")
    for sign, recs in records_by_sign(ds).items():
        print(f"root {'+1' if sign == 1 else '-1'}: {len(recs)}")
    return EXIT_OK


def _bucket(top: int) -> int:
    size = 10
    while top // size > 10:
        size *= 10
    return size


COMMANDS = {"sieve": cmd_sieve, "run": cmd_run, "plot": cmd_plot, "ingest": cmd_ingest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UnresolvedXiError as exc:
        print(f"error: {exc.count} trace-formula terms hit the unresolved xi branch; "
              f"rerun with --xi-policy resolved ({exc})", file=sys.stderr)
        return EXIT_XI
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValidationError, DomainError, CacheError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except MurmurError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
