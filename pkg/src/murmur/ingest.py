"""Newform and elliptic-curve datasets, point counting, binary table cache."""

from __future__ import annotations

import io
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numba
import numpy as np

from .arith import FactorTable, factorize, is_prime, primes_up_to
from .errors import (
    CacheChecksumError,
    CacheFormatError,
    CacheTruncatedError,
    DomainError,
    ParseError,
    ValidationError,
)
from .quadforms import HurwitzTable

NEWFORM_MAGIC = "#murmur-newforms v1"
CURVE_MAGIC = "#murmur-curves v1"

CACHE_MAGIC = b"MURM"
CACHE_VERSION = 1
KIND_FACTOR = 1
KIND_HURWITZ = 2
_HEADER = struct.Struct("<4sIBQ")
_TRAILER = struct.Struct("<Q")


@dataclass(frozen=True)
class NewformRecord:
    level: int
    weight: int
    orbit_label: str
    orbit_dim: int
    global_root: int
    al_eigenvalues: tuple  # ((prime, +-1), ...) ascending
    ap_traces: tuple  # aligned to primes 2, 3, 5, ...

    def al(self, q: int) -> int:
        return dict(self.al_eigenvalues)[q]

    def local_root(self, q: int) -> int:
        """Local root number at ``q || level``; equal to the AL eigenvalue."""
        return self.al(q)

    def ap(self, p: int) -> int:
        idx = _prime_index(p)
        if idx >= len(self.ap_traces):
            raise DomainError(f"a_{p} not stored for {self.level}.{self.orbit_label}")
        return self.ap_traces[idx]

    @property
    def key(self):
        return (self.level, self.orbit_label)


@dataclass(frozen=True)
class CurveRecord:
    conductor: int
    label: str
    a_invariants: tuple
    global_root: int

    @property
    def level(self) -> int:
        return self.conductor

    @property
    def orbit_dim(self) -> int:
        return 1

    @property
    def weight(self) -> int:
        return 2

    @property
    def key(self):
        return (self.conductor, self.label)

    def ap(self, p: int) -> int:
        return curve_ap(self, p)


@dataclass
class Dataset:
    kind: str  # "newforms" | "curves"
    records: list
    provenance: str = ""
    pmax: int | None = None
    _by_level: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: r.key)
        seen = set()
        for r in self.records:
            if r.key in seen:
                raise ValidationError(f"duplicate record {r.key}", record=r.key)
            seen.add(r.key)
            self._by_level.setdefault(r.level, []).append(r)

    def __len__(self):
        return len(self.records)

    def __iter__(self) -> Iterator:
        return iter(self.records)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.kind == other.kind and self.records == other.records and self.pmax == other.pmax

    def at_level(self, level: int) -> list:
        return list(self._by_level.get(level, ()))

    def levels(self) -> list[int]:
        return sorted(self._by_level)


_PRIME_CACHE = {"limit": 0, "index": {}}


def _prime_index(p: int) -> int:
    if p > _PRIME_CACHE["limit"]:
        limit = max(2 * p, 1 << 14)
        _PRIME_CACHE["index"] = {int(q): i for i, q in enumerate(primes_up_to(limit))}
        _PRIME_CACHE["limit"] = limit
    try:
        return _PRIME_CACHE["index"][p]
    except KeyError:
        raise DomainError(f"{p} is not prime") from None


def _sign(token: str, line: int, what: str) -> int:
    token = token.strip()
    if token in ("1", "+1", "+"):
        return 1
    if token in ("-1", "-"):
        return -1
    raise ParseError(f"bad {what} sign {token!r}", line=line)


def _int(token: str, line: int, what: str) -> int:
    try:
        return int(token.strip())
    except ValueError:
        raise ParseError(f"bad {what} {token!r}", line=line) from None


def expected_root(weight: int, al_eigenvalues) -> int:
    """Global root number (-1)^(k/2) * prod of AL eigenvalues (squarefree level)."""
    sign = -1 if (weight // 2) % 2 else 1
    for _, lam in al_eigenvalues:
        sign *= lam
    return sign


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, encoding="utf-8"), str(source)
    return source, getattr(source, "name", "<stream>")


def parse_newforms(source) -> Dataset:
    fh, name = _open_text(source)
    try:
        lines = fh.read().splitlines()
    finally:
        if fh is not source:
            fh.close()
    if not lines or not lines[0].startswith(NEWFORM_MAGIC):
        raise ParseError(f"missing header {NEWFORM_MAGIC!r}", line=1)
    header = lines[0].split()
    pmax = None
    for tok in header[2:]:
        if tok.startswith("pmax="):
            pmax = _int(tok[5:], 1, "pmax")
    if pmax is None:
        raise ParseError("header lacks pmax=<P>", line=1)
    n_ap = len(primes_up_to(pmax))
    records = []
    seen = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        row = raw.strip()
        if not row or row.startswith("#"):
            continue
        fields = row.split(",")
        if len(fields) != 7:
            raise ParseError(f"expected 7 fields, got {len(fields)}", line=lineno)
        level = _int(fields[0], lineno, "level")
        weight = _int(fields[1], lineno, "weight")
        label = fields[2].strip()
        dim = _int(fields[3], lineno, "orbit_dim")
        root = _sign(fields[4], lineno, "root")
        if level < 1 or weight < 2 or weight % 2 or dim < 1 or not label:
            raise ParseError("level/weight/orbit_dim/label out of range", line=lineno)
        al = []
        if fields[5].strip():
            for item in fields[5].split(";"):
                q, _, lam = item.partition(":")
                al.append((_int(q, lineno, "AL prime"), _sign(lam, lineno, "AL")))
        al.sort()
        aps = tuple(_int(t, lineno, "a_p") for t in fields[6].split(";")) if fields[6].strip() else ()
        if len(aps) != n_ap:
            raise ParseError(f"expected {n_ap} a_p values for pmax={pmax}, got {len(aps)}", line=lineno)
        fac = factorize(level)
        if any(e > 1 for _, e in fac):
            raise ValidationError(f"level {level} is not squarefree", line=lineno, record=(level, label))
        if [q for q, _ in al] != [q for q, _ in fac]:
            raise ValidationError(
                f"AL primes {[q for q, _ in al]} do not match prime divisors of {level}",
                line=lineno,
                record=(level, label),
            )
        if expected_root(weight, al) != root:
            raise ValidationError(
                f"root {root:+d} inconsistent with weight {weight} and AL signs {al}",
                line=lineno,
                record=(level, label),
            )
        if (level, label) in seen:
            raise ValidationError(
                f"duplicate record {level}.{label} (first at line {seen[(level, label)]})",
                line=lineno,
                record=(level, label),
            )
        seen[(level, label)] = lineno
        records.append(NewformRecord(level, weight, label, dim, root, tuple(al), aps))
    return Dataset("newforms", records, provenance=name, pmax=pmax)


def serialize_newforms(dataset: Dataset) -> str:
    out = io.StringIO()
    out.write(f"{NEWFORM_MAGIC} pmax={dataset.pmax}\n")
    for r in dataset:
        al = ";".join(f"{q}:{lam}" for q, lam in r.al_eigenvalues)
        aps = ";".join(str(a) for a in r.ap_traces)
        out.write(f"{r.level},{r.weight},{r.orbit_label},{r.orbit_dim},{r.global_root},{al},{aps}\n")
    return out.getvalue()


def weierstrass_discriminant(a1, a2, a3, a4, a6) -> int:
    b2 = a1 * a1 + 4 * a2
    b4 = 2 * a4 + a1 * a3
    b6 = a3 * a3 + 4 * a6
    b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4
    return -b2 * b2 * b8 - 8 * b4**3 - 27 * b6 * b6 + 9 * b2 * b4 * b6


def parse_curves(source) -> Dataset:
    fh, name = _open_text(source)
    try:
        lines = fh.read().splitlines()
    finally:
        if fh is not source:
            fh.close()
    records = []
    start = 1
    if lines and lines[0].startswith("#"):
        if not lines[0].startswith(CURVE_MAGIC):
            raise ParseError(f"unexpected header {lines[0]!r}", line=1)
    for lineno, raw in enumerate(lines, start=start):
        row = raw.strip()
        if not row or row.startswith("#"):
            continue
        fields = row.split()
        if len(fields) != 8:
            raise ParseError(f"expected 8 fields, got {len(fields)}", line=lineno)
        conductor = _int(fields[0], lineno, "conductor")
        ainv = tuple(_int(t, lineno, "a-invariant") for t in fields[2:7])
        root = _sign(fields[7], lineno, "root")
        if conductor < 1:
            raise ValidationError("conductor must be positive", line=lineno, record=fields[1])
        if weierstrass_discriminant(*ainv) == 0:
            raise ValidationError(f"singular model {ainv}", line=lineno, record=fields[1])
        records.append(CurveRecord(conductor, fields[1], ainv, root))
    try:
        return Dataset("curves", records, provenance=name)
    except ValidationError as exc:
        raise ValidationError(str(exc), record=exc.record) from None


def serialize_curves(dataset: Dataset) -> str:
    out = io.StringIO()
    out.write(CURVE_MAGIC + "\n")
    for r in dataset:
        out.write(" ".join([str(r.conductor), r.label, *map(str, r.a_invariants), str(r.global_root)]) + "\n")
    return out.getvalue()


def load_dataset(path, kind: str) -> Dataset:
    if kind == "newforms":
        return parse_newforms(path)
    if kind == "curves":
        return parse_curves(path)
    raise DomainError(f"unknown dataset kind {kind!r}")


def _count_points_p2(ainv) -> int:
    a1, a2, a3, a4, a6 = ainv
    affine = sum(
        1
        for x in range(2)
        for y in range(2)
        if (y * y + a1 * x * y + a3 * y - x**3 - a2 * x * x - a4 * x - a6) % 2 == 0
    )
    return affine + 1


def curve_ap(curve: CurveRecord, p: int) -> int:
    """a_p = p + 1 - #E(F_p) by counting points on the reduced model."""
    if not is_prime(p):
        raise DomainError(f"{p} is not prime")
    if curve.conductor % p == 0:
        raise DomainError(f"{curve.label} has bad reduction at {p}")
    if p == 2:
        return 3 - _count_points_p2(curve.a_invariants)
    a1, a2, a3, a4, a6 = (a % p for a in curve.a_invariants)
    # (2y + a1 x + a3)^2 = 4x^3 + b2 x^2 + 2 b4 x + b6
    b2 = (a1 * a1 + 4 * a2) % p
    b4 = (2 * a4 + a1 * a3) % p
    b6 = (a3 * a3 + 4 * a6) % p
    x = np.arange(p, dtype=np.int64)
    rhs = (4 * x) % p
    rhs = (rhs + b2) % p
    rhs = (rhs * x) % p
    rhs = (rhs + 2 * b4) % p
    rhs = (rhs * x) % p
    rhs = (rhs + b6) % p
    squares = np.zeros(p, dtype=bool)
    squares[(x * x) % p] = True
    chi = np.where(rhs == 0, 0, np.where(squares[rhs], 1, -1))
    return -int(chi.sum())


@numba.njit(cache=True)
def _fnv1a64(data):
    h = np.uint64(0xCBF29CE484222325)
    prime = np.uint64(0x100000001B3)
    for byte in data:
        h = (h ^ np.uint64(byte)) * prime
    return h


def fnv1a64(payload: bytes | np.ndarray) -> int:
    arr = np.frombuffer(payload, dtype=np.uint8) if isinstance(payload, (bytes, bytearray, memoryview)) else payload
    return int(_fnv1a64(arr))


def _payload(table) -> tuple[int, np.ndarray]:
    if isinstance(table, FactorTable):
        return KIND_FACTOR, np.ascontiguousarray(table.spf, dtype="<u4")
    if isinstance(table, HurwitzTable):
        return KIND_HURWITZ, np.ascontiguousarray(table.values, dtype="<i8")
    raise DomainError(f"cannot cache {type(table).__name__}")


def table_bytes(table) -> bytes:
    kind, arr = _payload(table)
    payload = arr.view(np.uint8)
    return (
        _HEADER.pack(CACHE_MAGIC, CACHE_VERSION, kind, table.limit)
        + payload.tobytes()
        + _TRAILER.pack(fnv1a64(payload))
    )


def save_table(path, table) -> Path:
    """Write ``table`` atomically (temp file in the same directory, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = table_bytes(table)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_table(path, expect_kind: int | None = None):
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise CacheTruncatedError(f"{path}: header truncated")
    magic, version, kind, limit = _HEADER.unpack_from(blob)
    if magic != CACHE_MAGIC:
        raise CacheFormatError(f"{path}: bad magic {magic!r}")
    if version != CACHE_VERSION:
        raise CacheFormatError(f"{path}: unsupported version {version}")
    if kind not in (KIND_FACTOR, KIND_HURWITZ) or (expect_kind is not None and kind != expect_kind):
        raise CacheFormatError(f"{path}: unexpected table kind {kind}")
    itemsize = 4 if kind == KIND_FACTOR else 8
    size = (limit + 1) * itemsize
    if len(blob) < _HEADER.size + size + _TRAILER.size:
        raise CacheTruncatedError(f"{path}: payload truncated")
    if len(blob) != _HEADER.size + size + _TRAILER.size:
        raise CacheFormatError(f"{path}: trailing bytes after checksum")
    payload = np.frombuffer(blob, dtype=np.uint8, count=size, offset=_HEADER.size)
    (stored,) = _TRAILER.unpack_from(blob, _HEADER.size + size)
    if fnv1a64(payload) != stored:
        raise CacheChecksumError(f"{path}: checksum mismatch")
    if kind == KIND_FACTOR:
        arr = payload.view("<u4").astype(np.uint32)
        arr.flags.writeable = False
        return FactorTable(limit, arr)
    arr = payload.view("<i8").astype(np.int64)
    arr.flags.writeable = False
    return HurwitzTable(limit, arr)


def records_by_sign(records: Iterable) -> dict[int, list]:
    out = {1: [], -1: []}
    for r in records:
        out[r.global_root].append(r)
    return out
