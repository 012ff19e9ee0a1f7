"""Cleartext re-layouts of matrices and vectors into slot vectors.

Conventions shared with :mod:`helix.kernels`:

* Every matrix is zero-padded to power-of-two dims (pad_rows x pad_cols).
* A matvec block is at most n x n; its input vector is replicated with
  period ``block_cols`` across all n slots (see :func:`replicate`).
* Diagonals are "extended" over all n slots:
  ``diag[i][s] = M[s mod dr][(s + i) mod dc]``. For a square d x d block
  with n = d this is the classic wrapping diagonal ``A[j][(i + j) mod d]``;
  for rectangular blocks the output comes out replicated with period dr,
  so no extra rotations are needed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np


class Layout(str, Enum):
    PACKED_ROW = "PackedRow"
    DIAGONAL = "Diagonal"
    BSGS = "BsgsDiagonal"
    ROW_MAJOR = "RowMajor"


def next_pow2(x: int) -> int:
    x = int(x)
    if x < 1:
        raise ValueError(f"dimension must be positive, got {x}")
    return 1 << (x - 1).bit_length()


def is_pow2(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


def log2(x: int) -> int:
    if not is_pow2(x):
        raise ValueError(f"{x} is not a power of two")
    return x.bit_length() - 1


# --- matrix sources ------------------------------------------------------


class SeededMatrix:
    """Deterministic pseudo-random integer matrix evaluated on demand.

    Entry (r, c) is a splitmix64 hash of (seed, r, c) mapped to an integer in
    [low, high]. Nothing is stored, so preset-sized weights (e.g. 14336 x
    4096) cost no memory; only the gathered slots are ever computed.
    """

    def __init__(self, rows: int, cols: int, seed: int = 0, low: int = -4, high: int = 4):
        self.shape = (int(rows), int(cols))
        self.seed = int(seed)
        self.low, self.high = int(low), int(high)
        self.dtype = np.dtype(np.float64)

    @property
    def T(self) -> "TransposedMatrix":
        return TransposedMatrix(self)

    def values(self, r, c) -> np.ndarray:
        r = np.asarray(r, dtype=np.uint64)
        c = np.asarray(c, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = (r * np.uint64(self.shape[1]) + c) ^ (np.uint64(self.seed) * np.uint64(0x9E3779B97F4A7C15))
            z = z + np.uint64(0x9E3779B97F4A7C15)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            z = z ^ (z >> np.uint64(31))
        span = np.uint64(self.high - self.low + 1)
        return (z % span).astype(np.int64).astype(np.float64) + self.low

    def __getitem__(self, key):
        if isinstance(key, tuple) and len(key) == 2:
            r, c = key
            if isinstance(r, slice) or isinstance(c, slice):
                rr = np.arange(self.shape[0])[r] if isinstance(r, slice) else np.asarray(r)
                cc = np.arange(self.shape[1])[c] if isinstance(c, slice) else np.asarray(c)
                return self.values(rr[:, None], cc[None, :]) if rr.ndim and cc.ndim else self.values(rr, cc)
            return self.values(r, c)
        raise IndexError("SeededMatrix supports [rows, cols] indexing only")

    def __array__(self, dtype=None, copy=None):
        out = self[:, :]
        return out if dtype is None else out.astype(dtype)

    def __repr__(self):
        return f"SeededMatrix({self.shape[0]}x{self.shape[1]}, seed={self.seed})"


class TransposedMatrix:
    """Lazy transpose view of a :class:`SeededMatrix`."""

    def __init__(self, base: SeededMatrix):
        self.base = base
        self.shape = base.shape[::-1]
        self.dtype = base.dtype

    @property
    def T(self):
        return self.base

    def values(self, r, c):
        return self.base.values(c, r)

    def __getitem__(self, key):
        r, c = key
        return self.base[c, r].T if (isinstance(r, slice) or isinstance(c, slice)) else self.base.values(c, r)

    def __array__(self, dtype=None, copy=None):
        out = np.asarray(self.base).T
        return out if dtype is None else out.astype(dtype)


def _gather(A, r: np.ndarray, c: np.ndarray) -> np.ndarray:
    """A[r, c] with zeros outside A's bounds (the padded region)."""
    R, C = A.shape
    ok = (r < R) & (c < C)
    out = np.zeros(r.shape, dtype=np.float64)
    if np.any(ok):
        if hasattr(A, "values"):
            out[ok] = A.values(r[ok], c[ok])
        else:
            out[ok] = np.asarray(A)[r[ok], c[ok]]
    return out


def _as_source(A):
    if hasattr(A, "values") and hasattr(A, "shape"):
        return A
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    return A


# --- plans, masks, vectors ----------------------------------------------


@dataclass(frozen=True)
class BsgsPlan:
    n1: int
    n2: int

    def __post_init__(self):
        if not (is_pow2(self.n1) and is_pow2(self.n2)):
            raise ValueError(f"n1={self.n1}, n2={self.n2} must be powers of two")

    @property
    def dim(self) -> int:
        return self.n1 * self.n2

    @classmethod
    def default(cls, d: int) -> "BsgsPlan":
        """Balanced split: n1 = n2 = sqrt(d), else n1 = sqrt(2d), n2 = d / n1."""
        k = log2(d)
        n1 = 1 << (k // 2) if k % 2 == 0 else 1 << ((k + 1) // 2)
        return cls(n1, d // n1)

    def check(self, d: int) -> None:
        if self.dim != d:
            raise ValueError(f"inconsistent plan: n1*n2 = {self.dim} but padded dim is {d}")

    def baby_steps(self) -> list:
        return list(range(1, self.n1))

    def giant_steps(self) -> list:
        return [self.n1 * j for j in range(1, self.n2)]


@dataclass(frozen=True)
class Mask:
    vector: np.ndarray = field(repr=False)
    kind: str
    args: tuple

    def slots(self) -> np.ndarray:
        return np.flatnonzero(self.vector)


def make_mask(kind: str, i: int, d: int, n: int, offset: int = 0) -> Mask:
    """Binary slot mask.

    ``column``: 1 at slots {i, i+d, ..., i+(d-1)d}. ``row``: 1 at [i*d, (i+1)*d).
    ``stride``: 1 at slots offset + k*d for every k (``i`` is ignored).
    """
    v = np.zeros(n, dtype=np.float64)
    if kind == "stride":
        if d < 1 or not 0 <= offset < d:
            raise ValueError(f"stride selector needs 0 <= offset < stride, got {offset}, {d}")
        v[offset::d] = 1.0
        return Mask(v, kind, (d, offset))
    if not 0 <= i < d:
        raise ValueError(f"index {i} outside [0, {d})")
    if d * d > n:
        raise ValueError(f"{d}x{d} block does not fit in {n} slots")
    if kind == "column":
        v[i : d * d : d] = 1.0
    elif kind == "row":
        v[i * d : (i + 1) * d] = 1.0
    else:
        raise ValueError(f"unknown mask kind {kind!r}")
    return Mask(v, kind, (i, d))


def replicate(x, period: int, n: int) -> np.ndarray:
    """Zero-pad ``x`` to ``period`` and tile it across ``n`` slots."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size > period or n % period:
        raise ValueError(f"cannot replicate {x.size} values with period {period} in {n} slots")
    block = np.zeros(period)
    block[: x.size] = x
    return np.tile(block, n // period)


# --- packed matrices -----------------------------------------------------


@dataclass
class PackedMatrix:
    """A matrix laid out as plaintext slot vectors, possibly over a grid of blocks.

    Payloads are computed on demand from ``source`` unless :meth:`materialize`
    stored them, so preset-sized matrices never need to be held in memory.
    """

    layout: Layout
    rows: int
    cols: int
    pad_rows: int
    pad_cols: int
    slot_count: int
    block_rows: int
    block_cols: int
    plan: BsgsPlan | None = None
    rows_per_payload: int = 1
    source: object = field(default=None, repr=False)
    stored: dict | None = field(default=None, repr=False)

    @property
    def grid(self) -> tuple:
        if self.layout is Layout.ROW_MAJOR:
            return (1, 1)
        # ceil, not pad // block: blocks lying wholly in the padding are skipped
        return (-(-self.rows // self.block_rows), -(-self.cols // self.block_cols))

    def blocks(self):
        gr, gc = self.grid
        return [(i, j) for i in range(gr) for j in range(gc)]

    def payload_count(self, bi: int = 0, bj: int = 0) -> int:
        if self.layout in (Layout.DIAGONAL, Layout.BSGS):
            return self.block_cols
        if self.layout is Layout.PACKED_ROW:
            return math.ceil(self._rows_in_block(bi) / self.rows_per_payload)
        return 1

    def _rows_in_block(self, bi: int) -> int:
        return max(0, min(self.block_rows, self.rows - bi * self.block_rows))

    def meta(self, idx: int, bi: int = 0, bj: int = 0) -> dict:
        m = {"block": [bi, bj], "index": idx}
        if self.layout is Layout.DIAGONAL:
            m["diagonal"] = idx
        elif self.layout is Layout.BSGS:
            m.update(diagonal=idx, giant=idx // self.plan.n1, baby=idx % self.plan.n1)
        elif self.layout is Layout.PACKED_ROW:
            m["group"] = idx
        return m

    def payload(self, idx: int, bi: int = 0, bj: int = 0) -> np.ndarray:
        if self.stored is not None:
            return self.stored[(bi, bj)][idx]
        return self._compute(idx, bi, bj)

    def payloads(self, bi: int = 0, bj: int = 0) -> list:
        return [self.payload(i, bi, bj) for i in range(self.payload_count(bi, bj))]

    def _compute(self, idx, bi, bj) -> np.ndarray:
        A, n = self.source, self.slot_count
        dr, dc = self.block_rows, self.block_cols
        s = np.arange(n)
        if self.layout in (Layout.DIAGONAL, Layout.BSGS):
            r = bi * dr + s % dr
            c = bj * dc + (s + idx) % dc
            vec = _gather(A, r, c)
            if self.layout is Layout.BSGS:
                vec = np.roll(vec, self.plan.n1 * (idx // self.plan.n1))
            return vec
        if self.layout is Layout.PACKED_ROW:
            p = self.rows_per_payload
            k, c = s // dc, s % dc
            local = idx * p + k
            r = bi * dr + local
            ok = (k < p) & (local < self._rows_in_block(bi))
            vec = np.zeros(n)
            vec[ok] = _gather(A, r[ok], bj * dc + c[ok])
            return vec
        d = self.pad_rows
        vec = np.zeros(n)
        vec[: d * d] = _gather(A, s[: d * d] // d, s[: d * d] % d)
        return vec

    def materialize(self) -> "PackedMatrix":
        """Copy with every payload computed and stored."""
        stored = {b: np.stack(self.payloads(*b)) for b in self.blocks()}
        return PackedMatrix(**{**self._fields(), "stored": stored, "source": None})

    def _fields(self) -> dict:
        return {
            "layout": self.layout,
            "rows": self.rows,
            "cols": self.cols,
            "pad_rows": self.pad_rows,
            "pad_cols": self.pad_cols,
            "slot_count": self.slot_count,
            "block_rows": self.block_rows,
            "block_cols": self.block_cols,
            "plan": self.plan,
            "rows_per_payload": self.rows_per_payload,
        }

    # --- layout inverse ---------------------------------------------

    def unpack(self) -> np.ndarray:
        """Rebuild the R x C matrix from the payloads alone."""
        out = np.zeros((self.pad_rows, self.pad_cols))
        n = self.slot_count
        s = np.arange(n)
        dr, dc = self.block_rows, self.block_cols
        for bi, bj in self.blocks():
            for idx in range(self.payload_count(bi, bj)):
                vec = self.payload(idx, bi, bj)
                if self.layout in (Layout.DIAGONAL, Layout.BSGS):
                    if self.layout is Layout.BSGS:
                        vec = np.roll(vec, -self.plan.n1 * (idx // self.plan.n1))
                    out[bi * dr + s % dr, bj * dc + (s + idx) % dc] = vec
                elif self.layout is Layout.PACKED_ROW:
                    p = self.rows_per_payload
                    for k in range(p):
                        local = idx * p + k
                        if local >= self._rows_in_block(bi):
                            break
                        out[bi * dr + local, bj * dc : (bj + 1) * dc] = vec[k * dc : (k + 1) * dc]
                else:
                    d = self.pad_rows
                    out[:d, :d] = vec[: d * d].reshape(d, d)
        return out[: self.rows, : self.cols]

    # --- serialization ------------------------------------------------

    def descriptor(self) -> dict:
        return {
            "layout": self.layout.value,
            "rows": self.rows,
            "cols": self.cols,
            "pad_rows": self.pad_rows,
            "pad_cols": self.pad_cols,
            "slot_count": self.slot_count,
            "block_rows": self.block_rows,
            "block_cols": self.block_cols,
            "grid": list(self.grid),
            "plan": None if self.plan is None else [self.plan.n1, self.plan.n2],
            "rows_per_payload": self.rows_per_payload,
            "payloads": [[bi, bj, self.payload_count(bi, bj)] for bi, bj in self.blocks()],
        }

    def to_bytes(self) -> bytes:
        """Payloads concatenated in (block, index) order as little-endian float64."""
        parts = [np.asarray(self.payload(i, *b), dtype="<f8").tobytes() for b in self.blocks() for i in range(self.payload_count(*b))]
        return b"".join(parts)

    def save(self, stem) -> None:
        with open(f"{stem}.json", "w") as fh:
            json.dump(self.descriptor(), fh, indent=2, sort_keys=True)
        with open(f"{stem}.bin", "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_serialized(cls, descriptor: dict, data: bytes) -> "PackedMatrix":
        d = descriptor
        flat = np.frombuffer(data, dtype="<f8")
        n = d["slot_count"]
        stored, pos = {}, 0
        for bi, bj, count in d["payloads"]:
            stored[(bi, bj)] = flat[pos : pos + count * n].reshape(count, n)
            pos += count * n
        if pos != flat.size:
            raise ValueError("payload data does not match descriptor")
        plan = BsgsPlan(*d["plan"]) if d["plan"] else None
        return cls(
            Layout(d["layout"]), d["rows"], d["cols"], d["pad_rows"], d["pad_cols"], n,
            d["block_rows"], d["block_cols"], plan, d["rows_per_payload"], None, stored,
        )

    @classmethod
    def load(cls, stem) -> "PackedMatrix":
        with open(f"{stem}.json") as fh:
            desc = json.load(fh)
        with open(f"{stem}.bin", "rb") as fh:
            return cls.from_serialized(desc, fh.read())


def _matvec_dims(A, n: int) -> tuple:
    R, C = A.shape
    pr, pc = next_pow2(R), next_pow2(C)
    return R, C, pr, pc, min(pr, n), min(pc, n)


def pack_diagonals(A, n: int) -> PackedMatrix:
    A = _as_source(A)
    R, C, pr, pc, dr, dc = _matvec_dims(A, n)
    return PackedMatrix(Layout.DIAGONAL, R, C, pr, pc, n, dr, dc, source=A)


def pack_bsgs(A, n: int, plan: BsgsPlan | None = None) -> PackedMatrix:
    A = _as_source(A)
    R, C, pr, pc, dr, dc = _matvec_dims(A, n)
    plan = plan or BsgsPlan.default(dc)
    plan.check(dc)
    return PackedMatrix(Layout.BSGS, R, C, pr, pc, n, dr, dc, plan=plan, source=A)


def pack_rows(A, n: int) -> PackedMatrix:
    """p = min(n / pad_cols, R) consecutive rows per payload at stride pad_cols."""
    A = _as_source(A)
    R, C, pr, pc, dr, dc = _matvec_dims(A, n)
    p = max(1, min(n // dc, min(R, dr)))
    return PackedMatrix(Layout.PACKED_ROW, R, C, pr, pc, n, dr, dc, rows_per_payload=p, source=A)


def pack_rowmajor(A, n: int) -> PackedMatrix:
    A = _as_source(A)
    R, C = A.shape
    d = next_pow2(max(R, C))
    if d * d > n:
        raise ValueError(f"{d}x{d} row-major block needs {d * d} slots but only {n} exist")
    return PackedMatrix(Layout.ROW_MAJOR, R, C, d, d, n, d, d, source=A)


def unpack_rowmajor(slots, d: int, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    out = np.asarray(slots)[: d * d].reshape(d, d)
    return out[: rows or d, : cols or d]


PACKERS: dict[str, Callable] = {
    "row": pack_rows,
    "diag": pack_diagonals,
    "bsgs": pack_bsgs,
}


# --- tiling --------------------------------------------------------------


@dataclass(frozen=True)
class Tiling:
    rows: int
    cols: int
    block_rows: int
    block_cols: int
    grid: tuple
    blocks: dict = field(repr=False, compare=False)

    def reassemble(self) -> np.ndarray:
        gr, gc = self.grid
        out = np.zeros((gr * self.block_rows, gc * self.block_cols))
        for (i, j), blk in self.blocks.items():
            out[i * self.block_rows : (i + 1) * self.block_rows, j * self.block_cols : (j + 1) * self.block_cols] = blk
        return out[: self.rows, : self.cols]


def tile_matrix(A, n: int, layout: str = "matvec") -> Tiling:
    """Split a zero-padded matrix into power-of-two blocks that fit one ciphertext.

    Matvec layouts cap each padded dim at n; the row-major layout uses square
    blocks with d_b^2 <= n.
    """
    A = np.asarray(A, dtype=np.float64)
    R, C = A.shape
    pr, pc = next_pow2(R), next_pow2(C)
    if layout == "rowmajor":
        cap = 1 << (log2(n) // 2)
        br = bc = min(max(pr, pc), cap)
        pr, pc = max(pr, br), max(pc, bc)
    elif layout == "matvec":
        br, bc = min(pr, n), min(pc, n)
    else:
        raise ValueError(f"unknown layout {layout!r}")
    grid = (-(-R // br), -(-C // bc))
    padded = np.zeros((grid[0] * br, grid[1] * bc))
    padded[:R, :C] = A
    blocks = {
        (i, j): padded[i * br : (i + 1) * br, j * bc : (j + 1) * bc].copy()
        for i in range(grid[0])
        for j in range(grid[1])
    }
    return Tiling(R, C, br, bc, grid, blocks)
