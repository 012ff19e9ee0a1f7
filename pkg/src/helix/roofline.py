"""Analytic roofline model for CKKS primitives.

Counts are per coefficient-limb (one residue of one polynomial coefficient,
a 64-bit word). Every pass over a polynomial is modeled as streaming through
DRAM: nothing is assumed to stay in cache between passes, and switching keys
are loaded in full for every multiply or rotation. Operation weights:

    k_add  = 2          add/sub plus conditional reduction
    k_mul  = 4          multiply, Shoup quotient multiply, subtract, reduce
    k_ntt  = 6 log2 N   per coefficient-limb of a full transform (3 ops per
                        butterfly half, log2 N stages); each stage reads and
                        writes the word and its share of twiddle+quotient,
                        i.e. 24 bytes per stage.

With these weights add is exactly 1/12 ops/byte and transform-heavy
primitives approach 1/4.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

WORD = 8
K_ADD = 2
K_MUL = 4
K_PERM = 1
NTT_OPS_PER_STAGE = 6
NTT_BYTES_PER_STAGE = 24

PRIMITIVES = ("add", "mul", "rotate")


@dataclass(frozen=True)
class MachineProfile:
    peak_gops: float = 115.2
    bandwidth_gbs: float = 100.0
    name: str = "default-48t-2.4GHz"

    def __post_init__(self):
        if not (self.peak_gops > 0 and self.bandwidth_gbs > 0):
            raise ValueError("peak_gops and bandwidth_gbs must both be positive")

    @property
    def ridge_point(self) -> float:
        return self.peak_gops / self.bandwidth_gbs

    @classmethod
    def load(cls, path) -> "MachineProfile":
        with open(path) as fh:
            doc = json.load(fh)
        return cls(float(doc["peak_gops"]), float(doc["bandwidth_gbs"]), doc.get("name", "custom"))


@dataclass(frozen=True)
class CostModel:
    """Cost formulas for ring degree N, top level L and ``dnum`` key-switching digits."""

    N: int = 1 << 16
    L: int = 20
    dnum: int = 3

    def __post_init__(self):
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two")
        if self.dnum < 1 or self.L < 1:
            raise ValueError("L and dnum must be positive")

    @classmethod
    def for_params(cls, params, dnum: int | None = None) -> "CostModel":
        """Model of a parameter set; by default one digit per chain limb, as the engine does."""
        return cls(params.ring_degree, params.max_level, dnum or params.max_level + 1)

    @property
    def log_n(self) -> int:
        return self.N.bit_length() - 1

    def _check(self, level: int) -> None:
        if not 0 <= level <= self.L:
            raise ValueError(f"level {level} outside [0, {self.L}]")

    # building blocks, all returning (ops, bytes)

    def ct_bytes(self, level: int) -> int:
        return 2 * (level + 1) * self.N * WORD

    def key_bytes(self) -> int:
        return 2 * self.dnum * (self.L + 2) * self.N * WORD

    def _ntt(self, limbs: int):
        cl = limbs * self.N
        return cl * NTT_OPS_PER_STAGE * self.log_n, cl * NTT_BYTES_PER_STAGE * self.log_n

    def _stream(self, limbs: int, ops_per: int, reads: int, writes: int):
        cl = limbs * self.N
        return cl * ops_per, cl * (reads + writes) * WORD

    def key_switch(self, level: int):
        """Hybrid key switch of one polynomial at ``level``: INTT, mod-up, inner product, mod-down."""
        a = level + 1
        ext = level + 2
        digits = min(self.dnum, a)
        alpha = math.ceil((self.L + 1) / self.dnum)
        parts = [
            self._ntt(a),  # to coefficient form
            (digits * ext * self.N * min(alpha, a) * K_MUL, (a + digits * ext) * self.N * WORD),  # basis extension
            self._ntt(digits * ext),
            (digits * ext * self.N * 2 * (K_MUL + K_ADD), (digits * ext + 2 * ext) * self.N * WORD + self.key_bytes()),
            self._ntt(2),  # special limb of both outputs back to coefficients
            self._stream(2 * a, K_MUL, 1, 1),  # lift the correction
            self._ntt(2 * a),
            self._stream(2 * a, K_ADD + K_MUL, 2, 1),  # subtract and multiply by P^-1
        ]
        return tuple(map(sum, zip(*parts)))

    def cost(self, primitive: str, level: int):
        self._check(level)
        a = level + 1
        N = self.N
        if primitive in ("add", "ct_add"):
            return K_ADD * 2 * a * N, 3 * self.ct_bytes(level)
        if primitive == "pt_add":
            return K_ADD * a * N, (2 + 1 + 2) * a * N * WORD
        if primitive == "pt_mul":
            return K_MUL * 2 * a * N, (2 + 1 + 2) * a * N * WORD
        if primitive in ("mul", "ct_mul"):
            tensor = (a * N * (4 * K_MUL + K_ADD), 7 * a * N * WORD)
            fold = self._stream(2 * a, K_ADD, 2, 1)
            return tuple(map(sum, zip(tensor, self.key_switch(level), fold)))
        if primitive == "rotate":
            perm = self._stream(2 * a, K_PERM, 1, 1)
            fold = self._stream(a, K_ADD, 2, 1)
            return tuple(map(sum, zip(perm, self.key_switch(level), fold)))
        if primitive == "rescale":
            if level < 1:
                raise ValueError("rescale needs level >= 1")
            return tuple(map(sum, zip(self._ntt(2), self._stream(2 * level, K_MUL, 1, 1), self._ntt(2 * level), self._stream(2 * level, K_ADD + K_MUL, 2, 1))))
        if primitive == "mod_down":
            return 0, self.ct_bytes(level)
        if primitive == "bootstrap":
            return 0, 0  # mock refresh: not modeled
        raise ValueError(f"unknown primitive {primitive!r}")

    __call__ = cost


def model_cost(primitive: str, params=None, level: int = 1, model: CostModel | None = None):
    """(int_ops, bytes) of one primitive at ``level``; 1 <= level <= L for add/mul/rotate."""
    model = model or (CostModel.for_params(params) if params is not None else CostModel())
    if primitive in PRIMITIVES and not 1 <= level <= model.L:
        raise ValueError(f"level {level} outside [1, {model.L}]")
    return model.cost(primitive, level)


def intensity(int_ops, nbytes) -> float:
    if nbytes <= 0:
        raise ZeroDivisionError("intensity needs a positive byte count")
    return int_ops / nbytes


def attainable(ai: float, profile: MachineProfile) -> float:
    """Attainable GOPS: min(peak, intensity * bandwidth)."""
    return min(profile.peak_gops, ai * profile.bandwidth_gbs)


def measure_trace(trace, params=None, model: CostModel | None = None):
    """Sum model costs over every (op, level) a trace recorded."""
    model = model or (CostModel.for_params(params) if params is not None else CostModel())
    ops = nbytes = 0
    for (op, level), count in sorted(trace.by_level.items()):
        o, b = model.cost(op, level)
        ops += o * count
        nbytes += b * count
    return ops, nbytes


@dataclass(frozen=True)
class RooflineRow:
    primitive: str
    level: int
    int_ops: int
    bytes: int
    intensity: float
    attainable_gops: float
    bound: str


@dataclass(frozen=True)
class RooflineReport:
    rows: tuple
    profile: MachineProfile
    model: CostModel

    def __len__(self):
        return len(self.rows)

    def to_dict(self) -> dict:
        return {
            "profile": asdict(self.profile),
            "model": asdict(self.model),
            "ridge_point": self.profile.ridge_point,
            "rows": [asdict(r) for r in self.rows],
        }


def roofline_report(profile: MachineProfile | None = None, model: CostModel | None = None, primitives=PRIMITIVES, levels=range(1, 21)) -> RooflineReport:
    profile = profile or MachineProfile()
    model = model or CostModel()
    rows = []
    for prim in primitives:
        for level in levels:
            ops, nbytes = model_cost(prim, level=level, model=model)
            ai = intensity(ops, nbytes)
            bound = "memory" if ai < profile.ridge_point else "compute"
            rows.append(RooflineRow(prim, level, ops, nbytes, ai, attainable(ai, profile), bound))
    return RooflineReport(tuple(rows), profile, model)


CSV_COLUMNS = ("primitive", "level", "ops", "bytes", "intensity", "attainable", "bound")


def report_csv(report: RooflineReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow([r.primitive, r.level, r.int_ops, r.bytes, f"{r.intensity:.9g}", f"{r.attainable_gops:.9g}", r.bound])
    return buf.getvalue()


def report_svg(report: RooflineReport) -> str:
    """Log-log roofline: bandwidth slope, peak line, one marker per (primitive, level)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    prof = report.profile
    with matplotlib.rc_context({"svg.hashsalt": "helix-roofline", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.4))
        ais = [r.intensity for r in report.rows]
        lo = min(min(ais), prof.ridge_point) / 4
        hi = max(max(ais), prof.ridge_point) * 4
        xs = [lo, prof.ridge_point, hi]
        ax.plot(xs, [min(prof.peak_gops, x * prof.bandwidth_gbs) for x in xs], color="black", lw=1.2, label="roofline")
        ax.axvline(prof.ridge_point, color="grey", ls=":", lw=0.8)
        for prim in dict.fromkeys(r.primitive for r in report.rows):
            pts = [r for r in report.rows if r.primitive == prim]
            ax.scatter([r.intensity for r in pts], [r.attainable_gops for r in pts], s=12, label=prim)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("arithmetic intensity (int ops / byte)")
        ax.set_ylabel("attainable GOPS")
        ax.set_title(f"{prof.name}: {prof.peak_gops:g} GOPS, {prof.bandwidth_gbs:g} GB/s")
        ax.legend(loc="lower right", fontsize=8)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def emit_roofline(report: RooflineReport, csv_path=None, svg_path=None) -> str:
    """Write CSV (and SVG if asked); returns the CSV text."""
    if not report.rows:
        raise ValueError("empty roofline report")
    text = report_csv(report)
    if csv_path:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    if svg_path:
        with open(svg_path, "w", encoding="utf-8") as fh:
            fh.write(report_svg(report))
    return text
