"""Encrypted linear-algebra kernels written against the slot API.

Every kernel returns ``(ciphertext, KernelReport)``. Plaintext operands are
encoded at a scale chosen so that the following rescale lands exactly on
Delta; output scales are therefore exact, not approximately Delta.

Rotation convention: ``rotate(ct, k)`` is a cyclic left shift by k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial import chebyshev as C

from .backend import Ciphertext, LevelExhausted, Plaintext
from .packing import BsgsPlan, Layout, PackedMatrix, is_pow2, log2, make_mask, replicate
from .trace import OpTrace


@dataclass
class KernelReport:
    rotations: int
    pt_muls: int
    ct_muls: int
    adds: int
    levels_consumed: int
    output_scale: Fraction
    input_level: int = 0
    output_level: int = 0
    bootstraps: int = 0
    trace: OpTrace = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "rotations": self.rotations,
            "pt_muls": self.pt_muls,
            "ct_muls": self.ct_muls,
            "adds": self.adds,
            "levels_consumed": self.levels_consumed,
            "output_scale": float(self.output_scale),
            "input_level": self.input_level,
            "output_level": self.output_level,
            "bootstraps": self.bootstraps,
            "counts": self.trace.snapshot() if self.trace else {},
        }


class Recorder:
    """Forwards slot-API calls to a backend while keeping a private trace.

    The backend's own (possibly shared) trace is still updated; the private
    one is what a KernelReport is built from, so concurrent kernels on one
    backend do not pollute each other's counts.
    """

    def __init__(self, backend):
        self.backend = backend
        self.trace = OpTrace()

    @property
    def n(self):
        return self.backend.n

    @property
    def delta(self):
        return self.backend.delta

    def modulus(self, level):
        return self.backend.modulus(level)

    def encode(self, values, level, scale) -> Plaintext:
        return self.backend.encode(values, level, scale)

    def add(self, a, b):
        out = self.backend.add(a, b)
        self.trace.record("ct_add" if isinstance(b, Ciphertext) else "pt_add", a.level)
        return out

    def mul(self, a, b):
        out = self.backend.mul(a, b)
        self.trace.record("ct_mul" if isinstance(b, Ciphertext) else "pt_mul", a.level)
        return out

    def rotate(self, a, k):
        if int(k) % self.n == 0:
            return a
        out = self.backend.rotate(a, k)
        self.trace.record("rotate", a.level)
        return out

    def rescale(self, a):
        out = self.backend.rescale(a)
        self.trace.record("rescale", a.level)
        return out

    def mod_down(self, a, level):
        if level == a.level:
            return a
        out = self.backend.mod_down(a, level)
        self.trace.record("mod_down", a.level)
        return out

    def bootstrap(self, a):
        out = self.backend.bootstrap(a)
        self.trace.record("bootstrap", a.level)
        return out

    def report(self, level_in: int, out: Ciphertext) -> KernelReport:
        t = self.trace
        return KernelReport(
            rotations=t["rotate"],
            pt_muls=t["pt_mul"],
            ct_muls=t["ct_mul"],
            adds=t["ct_add"] + t["pt_add"],
            levels_consumed=level_in - out.level,
            output_scale=out.scale,
            input_level=level_in,
            output_level=out.level,
            bootstraps=t["bootstrap"],
            trace=t,
        )


def _ops(backend):
    return backend if isinstance(backend, Recorder) else Recorder(backend)


def _need_levels(ct: Ciphertext, levels: int, what: str) -> None:
    if ct.level < levels:
        raise LevelExhausted(f"{what} needs {levels} level(s), input is at level {ct.level}")


def _sum(ops, cts):
    acc = None
    for ct in cts:
        acc = ct if acc is None else ops.add(acc, ct)
    return acc


# --- rotate and sum ------------------------------------------------------


def rotate_and_sum(backend, ct: Ciphertext, span: int, stride: int = 1):
    """log2(span) rotate-add steps: slot s becomes sum_{k<span} ct[s + k*stride].

    Indices wrap mod n. The first slot of each group of ``span`` entries at
    the given stride therefore holds the group sum; when the data is periodic
    (or span*stride = n) every slot does. Negative strides sum towards higher
    slots, which the matmul kernel uses to replicate values.
    """
    if not is_pow2(span):
        raise ValueError(f"span must be a power of two, got {span}")
    ops = _ops(backend)
    out = ct
    for i in range(log2(span)):
        out = ops.add(out, ops.rotate(out, stride << i))
    return out, ops.report(ct.level, out)


def rotate_and_sum_rotations(span: int, stride: int = 1) -> list:
    return [stride << i for i in range(log2(span))]


# --- matrix-vector -------------------------------------------------------


def _as_inputs(x, gc: int) -> list:
    xs = list(x) if isinstance(x, (list, tuple)) else [x]
    if len(xs) != gc:
        raise ValueError(f"matrix has {gc} column blocks but {len(xs)} input ciphertexts were given")
    return xs


def _result(outs: list):
    return outs[0] if len(outs) == 1 else outs


def _encode_at(ops, vec, level: int, scale) -> Plaintext:
    return ops.encode(vec, level, scale)


def matvec_diag(backend, M: PackedMatrix, x) -> tuple:
    """y = M x with sum_i diag[i] * Rot(x, i): dc - 1 rotations per column block, 1 level."""
    if M.layout is not Layout.DIAGONAL:
        raise ValueError("matvec_diag expects a Diagonal-packed matrix")
    ops = _ops(backend)
    gr, gc = M.grid
    xs = _as_inputs(x, gc)
    level = xs[0].level
    _need_levels(xs[0], 1, "matvec_diag")
    q = ops.modulus(level)
    rotated = [[ops.rotate(xj, i) for i in range(M.block_cols)] for xj in xs]
    outs = []
    for bi in range(gr):
        terms = []
        for bj in range(gc):
            for i in range(M.block_cols):
                pt = _encode_at(ops, M.payload(i, bi, bj), level, q)
                terms.append(ops.mul(rotated[bj][i], pt))
        outs.append(ops.rescale(_sum(ops, terms)))
    return _result(outs), ops.report(level, outs[0])


def matvec_bsgs(backend, M: PackedMatrix, x, plan: BsgsPlan | None = None) -> tuple:
    """Baby-step giant-step diagonal method: (n1 - 1) + (n2 - 1) rotations, 1 level.

    Baby rotations of each input block are shared by every block row.
    """
    if M.layout is not Layout.BSGS:
        raise ValueError("matvec_bsgs expects a BsgsDiagonal-packed matrix")
    plan = plan or M.plan
    if plan != M.plan:
        raise ValueError(f"plan {plan} does not match packing plan {M.plan}")
    ops = _ops(backend)
    gr, gc = M.grid
    xs = _as_inputs(x, gc)
    level = xs[0].level
    _need_levels(xs[0], 1, "matvec_bsgs")
    q = ops.modulus(level)
    n1, n2 = plan.n1, plan.n2
    baby = [[ops.rotate(xj, k) for k in range(n1)] for xj in xs]
    outs = []
    for bi in range(gr):
        giants = []
        for j in range(n2):
            terms = []
            for bj in range(gc):
                for k in range(n1):
                    pt = _encode_at(ops, M.payload(n1 * j + k, bi, bj), level, q)
                    terms.append(ops.mul(baby[bj][k], pt))
            giants.append(ops.rotate(_sum(ops, terms), n1 * j))
        outs.append(ops.rescale(_sum(ops, giants)))
    return _result(outs), ops.report(level, outs[0])


def matvec_row(backend, M: PackedMatrix, x) -> tuple:
    """Packed-row method; y = M x lands in the first R slots. Always 2 levels.

    Per block row: multiply each row group by x and rescale, rotate_and_sum
    with span dc so each dot product sits at slot k*dc of its group, shift
    group g right by g*p, mask slot t*dc + g*p into accumulator B_t (second
    level), then move B_t left by t*(dc - 1) and add. Rotations:
    G*log2(dc) + (G - 1) + (p - 1) with G = ceil(R/p).
    """
    if M.layout is not Layout.PACKED_ROW:
        raise ValueError("matvec_row expects a PackedRow-packed matrix")
    ops = _ops(backend)
    gr, gc = M.grid
    xs = _as_inputs(x, gc)
    level = xs[0].level
    _need_levels(xs[0], 2, "matvec_row")
    dc, p, n = M.block_cols, M.rows_per_payload, ops.n
    q1, q2 = ops.modulus(level), ops.modulus(level - 1)
    outs = []
    for bi in range(gr):
        rows = M._rows_in_block(bi)
        groups = M.payload_count(bi, 0)
        shifted = []
        for g in range(groups):
            prods = [ops.mul(xs[bj], _encode_at(ops, M.payload(g, bi, bj), level, q1)) for bj in range(gc)]
            z = ops.rescale(_sum(ops, prods))
            z, _ = rotate_and_sum(ops, z, dc, 1)
            shifted.append(ops.rotate(z, -g * p))
        pieces = []
        for t in range(min(p, rows)):
            terms = []
            for g in range(groups):
                if g * p + t >= rows:
                    continue
                mask = np.zeros(n)
                mask[(t * dc + g * p) % n] = 1.0
                terms.append(ops.mul(shifted[g], _encode_at(ops, mask, level - 1, q2)))
            pieces.append(ops.rotate(_sum(ops, terms), t * (dc - 1)))
        outs.append(ops.rescale(_sum(ops, pieces)))
    return _result(outs), ops.report(level, outs[0])


def matvec(backend, M: PackedMatrix, x) -> tuple:
    kernel = {Layout.PACKED_ROW: matvec_row, Layout.DIAGONAL: matvec_diag, Layout.BSGS: matvec_bsgs}.get(M.layout)
    if kernel is None:
        raise ValueError(f"no matvec kernel for layout {M.layout.value}")
    return kernel(backend, M, x)


def required_rotations(M: PackedMatrix) -> set:
    """Rotation amounts a matvec over ``M`` will request."""
    dc = M.block_cols
    if M.layout is Layout.DIAGONAL:
        return set(range(1, dc))
    if M.layout is Layout.BSGS:
        return set(M.plan.baby_steps()) | set(M.plan.giant_steps())
    if M.layout is Layout.PACKED_ROW:
        p = M.rows_per_payload
        groups = max(M.payload_count(bi, 0) for bi in range(M.grid[0]))
        amounts = set(rotate_and_sum_rotations(dc))
        amounts |= {-g * p for g in range(1, groups)}
        amounts |= {t * (dc - 1) for t in range(1, p)}
        amounts.discard(0)
        return amounts
    raise ValueError(f"no matvec kernel for layout {M.layout.value}")


def expected_rotations(M: PackedMatrix) -> int:
    """Closed-form rotation count of the matvec kernel for ``M``."""
    gr, gc = M.grid
    dc = M.block_cols
    if M.layout is Layout.DIAGONAL:
        return gc * (dc - 1)
    if M.layout is Layout.BSGS:
        return gc * (M.plan.n1 - 1) + gr * (M.plan.n2 - 1)
    total = 0
    for bi in range(gr):
        rows = M._rows_in_block(bi)
        groups = math.ceil(rows / M.rows_per_payload)
        align = min(M.rows_per_payload, rows) - 1 if dc > 1 else 0  # t*(dc-1) = 0 is free
        total += groups * log2(dc) + (groups - 1) + align
    return total


def encrypt_input(backend, x, M: PackedMatrix, level: int | None = None):
    """Encrypt ``x`` replicated with period block_cols, one ciphertext per column block."""
    x = np.asarray(x, dtype=np.float64).ravel()
    dc, gc = M.block_cols, M.grid[1]
    cts = [backend.encrypt(replicate(x[j * dc : (j + 1) * dc], dc, backend.n), level) for j in range(gc)]
    return _result(cts)


def decode_output(values, M: PackedMatrix) -> np.ndarray:
    """Collect y from decrypted output slot vectors (one per block row)."""
    vals = values if isinstance(values, list) else [values]
    parts = [np.asarray(v)[: M._rows_in_block(i)] for i, v in enumerate(vals)]
    return np.concatenate(parts)[: M.rows]


# --- ciphertext-ciphertext matmul ---------------------------------------


def matmul_ctct(backend, A: Ciphertext, B: Ciphertext, d: int) -> tuple:
    """C = A B for d x d row-major ciphertexts, as a sum of d outer products.

    Counts: 2d pt-muls, d ct-muls, 2d(1 + log2 d) - 2 rotations, 2 levels.
    """
    if not is_pow2(d):
        raise ValueError(f"d = {d} is not a power of two")
    ops = _ops(backend)
    if d * d > ops.n:
        raise ValueError(f"d^2 = {d * d} exceeds {ops.n} slots")
    if A.level != B.level:
        raise ValueError(f"operands at different levels ({A.level}, {B.level})")
    if A.scale != B.scale:
        raise ValueError("operands at different scales")
    level = A.level
    _need_levels(A, 2, "matmul_ctct (requires a multiplicative level of 2)")
    q1, q2 = ops.modulus(level), ops.modulus(level - 1)
    a_scale = Fraction(q1)
    b_scale = Fraction(q1 * q2) / A.scale
    acc = None
    for j in range(d):
        a = ops.rescale(ops.mul(A, ops.encode(make_mask("column", j, d, ops.n).vector, level, a_scale)))
        b = ops.rescale(ops.mul(B, ops.encode(make_mask("row", j, d, ops.n).vector, level, b_scale)))
        a = ops.rotate(a, j)
        b = ops.rotate(b, d * j)
        a, _ = rotate_and_sum(ops, a, d, -1)
        b, _ = rotate_and_sum(ops, b, d, -d)
        prod = ops.mul(a, b)
        acc = prod if acc is None else ops.add(acc, prod)
    out = ops.rescale(acc)
    return out, ops.report(level, out)


def matmul_rotations(d: int) -> set:
    amounts = set(rotate_and_sum_rotations(d, -1)) | set(rotate_and_sum_rotations(d, -d))
    amounts |= {j for j in range(1, d)} | {d * j for j in range(1, d)}
    return amounts


def matmul_expected(d: int) -> dict:
    return {"rotations": 2 * d * (1 + log2(d)) - 2, "pt_muls": 2 * d, "ct_muls": d, "levels": 2}


# --- polynomial evaluation ----------------------------------------------

_INF = 10**9


def _baby_count(degree: int) -> int:
    k = 2
    while k < math.ceil(math.sqrt(degree + 1)):
        k *= 2
    return k


def _giant_degree(degree: int, k: int) -> int:
    m = k
    while 2 * m <= degree:
        m *= 2
    return m


def _power_drop(i: int) -> int:
    """Levels below the input at which y^i (or T_i for i a power of two) is produced."""
    return 0 if i <= 1 else math.ceil(math.log2(i))


def _out_drop(degree: int, k: int) -> int:
    """Levels consumed, below the basis input, to evaluate a dense polynomial of ``degree``."""
    if degree < k:
        return 0 if degree == 0 else _power_drop(degree) + 1
    m = _giant_degree(degree, k)
    q_deg = degree - m
    need = _power_drop(m) + 1
    if q_deg > 0:
        need = max(need, _out_drop(q_deg, k) + 1)
    return max(need, _out_drop(m - 1, k))


def polyeval_depth(degree: int, domain_map: bool = False) -> int:
    """Levels consumed by :func:`polyeval` for a dense polynomial of ``degree``.

    At least ceil(log2(degree + 1)); one more for degrees just below a power
    of two (7, 15, 29-31, 61-63, 121-127, ...), where the top products must
    also land on an exact target scale. A Chebyshev domain map adds one.
    """
    if degree < 1:
        raise ValueError("degree must be at least 1")
    return max(1, _out_drop(degree, _baby_count(degree))) + (1 if domain_map else 0)


def _scaled(ops, ct, c, level, scale):
    """c * ct landing exactly at (level, scale); costs one rescale."""
    ct = ops.mod_down(ct, level + 1)
    pt_scale = Fraction(scale) * ops.modulus(level + 1) / ct.scale
    pt = ops.encode(np.full(ops.n, float(c)), level + 1, pt_scale)
    return ops.rescale(ops.mul(ct, pt))


class _Evaluator:
    def __init__(self, ops, y: Ciphertext, degree: int, basis: str):
        self.ops = ops
        self.basis = basis
        self.k = _baby_count(degree)
        self.powers = {1: y}
        self.giants = {}
        self.top = y.level
        for i in range(2, self.k):
            self._monomial(i)
        m = self.k
        while m <= degree:
            self.giants[m] = self._giant(m)
            m *= 2

    def _product(self, a, b):
        lvl = min(a.level, b.level)
        a, b = self.ops.mod_down(a, lvl), self.ops.mod_down(b, lvl)
        return self.ops.rescale(self.ops.mul(a, b))

    def _monomial(self, i):
        if i in self.powers:
            return self.powers[i]
        hi = 1 << (i.bit_length() - 1)
        if hi == i:
            out = self._product(self._monomial(i // 2), self._monomial(i // 2))
        else:
            out = self._product(self._monomial(hi), self._monomial(i - hi))
        self.powers[i] = out
        return out

    def _cheb_pow2(self, i):
        # T_2m = 2 T_m^2 - 1
        if i == 1:
            return self.powers[1]
        if i in self.giants:
            return self.giants[i]
        half = self._cheb_pow2(i // 2)
        sq = self._product(half, half)
        two = self.ops.add(sq, sq)
        out = self.ops.add(two, self.ops.encode(np.full(self.ops.n, -1.0), two.level, two.scale))
        self.giants[i] = out
        return out

    def _giant(self, m):
        return self._monomial(m) if self.basis == "power" else self._cheb_pow2(m)

    def scaled(self, ct, c, level, scale):
        return _scaled(self.ops, ct, c, level, scale)

    def leaf(self, coeffs, level, scale):
        """sum_i c_i y^i (power-basis coefficients) at exactly (level, scale)."""
        terms = [self.scaled(self.powers[i], c, level, scale) for i, c in enumerate(coeffs) if i and c != 0]
        if not terms:
            terms = [self.scaled(self.powers[1], 0.0, level, scale)]
        out = _sum(self.ops, terms)
        if len(coeffs) and coeffs[0] != 0:
            out = self.ops.add(out, self.ops.encode(np.full(self.ops.n, float(coeffs[0])), level, scale))
        return out

    def evaluate(self, coeffs, level, scale):
        coeffs = np.trim_zeros(np.asarray(coeffs, dtype=np.float64), "b")
        if coeffs.size == 0:
            coeffs = np.zeros(1)
        degree = coeffs.size - 1
        if degree < self.k:
            mono = coeffs if self.basis == "power" else C.cheb2poly(coeffs)
            return self.leaf(mono, level, scale)
        m = _giant_degree(degree, self.k)
        G = self.giants[m]
        if self.basis == "power":
            q, r = coeffs[m:], coeffs[:m]
        else:
            basis_m = np.zeros(m + 1)
            basis_m[m] = 1.0
            q, r = C.chebdiv(coeffs, basis_m)
        q = np.trim_zeros(np.atleast_1d(q), "b")
        if q.size <= 1:
            prod = self.scaled(G, q[0] if q.size else 0.0, level, scale)
        else:
            Gd = self.ops.mod_down(G, level + 1)
            q_scale = Fraction(scale) * self.ops.modulus(level + 1) / Gd.scale
            qc = self.evaluate(q, level + 1, q_scale)
            prod = self.ops.rescale(self.ops.mul(qc, Gd))
        if np.any(np.asarray(r) != 0):
            return self.ops.add(prod, self.evaluate(r, level, scale))
        return prod


def polyeval(backend, ct: Ciphertext, coeffs, basis: str = "power", domain=None) -> tuple:
    """Slot-wise p(x) by Paterson-Stockmeyer.

    ``basis`` is "power" (p = sum c_i x^i) or "chebyshev" (p = sum c_i T_i(y)
    with y the affine map of ``domain`` onto [-1, 1]; one extra level when
    the domain is not already [-1, 1]). Output scale is exactly Delta.
    """
    if basis not in ("power", "chebyshev"):
        raise ValueError(f"unknown basis {basis!r}")
    ops = _ops(backend)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    degree = max(1, len(np.trim_zeros(coeffs, "b")) - 1)
    lo, hi = (-1.0, 1.0) if domain is None else map(float, domain)
    use_map = basis == "chebyshev" and (lo, hi) != (-1.0, 1.0)
    depth = polyeval_depth(degree, use_map)
    _need_levels(ct, depth, f"polyeval of degree {degree}")
    level_in = ct.level
    y = ct
    if use_map:
        y = _scaled(ops, ct, 2.0 / (hi - lo), ct.level - 1, ops.delta)
        shift = -(hi + lo) / (hi - lo)
        if shift:
            y = ops.add(y, ops.encode(np.full(ops.n, shift), y.level, y.scale))
    ev = _Evaluator(ops, y, degree, basis)
    out = ev.evaluate(coeffs, level_in - depth, ops.delta)
    return out, ops.report(level_in, out)


def horner(coeffs, x) -> np.ndarray:
    """Cleartext power-basis oracle."""
    out = np.zeros_like(np.asarray(x, dtype=np.float64))
    for c in reversed(list(coeffs)):
        out = out * x + c
    return out


def gelu(x) -> np.ndarray:
    from scipy.special import erf

    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def gelu_chebyshev(degree: int = 127, interval=(-8.0, 8.0)) -> np.ndarray:
    """Chebyshev coefficients (on ``interval`` mapped to [-1, 1]) interpolating GeLU."""
    lo, hi = interval
    return C.chebinterpolate(lambda t: gelu(0.5 * (hi - lo) * t + 0.5 * (hi + lo)), degree)


def chebyshev_eval(coeffs, x, interval=(-1.0, 1.0)) -> np.ndarray:
    lo, hi = interval
    return C.chebval((2 * np.asarray(x) - (hi + lo)) / (hi - lo), coeffs)
