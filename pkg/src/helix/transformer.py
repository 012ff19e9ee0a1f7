"""Transformer pieces built from the kernels: FFN, pruning/merging, attention
scores and greedy bootstrap placement.

Tokens are row vectors, so the FFN computes ``x W1 -> act -> W2``. As a
matrix-vector product on a column vector that is ``W1^T x`` then ``W2^T h``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels as K
from .backend import LevelExhausted
from .packing import PackedMatrix, pack_bsgs, pack_diagonals, pack_rowmajor, pack_rows

DEFAULT_L_BOOT = 10
DEFAULT_INTERVAL = (-8.0, 8.0)

_PACK = {"bsgs": pack_bsgs, "diag": pack_diagonals, "row": pack_rows}
_MATVEC_LEVELS = {"bsgs": 1, "diag": 1, "row": 2}


class Unschedulable(ValueError):
    """A single layer needs more levels than a bootstrap can provide."""


@dataclass
class FfnConfig:
    d_h: int
    W1: np.ndarray | None = field(default=None, repr=False)
    W2: np.ndarray | None = field(default=None, repr=False)
    expansion: int = 4
    activation: str | None = "gelu"
    degree: int = 127
    interval: tuple = DEFAULT_INTERVAL
    merged: bool = False
    W_ffn: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.merged:
            if self.activation is not None:
                raise ValueError("a merged FFN has no activation")
            if self.W_ffn is None or tuple(self.W_ffn.shape) != (self.d_h, self.d_h):
                raise ValueError(f"merged FFN needs W_ffn of shape ({self.d_h}, {self.d_h})")
        else:
            hidden = self.expansion * self.d_h
            if self.W1 is None or tuple(self.W1.shape) != (self.d_h, hidden):
                raise ValueError(f"W1 must be {self.d_h}x{hidden}")
            if self.W2 is None or tuple(self.W2.shape) != (hidden, self.d_h):
                raise ValueError(f"W2 must be {hidden}x{self.d_h}")
        if self.activation not in (None, "gelu"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @classmethod
    def random(cls, d_h: int, seed: int = 0, expansion: int = 4, activation="gelu", degree: int = 7, low=-2, high=2, scale=1.0):
        """Integer-valued weights in [low, high] times ``scale`` (integers keep reference runs exact)."""
        rng = np.random.default_rng(seed)
        W1 = rng.integers(low, high + 1, (d_h, expansion * d_h)).astype(np.float64) * scale
        W2 = rng.integers(low, high + 1, (expansion * d_h, d_h)).astype(np.float64) * scale
        return cls(d_h, W1, W2, expansion, activation, degree)

    @property
    def hidden(self) -> int:
        return self.expansion * self.d_h

    def coefficients(self) -> np.ndarray:
        return K.gelu_chebyshev(self.degree, self.interval)

    def to_dict(self) -> dict:
        return {
            "d_h": self.d_h,
            "expansion": self.expansion,
            "activation": None if self.activation is None else {"kind": self.activation, "degree": self.degree, "interval": list(self.interval)},
            "merged": self.merged,
        }

    def save(self, stem, n: int) -> None:
        """JSON descriptor plus each weight matrix in the PackedMatrix binary format."""
        doc = self.to_dict()
        names = ["W_ffn"] if self.merged else ["W1", "W2"]
        doc["weights"] = {}
        for name in names:
            packed = pack_rows(np.asarray(getattr(self, name), dtype=np.float64), n)
            packed.save(f"{stem}.{name}")
            doc["weights"][name] = f"{stem}.{name}"
        with open(f"{stem}.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, stem) -> "FfnConfig":
        with open(f"{stem}.json") as fh:
            doc = json.load(fh)
        weights = {k: PackedMatrix.load(v).unpack() for k, v in doc["weights"].items()}
        act = doc["activation"]
        kw = dict(d_h=doc["d_h"], expansion=doc["expansion"], merged=doc["merged"])
        if act is None:
            kw["activation"] = None
        else:
            kw.update(activation=act["kind"], degree=act["degree"], interval=tuple(act["interval"]))
        return cls(**kw, **weights)


def prune_and_merge(cfg: FfnConfig) -> FfnConfig:
    """Drop the activation and fold W1, W2 into one d_h x d_h map."""
    if cfg.merged:
        return cfg
    W_ffn = np.asarray(cfg.W1, dtype=np.float64) @ np.asarray(cfg.W2, dtype=np.float64)
    return FfnConfig(cfg.d_h, None, None, cfg.expansion, None, cfg.degree, cfg.interval, True, W_ffn)


def ffn_matmul_flops(d_h: int, expansion: int = 4, merged: bool = False) -> int:
    """Multiply-accumulate count of the FFN's matrix products for one token."""
    if merged:
        return d_h * d_h
    return 2 * d_h * expansion * d_h


def merge_flop_ratio(d_h: int, expansion: int = 4) -> float:
    return ffn_matmul_flops(d_h, expansion) / ffn_matmul_flops(d_h, expansion, merged=True)


def ffn_reference(cfg: FfnConfig, x, exact_gelu: bool = False) -> np.ndarray:
    """Cleartext oracle. The activation is the fitted polynomial unless ``exact_gelu``."""
    x = np.asarray(x, dtype=np.float64)
    if cfg.merged:
        return x @ cfg.W_ffn
    h = x @ cfg.W1
    if cfg.activation == "gelu":
        h = K.gelu(h) if exact_gelu else K.chebyshev_eval(cfg.coefficients(), h, cfg.interval)
    return h @ cfg.W2


# --- level planning ------------------------------------------------------


@dataclass(frozen=True)
class LayerPlan:
    layers: tuple  # ((name, level_cost), ...)
    bootstrap_points: frozenset = frozenset()
    l_boot: int = DEFAULT_L_BOOT

    @property
    def costs(self) -> list:
        return [c for _, c in self.layers]

    @property
    def bootstraps(self) -> int:
        return len(self.bootstrap_points)

    def simulate(self, start_level: int) -> list:
        """Level after each layer; raises if any layer would underflow."""
        level, out = start_level, []
        for i, (name, cost) in enumerate(self.layers):
            if i in self.bootstrap_points:
                level = self.l_boot
            if cost > level:
                raise LevelExhausted(f"layer {i} ({name}) needs {cost} levels, {level} remain")
            level -= cost
            out.append(level)
        return out

    def to_dict(self) -> dict:
        return {
            "layers": [{"name": n, "cost": c} for n, c in self.layers],
            "bootstrap_points": sorted(self.bootstrap_points),
            "L_boot": self.l_boot,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def place_bootstraps(plan: LayerPlan, L: int, l_boot: int | None = None, start_level: int | None = None) -> LayerPlan:
    """Greedy: bootstrap right before the first layer that would underflow.

    Greedy is optimal for a chain: delaying every refresh as long as possible
    never leaves fewer levels for later layers.
    """
    l_boot = plan.l_boot if l_boot is None else l_boot
    level = L if start_level is None else start_level
    points = set()
    for i, (name, cost) in enumerate(plan.layers):
        if cost > l_boot:
            raise Unschedulable(f"layer {i} ({name}) costs {cost} levels but L_boot is {l_boot}")
        if cost > level:
            points.add(i)
            level = l_boot
        level -= cost
    return replace(plan, bootstrap_points=frozenset(points), l_boot=l_boot)


def ffn_layers(cfg_or_variant, degree: int = 127, method: str = "bsgs", domain_map: bool = True) -> tuple:
    """(name, level_cost) stages for an FFN variant: "gelu", "none" or "merged"."""
    variant = cfg_or_variant
    if isinstance(cfg_or_variant, FfnConfig):
        cfg = cfg_or_variant
        degree = cfg.degree
        variant = "merged" if cfg.merged else ("gelu" if cfg.activation else "none")
        domain_map = tuple(cfg.interval) != (-1.0, 1.0)
    mv = _MATVEC_LEVELS[method]
    if variant == "merged":
        return (("W_ffn", mv),)
    if variant == "none":
        return (("W1", mv), ("W2", mv))
    if variant == "gelu":
        return (("W1", mv), ("gelu", K.polyeval_depth(degree, domain_map)), ("W2", mv))
    raise ValueError(f"unknown FFN variant {variant!r}")


def ffn_plan(variant, L: int = DEFAULT_L_BOOT, l_boot: int = DEFAULT_L_BOOT, degree: int = 127, method: str = "bsgs", start_level=None) -> LayerPlan:
    plan = LayerPlan(ffn_layers(variant, degree, method), l_boot=l_boot)
    return place_bootstraps(plan, L, l_boot, start_level)


# --- encrypted forward passes -------------------------------------------


def _packed(cfg: FfnConfig, n: int, method: str) -> list:
    mats = [np.asarray(cfg.W_ffn).T] if cfg.merged else [np.asarray(cfg.W1).T, np.asarray(cfg.W2).T]
    return [_PACK[method](M, n) for M in mats]


def _replicate(ops, y, M: PackedMatrix):
    """Tile a packed-row output (first R slots) with period block_rows, as the next layer expects."""
    period = M.block_rows
    outs = [K.rotate_and_sum(ops, c, M.slot_count // period, -period)[0] for c in (y if isinstance(y, list) else [y])]
    return outs if isinstance(y, list) else outs[0]


def ffn_rotations(cfg: FfnConfig, n: int, method: str = "bsgs") -> set:
    out = set()
    for M in _packed(cfg, n, method):
        out |= K.required_rotations(M)
        if method == "row":
            out |= set(K.rotate_and_sum_rotations(n // M.block_rows, -M.block_rows))
    return out


def encrypt_token(backend, cfg: FfnConfig, x, method: str = "bsgs", level: int | None = None):
    return K.encrypt_input(backend, x, _packed(cfg, backend.n, method)[0], level)


def ffn_forward(backend, cfg: FfnConfig, x, method: str = "bsgs", auto_bootstrap: bool = True) -> tuple:
    """Encrypted FFN for one token; returns (ciphertext, KernelReport).

    ``x`` must come from :func:`encrypt_token`. Bootstraps are inserted by
    :func:`place_bootstraps` starting from the input's level when
    ``auto_bootstrap`` is set; otherwise an underflow raises LevelExhausted.
    The output holds ``x W`` in its first d_h slots. With the packed-row
    method, intermediate outputs are re-replicated (rotations only, no level)
    because that kernel leaves its result in the leading slots.
    """
    ops = K.Recorder(backend)
    mats = _packed(cfg, backend.n, method)
    stages = ffn_layers(cfg, method=method)
    first = x[0] if isinstance(x, list) else x
    plan = LayerPlan(stages, l_boot=backend.l_boot)
    if auto_bootstrap:
        plan = place_bootstraps(plan, backend.max_level, backend.l_boot, start_level=first.level)

    def each(fn, ct):
        # matrices wider than one ciphertext carry a list of column blocks
        return [fn(c) for c in ct] if isinstance(ct, list) else fn(ct)

    ct = x
    mat_iter = iter(mats)
    for i, (name, cost) in enumerate(stages):
        if i in plan.bootstrap_points:
            ct = each(ops.bootstrap, ct)
        level = (ct[0] if isinstance(ct, list) else ct).level
        if level < cost:
            raise LevelExhausted(f"FFN stage {name} needs {cost} levels, ciphertext is at {level} (missing bootstrap?)")
        if name == "gelu":
            ct = each(lambda c: K.polyeval(ops, c, cfg.coefficients(), "chebyshev", cfg.interval)[0], ct)
        else:
            M = next(mat_iter)
            ct, _ = K.matvec(ops, M, ct)
            if method == "row" and i + 1 < len(stages):
                ct = _replicate(ops, ct, M)
    last = ct[0] if isinstance(ct, list) else ct
    return ct, ops.report(first.level, last)


def attention_scores(backend, Q_ct, Kt_ct, d: int) -> tuple:
    """S = Q K^T. ``Kt_ct`` must hold K^T row-major (see :func:`pack_keys`)."""
    return K.matmul_ctct(backend, Q_ct, Kt_ct, d)


def pack_keys(Kmat, n: int) -> PackedMatrix:
    """Row-major packing of K^T, so K's rows become the kernel's columns."""
    return pack_rowmajor(np.asarray(Kmat, dtype=np.float64).T, n)
