"""Backend-neutral slot-vector contract.

Kernels only ever see the seven operations defined here (encode, add, mul,
rotate, rescale, mod_down, bootstrap). Level, scale and rotation-key checks
live in :class:`Backend`; subclasses supply the payload arithmetic.
"""
from __future__ import annotations

import abc
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable

import numpy as np

from .params import CkksParams
from .trace import OpTrace

_ids = itertools.count(1)


class HelixError(Exception):
    """Base class for contract violations raised by backends and kernels."""


class LevelMismatch(HelixError, ValueError):
    pass


class ScaleMismatch(HelixError, ValueError):
    pass


class LevelExhausted(HelixError, ValueError):
    """No level left for a rescale, multiply or kernel."""


class MissingRotationKey(HelixError, KeyError):
    pass


@dataclass(frozen=True)
class Plaintext:
    payload: Any = field(repr=False)
    level: int
    scale: Fraction


@dataclass(frozen=True)
class Ciphertext:
    payload: Any = field(repr=False)
    level: int
    scale: Fraction
    slot_count: int
    id: int = field(default_factory=lambda: next(_ids), compare=False)


@dataclass(frozen=True)
class RotationKeySet:
    """Slot offsets (mod n) for which rotation keys exist."""

    amounts: frozenset
    slot_count: int

    @classmethod
    def build(cls, amounts: Iterable[int], slot_count: int) -> "RotationKeySet":
        norm = {int(k) % slot_count for k in amounts}
        norm.discard(0)
        return cls(frozenset(norm), slot_count)

    def __contains__(self, k: int) -> bool:
        k %= self.slot_count
        return k == 0 or k in self.amounts

    def __len__(self):
        return len(self.amounts)


def as_scale(value) -> Fraction:
    scale = value if isinstance(value, Fraction) else Fraction(value)
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {value}")
    return scale


class Backend(abc.ABC):
    """Level/scale bookkeeping and instrumentation common to all backends."""

    name = "abstract"

    def __init__(self, params: CkksParams, rotations: Iterable[int] = (), trace: OpTrace | None = None):
        self.params = params
        self.rotation_keys = RotationKeySet.build(rotations, params.slot_count)
        self.trace = trace if trace is not None else OpTrace()

    # --- parameters -----------------------------------------------------

    @property
    def n(self) -> int:
        return self.params.slot_count

    @property
    def delta(self) -> Fraction:
        return self.params.delta

    @property
    def max_level(self) -> int:
        return self.params.max_level

    @property
    def l_boot(self) -> int:
        return self.params.l_boot

    def modulus(self, level: int) -> int:
        """The prime dropped by a rescale at ``level``."""
        return self.params.moduli[level]

    def _vector(self, values) -> np.ndarray:
        vec = np.asarray(values, dtype=np.float64).ravel()
        if vec.size > self.n:
            raise ValueError(f"vector of length {vec.size} exceeds {self.n} slots")
        if vec.size < self.n:
            vec = np.concatenate([vec, np.zeros(self.n - vec.size)])
        return vec

    def _check_level(self, level: int) -> int:
        if not 0 <= level <= self.max_level:
            raise LevelMismatch(f"level {level} outside [0, {self.max_level}]")
        return int(level)

    # --- client side ----------------------------------------------------

    def encode(self, values, level: int | None = None, scale=None) -> Plaintext:
        level = self._check_level(self.max_level if level is None else level)
        scale = as_scale(self.delta if scale is None else scale)
        return Plaintext(self._encode(self._vector(values), level, scale), level, scale)

    def encrypt(self, values, level: int | None = None, scale=None) -> Ciphertext:
        pt = self.encode(values, level, scale)
        return Ciphertext(self._encrypt(pt), pt.level, pt.scale, self.n)

    def decrypt(self, ct: Ciphertext) -> np.ndarray:
        """Decrypt and decode to real slot values."""
        return self._decrypt(ct)

    # --- the slot API ---------------------------------------------------

    def add(self, a: Ciphertext, b: Ciphertext | Plaintext) -> Ciphertext:
        if a.level != b.level:
            raise LevelMismatch(f"add: level {a.level} vs {b.level}")
        if a.scale != b.scale:
            raise ScaleMismatch(f"add: scale {float(a.scale):.6g} vs {float(b.scale):.6g}")
        if isinstance(b, Ciphertext):
            payload, op = self._add_ct(a, b), "ct_add"
        else:
            payload, op = self._add_pt(a, b), "pt_add"
        self.trace.record(op, a.level)
        return Ciphertext(payload, a.level, a.scale, a.slot_count)

    def mul(self, a: Ciphertext, b: Ciphertext | Plaintext) -> Ciphertext:
        if a.level != b.level:
            raise LevelMismatch(f"mul: level {a.level} vs {b.level}")
        if a.level < 1:
            raise LevelExhausted("mul at level 0 leaves nothing to rescale into")
        if isinstance(b, Ciphertext):
            payload, op = self._mul_ct(a, b), "ct_mul"
        else:
            payload, op = self._mul_pt(a, b), "pt_mul"
        self.trace.record(op, a.level)
        return Ciphertext(payload, a.level, a.scale * b.scale, a.slot_count)

    def rotate(self, a: Ciphertext, k: int) -> Ciphertext:
        """Cyclic left shift: slot i of the result is slot (i + k) mod n of ``a``."""
        k = int(k) % self.n
        if k == 0:
            return a
        if k not in self.rotation_keys:
            raise MissingRotationKey(f"no rotation key for amount {k}")
        payload = self._rotate(a, k)
        self.trace.record("rotate", a.level)
        return Ciphertext(payload, a.level, a.scale, a.slot_count)

    def rescale(self, a: Ciphertext) -> Ciphertext:
        if a.level < 1:
            raise LevelExhausted("rescale at level 0: no levels remain")
        if a.scale <= self.delta:
            raise ScaleMismatch("rescale requires a preceding multiplication (scale > delta)")
        payload = self._rescale(a)
        self.trace.record("rescale", a.level)
        return Ciphertext(payload, a.level - 1, a.scale / self.modulus(a.level), a.slot_count)

    def mod_down(self, a: Ciphertext, target_level: int) -> Ciphertext:
        if target_level > a.level:
            raise LevelMismatch(f"mod_down cannot raise level {a.level} to {target_level}")
        if target_level < 0:
            raise LevelMismatch("target level must be non-negative")
        if target_level == a.level:
            return a
        payload = self._mod_down(a, target_level)
        self.trace.record("mod_down", a.level)
        return Ciphertext(payload, target_level, a.scale, a.slot_count)

    def bootstrap(self, a: Ciphertext) -> Ciphertext:
        payload = self._bootstrap(a)
        self.trace.record("bootstrap", a.level)
        return Ciphertext(payload, self.l_boot, a.scale, a.slot_count)

    # --- payload hooks --------------------------------------------------

    @abc.abstractmethod
    def _encode(self, vec: np.ndarray, level: int, scale: Fraction): ...

    @abc.abstractmethod
    def _encrypt(self, pt: Plaintext): ...

    @abc.abstractmethod
    def _decrypt(self, ct: Ciphertext) -> np.ndarray: ...

    @abc.abstractmethod
    def _add_ct(self, a: Ciphertext, b: Ciphertext): ...

    @abc.abstractmethod
    def _add_pt(self, a: Ciphertext, b: Plaintext): ...

    @abc.abstractmethod
    def _mul_ct(self, a: Ciphertext, b: Ciphertext): ...

    @abc.abstractmethod
    def _mul_pt(self, a: Ciphertext, b: Plaintext): ...

    @abc.abstractmethod
    def _rotate(self, a: Ciphertext, k: int): ...

    @abc.abstractmethod
    def _rescale(self, a: Ciphertext): ...

    @abc.abstractmethod
    def _mod_down(self, a: Ciphertext, target_level: int): ...

    @abc.abstractmethod
    def _bootstrap(self, a: Ciphertext): ...


def make_backend(params: CkksParams, rotations: Iterable[int] = (), trace: OpTrace | None = None, seed=None, backend: str | None = None):
    """Instantiate the backend named by ``params.backend`` (or ``backend``)."""
    kind = backend or params.backend
    if kind == "reference":
        from .reference import ReferenceBackend

        return ReferenceBackend(params, rotations, trace)
    if kind == "lattice":
        from .ckks.engine import LatticeBackend

        if params.backend != "lattice":
            params = params.with_backend("lattice")
        return LatticeBackend(params, rotations, trace, seed=seed)
    raise ValueError(f"unknown backend {kind!r}")
