"""CKKS parameter sets, NTT-friendly prime search and the params JSON format."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

from sympy import isprime

PARAMS_ENV = "HELIX_PARAMS"
BACKENDS = ("reference", "lattice")

# Primes stay below 2**31 so that limb products fit in a signed 64-bit word.
WORD_LIMIT = 1 << 31


class ParamsError(ValueError):
    pass


def _is_power_of_two(x: int) -> bool:
    return x > 0 and (x & (x - 1)) == 0


@lru_cache(maxsize=None)
def ntt_primes(ring_degree: int, bits: int, count: int, exclude: tuple = ()) -> tuple:
    """Primes q ≡ 1 (mod 2N) closest to 2**bits, alternating above and below.

    Alternating keeps the running product of rescale divisors close to a power
    of two, so scales drift as little as possible.
    """
    step = 2 * ring_degree
    centre = (1 << bits) // step * step + 1
    found = []
    below, above = centre, centre + step
    take_above = False
    while len(found) < count:
        if take_above:
            cand, above = above, above + step
            if cand >= WORD_LIMIT:
                take_above = False
                continue
        else:
            cand, below = below, below - step
            if cand <= step:
                raise ParamsError(f"ran out of {bits}-bit primes for N={ring_degree}")
        take_above = not take_above
        if cand not in exclude and cand not in found and isprime(cand):
            found.append(cand)
    return tuple(found)


@lru_cache(maxsize=None)
def _largest_primes_below(limit: int, ring_degree: int, count: int, exclude: tuple = ()) -> tuple:
    step = 2 * ring_degree
    cand = (limit - 1) // step * step + 1
    found = []
    while len(found) < count:
        if cand <= step:
            raise ParamsError("no NTT-friendly prime below limit")
        if cand not in exclude and isprime(cand):
            found.append(cand)
        cand -= step
    return tuple(found)


@dataclass(frozen=True)
class CkksParams:
    """Ring degree, modulus chain and scale shared by every backend.

    ``moduli[i]`` is q_i; a ciphertext at level l carries limbs q_0..q_l.
    ``special_primes`` are only used by lattice key switching.
    """

    ring_degree: int
    max_level: int
    delta_log2: int
    moduli: tuple
    special_primes: tuple = ()
    backend: str = "reference"
    mock_bootstrap: bool = False
    l_boot: int | None = None
    insecure_toy: bool = False
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        N = self.ring_degree
        if not _is_power_of_two(N) or N < 4:
            raise ParamsError(f"ring degree must be a power of two >= 4, got {N}")
        if self.max_level < 1:
            raise ParamsError("max_level must be >= 1")
        object.__setattr__(self, "moduli", tuple(int(q) for q in self.moduli))
        object.__setattr__(self, "special_primes", tuple(int(p) for p in self.special_primes))
        if len(self.moduli) != self.max_level + 1:
            raise ParamsError(
                f"modulus chain has {len(self.moduli)} primes, expected L+1 = {self.max_level + 1}"
            )
        for q in self.moduli + self.special_primes:
            if q % (2 * N) != 1:
                raise ParamsError(f"modulus {q} is not 1 mod 2N={2 * N}")
            if q >= WORD_LIMIT:
                raise ParamsError(f"modulus {q} does not fit the 31-bit word limit")
        if len(set(self.moduli + self.special_primes)) != len(self.moduli) + len(self.special_primes):
            raise ParamsError("moduli must be distinct")
        if self.delta_log2 < 1:
            raise ParamsError("delta_log2 must be positive")
        if self.backend not in BACKENDS:
            raise ParamsError(f"unknown backend {self.backend!r}")
        if self.l_boot is None:
            object.__setattr__(self, "l_boot", self.max_level)
        if not 0 <= self.l_boot <= self.max_level:
            raise ParamsError("l_boot must lie in [0, L]")
        if self.backend == "lattice":
            if not self.insecure_toy:
                raise ParamsError(
                    "lattice parameters are insecure toys; set insecure_toy=true to acknowledge"
                )
            if not self.special_primes:
                raise ParamsError("lattice backend needs one special prime for key switching")

    @property
    def slot_count(self) -> int:
        return self.ring_degree // 2

    @property
    def delta(self) -> Fraction:
        return Fraction(1 << self.delta_log2)

    def modulus_product(self, level: int) -> int:
        out = 1
        for q in self.moduli[: level + 1]:
            out *= q
        return out

    def with_backend(self, backend: str) -> "CkksParams":
        return replace(self, backend=backend, insecure_toy=self.insecure_toy or backend == "lattice")

    # --- construction -------------------------------------------------

    @classmethod
    def generate(
        cls,
        ring_degree: int = 1 << 12,
        max_level: int = 8,
        delta_log2: int = 30,
        backend: str = "reference",
        mock_bootstrap: bool = True,
        l_boot: int | None = None,
    ) -> "CkksParams":
        """NTT-friendly chain: a 31-bit base prime, L primes near 2**delta_log2, a 31-bit special prime."""
        top = _largest_primes_below(WORD_LIMIT, ring_degree, 2)
        base, special = top[0], top[1]
        middle = ntt_primes(ring_degree, delta_log2, max_level, exclude=top)
        return cls(
            ring_degree=ring_degree,
            max_level=max_level,
            delta_log2=delta_log2,
            moduli=(base,) + middle,
            special_primes=(special,),
            backend=backend,
            mock_bootstrap=mock_bootstrap,
            l_boot=l_boot,
            insecure_toy=True,
        )

    @classmethod
    def default(cls, backend: str = "reference") -> "CkksParams":
        """Desk-scale defaults: N = 2**12, L = 8, scale 2**30."""
        return cls.generate(backend=backend)

    # --- JSON ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "N": self.ring_degree,
            "L": self.max_level,
            "delta_log2": self.delta_log2,
            "moduli": list(self.moduli),
            "special_primes": list(self.special_primes),
            "backend": self.backend,
            "mock_bootstrap": self.mock_bootstrap,
            "L_boot": self.l_boot,
            "insecure_toy": self.insecure_toy,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CkksParams":
        missing = {"N", "L", "delta_log2", "moduli"} - doc.keys()
        if missing:
            raise ParamsError(f"params document missing keys: {sorted(missing)}")
        return cls(
            ring_degree=int(doc["N"]),
            max_level=int(doc["L"]),
            delta_log2=int(doc["delta_log2"]),
            moduli=tuple(doc["moduli"]),
            special_primes=tuple(doc.get("special_primes", ())),
            backend=doc.get("backend", "reference"),
            mock_bootstrap=bool(doc.get("mock_bootstrap", False)),
            l_boot=doc.get("L_boot"),
            insecure_toy=bool(doc.get("insecure_toy", False)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CkksParams":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path=None) -> "CkksParams":
        """Load from ``path``, falling back to the HELIX_PARAMS environment variable."""
        path = path or os.environ.get(PARAMS_ENV)
        if not path:
            raise ParamsError(f"no params file given and {PARAMS_ENV} is unset")
        return cls.from_json(Path(path).read_text())
