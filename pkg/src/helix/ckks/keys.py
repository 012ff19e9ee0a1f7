"""Key generation and hybrid RNS key switching.

Switching keys live over the full chain q_0..q_L plus one special prime P.
Digit i of the gadget is the CRT basis element g_i (1 mod q_i, 0 mod q_j),
so key limb i carries P * s' and every other chain limb is a plain RLWE
sample. Because g_i is 0 mod q_j for all j != i, the same key works at
every lower level by ignoring the unused digits and limbs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rns import RnsPoly

SIGMA = 3.2


def sample_ternary(rng: np.random.Generator, N: int) -> np.ndarray:
    return rng.integers(-1, 2, size=N, dtype=np.int64)


def sample_gaussian(rng: np.random.Generator, N: int, sigma: float = SIGMA) -> np.ndarray:
    return np.rint(rng.normal(0.0, sigma, size=N)).astype(np.int64)


def sample_uniform(rng: np.random.Generator, moduli: tuple, N: int) -> np.ndarray:
    return np.stack([rng.integers(0, q, size=N, dtype=np.int64) for q in moduli])


@dataclass(frozen=True)
class SecretKey:
    coeffs: np.ndarray  # ternary, int64
    poly: RnsPoly  # NTT form over chain + special primes

    def restrict(self, count: int) -> RnsPoly:
        """s over the first ``count`` chain limbs."""
        return self.poly.keep(count)


@dataclass(frozen=True)
class PublicKey:
    b: RnsPoly  # -a*s + e over the chain
    a: RnsPoly


@dataclass(frozen=True)
class SwitchingKey:
    """Per-digit pairs (b_i, a_i); arrays shaped (digits, L+2, N), uint32 to halve memory."""

    b: np.ndarray
    a: np.ndarray
    basis: tuple  # chain moduli then the special prime

    @property
    def digits(self) -> int:
        return self.b.shape[0]


RelinKey = SwitchingKey
GaloisKey = SwitchingKey


def gen_secret(rng, chain: tuple, special: tuple, N: int) -> SecretKey:
    s = sample_ternary(rng, N)
    return SecretKey(s, RnsPoly.from_integers(s, tuple(chain) + tuple(special), to_ntt=True))


def gen_public(rng, sk: SecretKey, chain: tuple) -> PublicKey:
    N = sk.coeffs.size
    a = RnsPoly(sample_uniform(rng, chain, N), tuple(chain), True)
    e = RnsPoly.from_integers(sample_gaussian(rng, N), tuple(chain), to_ntt=True)
    s = sk.restrict(len(chain))
    return PublicKey(-(a * s) + e, a)


def gen_switching_key(rng, sk: SecretKey, target: RnsPoly, chain: tuple, special: tuple) -> SwitchingKey:
    """Key that re-encrypts ``target`` (NTT form over chain + special) under ``sk``."""
    basis = tuple(chain) + tuple(special)
    N = sk.coeffs.size
    qcol = np.array(basis, dtype=np.int64)[:, None]
    P = 1
    for p in special:
        P *= p
    s = sk.poly.limbs
    bs, as_ = [], []
    for i, qi in enumerate(chain):
        a = sample_uniform(rng, basis, N)
        e = RnsPoly.from_integers(sample_gaussian(rng, N), basis, to_ntt=True).limbs
        b = (e - a * s % qcol) % qcol
        b[i] = (b[i] + (P % qi) * target.limbs[i]) % qi
        bs.append(b.astype(np.uint32))
        as_.append(a.astype(np.uint32))
    return SwitchingKey(np.stack(bs), np.stack(as_), basis)


def key_switch(d: RnsPoly, key: SwitchingKey) -> tuple:
    """Return (k0, k1) over ``d``'s limbs with k0 + k1*s ~= d * s'.

    ``d`` may be in either domain and covers chain limbs q_0..q_l.
    """
    count = len(d.moduli)
    if count > key.digits:
        raise ValueError("switching key has fewer digits than active limbs")
    special = key.basis[key.digits :]
    ext = tuple(d.moduli) + special
    rows = list(range(count)) + list(range(key.digits, len(key.basis)))
    coeff = d.to_coeff().limbs
    qext = np.array(ext, dtype=np.int64)[:, None]
    # mod-up: each digit [d]_{q_i} lifted into every limb of the extended basis
    acc0 = np.zeros((len(ext), d.N), dtype=np.int64)
    acc1 = np.zeros_like(acc0)
    for i, qi in enumerate(d.moduli):
        # centred digits: a [0, q) digit has mean q/2, whose all-ones polynomial
        # concentrates key noise in the slots whose roots lie near 1
        digit = np.where(coeff[i] > qi // 2, coeff[i] - qi, coeff[i])
        lifted = RnsPoly(digit[None, :] % qext, ext, False).to_ntt().limbs
        kb = key.b[i][rows].astype(np.int64)
        ka = key.a[i][rows].astype(np.int64)
        acc0 = (acc0 + lifted * kb % qext) % qext
        acc1 = (acc1 + lifted * ka % qext) % qext
    return (
        mod_down_special(RnsPoly(acc0, ext, True), len(special)),
        mod_down_special(RnsPoly(acc1, ext, True), len(special)),
    )


def mod_down_special(x: RnsPoly, n_special: int) -> RnsPoly:
    """Divide-and-round by the product of the trailing ``n_special`` primes."""
    out = x
    for _ in range(n_special):
        out = divide_round_last(out)
    return out


def divide_round_last(x: RnsPoly) -> RnsPoly:
    """Exact RNS division-and-round by the last modulus, dropping that limb.

    Uses the centred representative of the last limb so the result is
    round(x / q_last) rather than floor.
    """
    q_last = x.moduli[-1]
    last = RnsPoly(x.limbs[-1:], (q_last,), x.is_ntt).to_coeff().limbs[0]
    centred = np.where(last > q_last // 2, last - q_last, last)
    rest = x.moduli[:-1]
    qcol = np.array(rest, dtype=np.int64)[:, None]
    corr = RnsPoly(centred[None, :] % qcol, rest, False)
    if x.is_ntt:
        corr = corr.to_ntt()
    inv = np.array([pow(q_last, -1, q) for q in rest], dtype=np.int64)[:, None]
    return RnsPoly((x.limbs[:-1] - corr.limbs) % qcol * inv % qcol, rest, x.is_ntt)
