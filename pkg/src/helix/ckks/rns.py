"""RNS polynomials in Z_Q[X]/(X^N + 1), one int64 limb per prime."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ntt


@dataclass(frozen=True)
class RnsPoly:
    limbs: np.ndarray  # (k, N) int64, row i reduced mod moduli[i]
    moduli: tuple
    is_ntt: bool

    def __post_init__(self):
        if self.limbs.ndim != 2 or self.limbs.shape[0] != len(self.moduli):
            raise ValueError("one limb per modulus required")

    @property
    def N(self) -> int:
        return self.limbs.shape[1]

    @property
    def qcol(self) -> np.ndarray:
        return np.array(self.moduli, dtype=np.int64)[:, None]

    def _same_basis(self, other: "RnsPoly") -> None:
        if self.moduli != other.moduli:
            raise ValueError(f"limb mismatch: {len(self.moduli)} vs {len(other.moduli)} moduli")
        if self.is_ntt != other.is_ntt:
            raise ValueError("domain mismatch (coefficient vs NTT)")

    def __add__(self, other: "RnsPoly") -> "RnsPoly":
        self._same_basis(other)
        return RnsPoly((self.limbs + other.limbs) % self.qcol, self.moduli, self.is_ntt)

    def __sub__(self, other: "RnsPoly") -> "RnsPoly":
        self._same_basis(other)
        return RnsPoly((self.limbs - other.limbs) % self.qcol, self.moduli, self.is_ntt)

    def __neg__(self) -> "RnsPoly":
        return RnsPoly((-self.limbs) % self.qcol, self.moduli, self.is_ntt)

    def __mul__(self, other: "RnsPoly") -> "RnsPoly":
        self._same_basis(other)
        if not self.is_ntt:
            raise ValueError("pointwise product needs NTT-domain operands; use ring_mul")
        return RnsPoly(self.limbs * other.limbs % self.qcol, self.moduli, True)

    def to_ntt(self) -> "RnsPoly":
        if self.is_ntt:
            return self
        return RnsPoly(ntt.forward(self.limbs, self.moduli), self.moduli, True)

    def to_coeff(self) -> "RnsPoly":
        if not self.is_ntt:
            return self
        return RnsPoly(ntt.inverse(self.limbs, self.moduli), self.moduli, False)

    def keep(self, count: int) -> "RnsPoly":
        """The first ``count`` limbs (mod-down / drop the top primes)."""
        return RnsPoly(self.limbs[:count], self.moduli[:count], self.is_ntt)

    def select(self, rows) -> "RnsPoly":
        rows = list(rows)
        return RnsPoly(self.limbs[rows], tuple(self.moduli[r] for r in rows), self.is_ntt)

    def automorphism(self, galois: int) -> "RnsPoly":
        """a(X) -> a(X^galois) for odd ``galois``."""
        N = self.N
        if self.is_ntt:
            perm = ntt.automorphism_permutation(N, galois % (2 * N))
            return RnsPoly(self.limbs[:, perm], self.moduli, True)
        idx = (np.arange(N) * galois) % (2 * N)
        out = np.zeros_like(self.limbs)
        wrap = idx >= N
        out[:, idx[~wrap]] = self.limbs[:, ~wrap]
        out[:, idx[wrap] - N] = (-self.limbs[:, wrap]) % self.qcol
        return RnsPoly(out, self.moduli, False)

    # --- integer views ------------------------------------------------

    @classmethod
    def from_integers(cls, coeffs, moduli: tuple, to_ntt: bool = False) -> "RnsPoly":
        """Reduce signed integer coefficients (int64 or Python ints) into every limb."""
        coeffs = np.asarray(coeffs)
        if coeffs.dtype == object:
            limbs = np.stack([np.array([int(c) % q for c in coeffs], dtype=np.int64) for q in moduli])
        else:
            coeffs = coeffs.astype(np.int64)
            limbs = coeffs[None, :] % np.array(moduli, dtype=np.int64)[:, None]
        poly = cls(limbs, tuple(moduli), False)
        return poly.to_ntt() if to_ntt else poly

    def to_integers(self) -> np.ndarray:
        """CRT-reconstruct centred coefficients as Python ints (object array)."""
        coeff = self.to_coeff()
        moduli = coeff.moduli
        if len(moduli) == 1:
            q = moduli[0]
            vals = coeff.limbs[0]
            return np.where(vals > q // 2, vals - q, vals).astype(object)
        Q = 1
        for q in moduli:
            Q *= q
        acc = np.zeros(self.N, dtype=object)
        for row, q in zip(coeff.limbs, moduli):
            Qi = Q // q
            t = row * pow(Qi % q, -1, q) % q
            acc = acc + t.astype(object) * Qi
        acc = acc % Q
        half = Q // 2
        return np.where(acc > half, acc - Q, acc)


def ring_mul(a: RnsPoly, b: RnsPoly) -> RnsPoly:
    """Negacyclic product via pointwise NTT multiplication; result in ``a``'s domain."""
    if a.moduli != b.moduli:
        raise ValueError(f"limb-count mismatch: {len(a.moduli)} vs {len(b.moduli)}")
    prod = a.to_ntt() * b.to_ntt()
    return prod if a.is_ntt else prod.to_coeff()
