"""Canonical-embedding encoder.

Slot j lives at the root zeta^(5^j mod 2N) with zeta = exp(i*pi/N); the
conjugate slots sit at the negated exponents, so real polynomials decode to
conjugate-symmetric evaluations. Both directions are O(N log N) via numpy's FFT:
evaluating a(X) at every odd power of zeta is an FFT of a_i * zeta^i.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .rns import RnsPoly


class EncodingOverflow(ValueError):
    """Scaled coefficients do not fit under the active modulus."""


@lru_cache(maxsize=None)
def slot_positions(N: int) -> tuple:
    """(positions of slots, positions of their conjugates) among the N odd exponents.

    Odd exponent 2t+1 is stored at index t.
    """
    n = N // 2
    e = np.empty(n, dtype=np.int64)
    acc = 1
    for j in range(n):
        e[j] = acc
        acc = acc * 5 % (2 * N)
    conj = (2 * N - e) % (2 * N)
    return (e - 1) // 2, (conj - 1) // 2


@lru_cache(maxsize=None)
def _twist(N: int) -> np.ndarray:
    return np.exp(1j * np.pi * np.arange(N) / N)


def embed_inverse(values, N: int) -> np.ndarray:
    """Complex coefficients a with a(zeta^(5^j)) = values[j]; real part only for real input.

    Returns the complex array so callers can inspect the imaginary residue.
    """
    n = N // 2
    vals = np.zeros(n, dtype=np.complex128)
    v = np.asarray(values).ravel()
    if v.size > n:
        raise ValueError(f"{v.size} values exceed {n} slots")
    vals[: v.size] = v
    pos, conj = slot_positions(N)
    E = np.empty(N, dtype=np.complex128)
    E[pos] = vals
    E[conj] = np.conj(vals)
    return np.fft.fft(E) / N / _twist(N)


def embed(coeffs, N: int) -> np.ndarray:
    """Slot values of the (real) polynomial with the given coefficients."""
    a = np.asarray(coeffs, dtype=np.float64)
    evals = np.fft.ifft(a * _twist(N)) * N
    return evals[slot_positions(N)[0]]


def canonical_encode(values, scale, moduli: tuple, N: int, ntt_form: bool = True) -> RnsPoly:
    """round(scale * embedding^-1(values)) reduced into each limb of ``moduli``."""
    coeffs = np.rint(embed_inverse(values, N).real * float(scale))
    Q = 1
    for q in moduli:
        Q *= q
    peak = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    if not np.isfinite(peak) or 2 * peak >= Q:
        raise EncodingOverflow(f"coefficient {peak:.3g} exceeds modulus capacity {float(Q):.3g}")
    if peak < 2.0**62:
        ints = coeffs.astype(np.int64)
    else:
        ints = np.array([int(c) for c in coeffs], dtype=object)
    return RnsPoly.from_integers(ints, tuple(moduli), to_ntt=ntt_form)


def canonical_decode(poly: RnsPoly, scale, slots: int | None = None, complex_out: bool = False) -> np.ndarray:
    """Inverse of :func:`canonical_encode` up to rounding."""
    ints = poly.to_integers()
    coeffs = np.array([float(c) for c in ints]) / float(scale)
    out = embed(coeffs, poly.N)
    if slots is not None:
        out = out[:slots]
    return out if complex_out else out.real
