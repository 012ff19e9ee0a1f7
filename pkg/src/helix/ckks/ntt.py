"""Negacyclic number-theoretic transform over stacked RNS limbs.

The forward transform is the merged-twiddle Cooley-Tukey variant: it
evaluates a polynomial at the odd powers of a primitive 2N-th root psi and
returns the values in bit-reversed order, so ``c = a * b mod (X^N + 1)`` is
``inverse(forward(a) * forward(b))``.

A compiled core (``_ntt_core``) is used when it was built; otherwise the
numpy implementation below runs. Set ``HELIX_PURE_PYTHON=1`` to force the
fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_core = None
if not os.environ.get("HELIX_PURE_PYTHON"):
    try:
        from . import _ntt_core as _core
    except ImportError:  # extension not built
        _core = None

IMPLEMENTATION = "compiled" if _core is not None else "numpy"


def bit_reverse(i: int, bits: int) -> int:
    return int(format(i, f"0{bits}b")[::-1], 2) if bits else 0


def primitive_root_2n(q: int, N: int) -> int:
    """Smallest-generator primitive 2N-th root of unity mod q (needs q ≡ 1 mod 2N)."""
    if (q - 1) % (2 * N):
        raise ValueError(f"{q} is not 1 mod {2 * N}")
    exp = (q - 1) // (2 * N)
    for g in range(2, q):
        psi = pow(g, exp, q)
        if pow(psi, N, q) == q - 1:
            return psi
    raise ValueError("no primitive root found")


@dataclass(frozen=True)
class NttTables:
    """Twiddles for one modulus: psi powers in bit-reversed order plus Shoup quotients."""

    q: int
    N: int
    psi: int
    psi_brv: np.ndarray
    psi_inv_brv: np.ndarray
    n_inv: int

    @classmethod
    @lru_cache(maxsize=None)
    def build(cls, q: int, N: int) -> "NttTables":
        psi = primitive_root_2n(q, N)
        psi_inv = pow(psi, -1, q)
        bits = N.bit_length() - 1
        brv = np.array([bit_reverse(i, bits) for i in range(N)], dtype=np.int64)
        fwd = np.empty(N, dtype=np.int64)
        inv = np.empty(N, dtype=np.int64)
        p, pi = 1, 1
        powers, inv_powers = [], []
        for _ in range(N):
            powers.append(p)
            inv_powers.append(pi)
            p = p * psi % q
            pi = pi * psi_inv % q
        powers = np.array(powers, dtype=np.int64)
        inv_powers = np.array(inv_powers, dtype=np.int64)
        fwd[:] = powers[brv]
        inv[:] = inv_powers[brv]
        return cls(q, N, psi, fwd, inv, pow(N, -1, q))


def _shoup(w: np.ndarray, q: np.ndarray) -> np.ndarray:
    return ((w.astype(object) << 32) // q).astype(np.int64)


@dataclass(frozen=True)
class StackedTables:
    """Per-limb tables stacked into (k, N) arrays for a fixed modulus tuple."""

    moduli: tuple
    q: np.ndarray  # (k,)
    psi: np.ndarray
    psi_shoup: np.ndarray
    psi_inv: np.ndarray
    psi_inv_shoup: np.ndarray
    n_inv: np.ndarray
    n_inv_shoup: np.ndarray


@lru_cache(maxsize=256)
def stacked_tables(moduli: tuple, N: int) -> StackedTables:
    tabs = [NttTables.build(q, N) for q in moduli]
    q = np.array(moduli, dtype=np.int64)
    psi = np.stack([t.psi_brv for t in tabs])
    psi_inv = np.stack([t.psi_inv_brv for t in tabs])
    n_inv = np.array([t.n_inv for t in tabs], dtype=np.int64)
    qcol = q.astype(object)[:, None]
    return StackedTables(
        moduli=moduli,
        q=q,
        psi=psi,
        psi_shoup=np.ascontiguousarray(_shoup(psi, qcol)),
        psi_inv=psi_inv,
        psi_inv_shoup=np.ascontiguousarray(_shoup(psi_inv, qcol)),
        n_inv=n_inv,
        n_inv_shoup=_shoup(n_inv, q.astype(object)),
    )


def _forward_numpy(a: np.ndarray, tab: StackedTables) -> None:
    k, N = a.shape
    q = tab.q[:, None, None]
    m, t = 1, N
    while m < N:
        t //= 2
        v = a.reshape(k, m, 2, t)
        w = tab.psi[:, m : 2 * m, None]
        U = v[:, :, 0, :].copy()
        V = v[:, :, 1, :] * w % q
        v[:, :, 0, :] = (U + V) % q
        v[:, :, 1, :] = (U - V) % q
        m *= 2


def _inverse_numpy(a: np.ndarray, tab: StackedTables) -> None:
    k, N = a.shape
    q = tab.q[:, None, None]
    m, t = N, 1
    while m > 1:
        h = m // 2
        v = a.reshape(k, h, 2, t)
        w = tab.psi_inv[:, h:m, None]
        U = v[:, :, 0, :].copy()
        V = v[:, :, 1, :].copy()
        v[:, :, 0, :] = (U + V) % q
        v[:, :, 1, :] = (U - V) * w % q
        t *= 2
        m = h
    a *= tab.n_inv[:, None]
    a %= tab.q[:, None]


def forward(limbs: np.ndarray, moduli: tuple, impl: str | None = None) -> np.ndarray:
    """NTT of each row of ``limbs`` (shape (k, N), entries in [0, q_row)); returns a new array."""
    a = np.array(limbs, dtype=np.int64, order="C", copy=True)
    tab = stacked_tables(tuple(moduli), a.shape[1])
    if _use_core(impl):
        _core.forward(a, tab.psi, tab.psi_shoup, tab.q)
    else:
        _forward_numpy(a, tab)
    return a


def inverse(limbs: np.ndarray, moduli: tuple, impl: str | None = None) -> np.ndarray:
    a = np.array(limbs, dtype=np.int64, order="C", copy=True)
    tab = stacked_tables(tuple(moduli), a.shape[1])
    if _use_core(impl):
        _core.inverse(a, tab.psi_inv, tab.psi_inv_shoup, tab.n_inv, tab.n_inv_shoup, tab.q)
    else:
        _inverse_numpy(a, tab)
    return a


def _use_core(impl: str | None) -> bool:
    if impl == "numpy":
        return False
    if impl == "compiled":
        if _core is None:
            raise RuntimeError("compiled NTT core is not available")
        return True
    return _core is not None


@lru_cache(maxsize=None)
def evaluation_exponents(N: int) -> np.ndarray:
    """Odd exponent e such that forward()[i] = a(psi**e_i)."""
    bits = N.bit_length() - 1
    return np.array([2 * bit_reverse(i, bits) + 1 for i in range(N)], dtype=np.int64)


@lru_cache(maxsize=None)
def automorphism_permutation(N: int, galois: int) -> np.ndarray:
    """Index map so that NTT(a(X^g)) = NTT(a)[perm]."""
    exps = evaluation_exponents(N)
    where = np.empty(2 * N, dtype=np.int64)
    where[exps] = np.arange(N)
    return where[(exps * galois) % (2 * N)]


def schoolbook_negacyclic(a, b, q: int) -> np.ndarray:
    """O(N^2) reference product in Z_q[X]/(X^N + 1)."""
    a = [int(x) for x in a]
    b = [int(x) for x in b]
    N = len(a)
    out = [0] * N
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            k = i + j
            if k < N:
                out[k] += ai * bj
            else:
                out[k - N] -= ai * bj
    return np.array([x % q for x in out], dtype=np.int64)
