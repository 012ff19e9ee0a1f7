"""Toy lattice CKKS backend. INSECURE parameters; for correctness studies only.

Ciphertexts are pairs (c0, c1) of NTT-form RnsPoly over q_0..q_level and
decrypt as c0 + c1*s. Galois keys are generated the first time a registered
rotation amount is used, each from its own seed-derived stream, so results
do not depend on the order in which rotations happen.
"""
from __future__ import annotations

import threading

import numpy as np

from ..backend import Backend, HelixError, MissingRotationKey
from ..params import CkksParams
from . import keys as K
from .encoding import canonical_decode, canonical_encode
from .rns import RnsPoly, ring_mul  # noqa: F401  (re-exported)


class BootstrapUnavailable(HelixError, RuntimeError):
    pass


class LatticeBackend(Backend):
    name = "lattice"

    def __init__(self, params: CkksParams, rotations=(), trace=None, seed=None):
        if not params.insecure_toy:
            raise ValueError("lattice backend needs insecure_toy=True in the parameter set")
        if not params.special_primes:
            raise ValueError("lattice backend needs at least one special prime")
        super().__init__(params, rotations, trace)
        self.seed = 0 if seed is None else int(seed)
        self._rng = np.random.default_rng([self.seed, 0])
        self._lock = threading.Lock()
        self.N = params.ring_degree
        self.chain = tuple(params.moduli)
        self.special = tuple(params.special_primes)
        self.secret = K.gen_secret(self._rng, self.chain, self.special, self.N)
        self.public = K.gen_public(self._rng, self.secret, self.chain)
        s_sq = self.secret.poly * self.secret.poly
        self.relin_key = K.gen_switching_key(
            np.random.default_rng([self.seed, 1]), self.secret, s_sq, self.chain, self.special
        )
        self._galois: dict = {}

    # --- keys -----------------------------------------------------------

    def galois_element(self, k: int) -> int:
        return pow(5, int(k) % self.n, 2 * self.N)

    def galois_key(self, k: int) -> K.GaloisKey:
        k = int(k) % self.n
        if k not in self.rotation_keys or k == 0:
            raise MissingRotationKey(f"no rotation key for amount {k}")
        with self._lock:
            key = self._galois.get(k)
            if key is None:
                g = self.galois_element(k)
                target = self.secret.poly.automorphism(g)
                rng = np.random.default_rng([self.seed, 2, k])
                key = K.gen_switching_key(rng, self.secret, target, self.chain, self.special)
                self._galois[k] = key
            return key

    def _fresh(self, kind: str):
        with self._lock:
            if kind == "ternary":
                return K.sample_ternary(self._rng, self.N)
            return K.sample_gaussian(self._rng, self.N)

    # --- hooks ----------------------------------------------------------

    def _basis(self, level: int) -> tuple:
        return self.chain[: level + 1]

    def _encode(self, vec, level, scale):
        return canonical_encode(vec, scale, self._basis(level), self.N)

    def encode_complex(self, values, level=None, scale=None):
        """Encode complex slot values (the slot API itself is real-valued)."""
        from ..backend import Plaintext, as_scale

        level = self.max_level if level is None else level
        scale = as_scale(self.delta if scale is None else scale)
        return Plaintext(canonical_encode(values, scale, self._basis(level), self.N), level, scale)

    def _encrypt(self, pt):
        basis = self._basis(pt.level)
        count = len(basis)
        v = RnsPoly.from_integers(self._fresh("ternary"), basis, to_ntt=True)
        e0 = RnsPoly.from_integers(self._fresh("gauss"), basis, to_ntt=True)
        e1 = RnsPoly.from_integers(self._fresh("gauss"), basis, to_ntt=True)
        b = self.public.b.keep(count)
        a = self.public.a.keep(count)
        return (v * b + e0 + pt.payload, v * a + e1)

    def decrypt_poly(self, ct, secret: K.SecretKey | None = None) -> RnsPoly:
        sk = secret or self.secret
        c0, c1 = ct.payload
        return c0 + c1 * sk.restrict(len(c0.moduli))

    def _decrypt(self, ct):
        return canonical_decode(self.decrypt_poly(ct), ct.scale)

    def decrypt_with(self, ct, secret: K.SecretKey) -> np.ndarray:
        """Decrypt under an arbitrary secret (negative-control tests)."""
        return canonical_decode(self.decrypt_poly(ct, secret), ct.scale)

    def _add_ct(self, a, b):
        return (a.payload[0] + b.payload[0], a.payload[1] + b.payload[1])

    def _add_pt(self, a, b):
        return (a.payload[0] + b.payload, a.payload[1])

    def _mul_pt(self, a, b):
        return (a.payload[0] * b.payload, a.payload[1] * b.payload)

    def _mul_ct(self, a, b):
        a0, a1 = a.payload
        b0, b1 = b.payload
        d0 = a0 * b0
        d1 = a0 * b1 + a1 * b0
        d2 = a1 * b1
        k0, k1 = K.key_switch(d2, self.relin_key)
        return (d0 + k0, d1 + k1)

    def _rotate(self, a, k):
        key = self.galois_key(k)
        g = self.galois_element(k)
        c0, c1 = (p.automorphism(g) for p in a.payload)
        k0, k1 = K.key_switch(c1, key)
        return (c0 + k0, k1)

    def _rescale(self, a):
        return tuple(K.divide_round_last(p) for p in a.payload)

    def _mod_down(self, a, target_level):
        return tuple(p.keep(target_level + 1) for p in a.payload)

    def _bootstrap(self, a):
        if not self.params.mock_bootstrap:
            raise BootstrapUnavailable("bootstrapping is not implemented; enable mock_bootstrap")
        # mock refresh: decrypt and re-encrypt at L_boot with the same scale
        values = self._decrypt(a)
        from ..backend import Plaintext

        pt = Plaintext(canonical_encode(values, a.scale, self._basis(self.l_boot), self.N), self.l_boot, a.scale)
        return self._encrypt(pt)
