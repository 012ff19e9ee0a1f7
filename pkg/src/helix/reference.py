"""Exact reference backend: slots are plain float64 vectors.

No noise, no encoding error. Level and scale bookkeeping is inherited from
:class:`~helix.backend.Backend`, so it matches the lattice backend exactly.
"""
from __future__ import annotations

import numpy as np

from .backend import Backend


class ReferenceBackend(Backend):
    name = "reference"

    def _encode(self, vec, level, scale):
        vec = vec.copy()
        vec.flags.writeable = False
        return vec

    def _encrypt(self, pt):
        return pt.payload

    def _decrypt(self, ct):
        return ct.payload.copy()

    def _add_ct(self, a, b):
        return a.payload + b.payload

    _add_pt = _add_ct

    def _mul_ct(self, a, b):
        return a.payload * b.payload

    _mul_pt = _mul_ct

    def _rotate(self, a, k):
        return np.roll(a.payload, -k)

    def _rescale(self, a):
        return a.payload

    def _mod_down(self, a, target_level):
        return a.payload

    def _bootstrap(self, a):
        return a.payload
