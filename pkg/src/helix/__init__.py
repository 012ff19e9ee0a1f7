"""helix: encrypted linear algebra for transformer blocks on a toy CKKS stack.

Two interchangeable slot backends sit behind one API: an exact cleartext
``reference`` backend for counting, and a ``lattice`` backend (small RNS CKKS
with hybrid key switching) for noise-level fidelity. Kernels, FFN blocks and
the roofline model work against either.
"""
from .backend import (
    Backend,
    Ciphertext,
    HelixError,
    LevelExhausted,
    LevelMismatch,
    MissingRotationKey,
    Plaintext,
    RotationKeySet,
    ScaleMismatch,
    make_backend,
)
from .params import CkksParams, ParamsError
from .trace import OpTrace

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "Ciphertext",
    "CkksParams",
    "HelixError",
    "LevelExhausted",
    "LevelMismatch",
    "MissingRotationKey",
    "OpTrace",
    "ParamsError",
    "Plaintext",
    "RotationKeySet",
    "ScaleMismatch",
    "make_backend",
]
