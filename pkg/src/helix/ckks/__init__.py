"""Toy RNS-CKKS lattice engine (insecure parameters, correctness only)."""
from .encoding import EncodingOverflow, canonical_decode, canonical_encode
from .engine import BootstrapUnavailable, LatticeBackend
from .keys import GaloisKey, PublicKey, RelinKey, SecretKey, key_switch
from .ntt import NttTables
from .rns import RnsPoly, ring_mul

__all__ = [
    "BootstrapUnavailable",
    "EncodingOverflow",
    "GaloisKey",
    "LatticeBackend",
    "NttTables",
    "PublicKey",
    "RelinKey",
    "RnsPoly",
    "SecretKey",
    "canonical_decode",
    "canonical_encode",
    "key_switch",
    "ring_mul",
]
