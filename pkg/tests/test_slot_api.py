"""Contract of the slot API, checked on the reference backend."""
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helix import (
    LevelExhausted,
    LevelMismatch,
    MissingRotationKey,
    RotationKeySet,
    ScaleMismatch,
    make_backend,
)


def test_encrypt_decrypt_exact(ref, rng):
    be = ref()
    x = rng.normal(size=be.n)
    ct = be.encrypt(x)
    assert ct.level == be.max_level and ct.scale == be.delta
    np.testing.assert_array_equal(be.decrypt(ct), x)


def test_short_vectors_zero_padded(ref):
    be = ref()
    out = be.decrypt(be.encrypt([1.0, 2.0]))
    assert out.shape == (be.n,) and out[:2].tolist() == [1.0, 2.0] and not out[2:].any()
    with pytest.raises(ValueError):
        be.encrypt(np.ones(be.n + 1))


def test_rotation_is_left_shift(ref):
    be = ref([3, -1])
    x = np.arange(be.n, dtype=float)
    np.testing.assert_array_equal(be.decrypt(be.rotate(be.encrypt(x), 3)), np.roll(x, -3))
    np.testing.assert_array_equal(be.decrypt(be.rotate(be.encrypt(x), -1)), np.roll(x, 1))
    assert be.trace["rotate"] == 2


def test_rotation_by_zero_is_free(ref):
    be = ref()
    ct = be.encrypt([1.0])
    assert be.rotate(ct, 0) is ct and be.rotate(ct, be.n) is ct
    assert be.trace["rotate"] == 0


def test_missing_rotation_key(ref):
    be = ref([1])
    with pytest.raises(MissingRotationKey):
        be.rotate(be.encrypt([1.0]), 2)


def test_rotation_key_set_normalises():
    ks = RotationKeySet.build([-1, 5, 0, 2053], 2048)
    assert ks.amounts == {2047, 5}
    assert 0 in ks and -1 in ks and 4 not in ks


def test_mul_then_rescale(ref, rng):
    be = ref()
    a, b = rng.normal(size=be.n), rng.normal(size=be.n)
    prod = be.mul(be.encrypt(a), be.encrypt(b))
    assert prod.scale == be.delta**2 and prod.level == be.max_level
    out = be.rescale(prod)
    assert out.level == be.max_level - 1
    assert out.scale == be.delta**2 / be.modulus(be.max_level)
    np.testing.assert_allclose(be.decrypt(out), a * b, rtol=1e-12)


def test_plaintext_ops_counted_separately(ref):
    be = ref()
    ct = be.encrypt([1.0])
    be.add(ct, be.encode([2.0]))
    be.mul(ct, be.encode([2.0]))
    be.add(ct, ct)
    assert be.trace.snapshot()["pt_add"] == 1 and be.trace["pt_mul"] == 1 and be.trace["ct_add"] == 1


def test_level_and_scale_mismatch(ref):
    be = ref()
    a = be.encrypt([1.0], level=3)
    b = be.encrypt([1.0], level=2)
    with pytest.raises(LevelMismatch):
        be.add(a, b)
    with pytest.raises(LevelMismatch):
        be.mul(a, b)
    with pytest.raises(ScaleMismatch):
        be.add(a, be.encrypt([1.0], level=3, scale=2**20))


def test_rescale_errors(ref):
    be = ref()
    with pytest.raises(ScaleMismatch):
        be.rescale(be.encrypt([1.0]))
    ct0 = be.encrypt([1.0], level=0)
    with pytest.raises(LevelExhausted):
        be.rescale(ct0)
    with pytest.raises(LevelExhausted):
        be.mul(ct0, ct0)


def test_mod_down(ref):
    be = ref()
    ct = be.encrypt([5.0], level=6)
    low = be.mod_down(ct, 2)
    assert low.level == 2 and low.scale == ct.scale
    assert be.decrypt(low)[0] == 5.0
    assert be.mod_down(ct, 6) is ct
    with pytest.raises(LevelMismatch):
        be.mod_down(low, 3)


def test_bootstrap_resets_level(ref):
    be = ref()
    ct = be.encrypt([1.5], level=0)
    out = be.bootstrap(ct)
    assert out.level == be.l_boot and be.decrypt(out)[0] == 1.5
    assert be.trace["bootstrap"] == 1


def test_encode_level_range(ref):
    be = ref()
    with pytest.raises(LevelMismatch):
        be.encode([1.0], level=be.max_level + 1)
    with pytest.raises(ValueError):
        be.encode([1.0], scale=0)


def test_make_backend_unknown(ref_params):
    with pytest.raises(ValueError):
        make_backend(ref_params, backend="gpu")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=32), st.integers(-40, 40))
def test_rotation_composes(ref_params, values, k):
    be = make_backend(ref_params, rotations=[k, -k])
    ct = be.encrypt(values)
    back = be.rotate(be.rotate(ct, k), -k)
    np.testing.assert_array_equal(be.decrypt(back), be.decrypt(ct))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8))
def test_scale_bookkeeping_is_exact(ref_params, steps):
    be = make_backend(ref_params)
    ct = be.encrypt([1.0], level=be.max_level)
    for _ in range(steps):
        ct = be.rescale(be.mul(ct, be.encode([1.0], ct.level, scale=be.modulus(ct.level))))
    assert ct.scale == be.delta and isinstance(ct.scale, Fraction)
    assert ct.level == be.max_level - steps
