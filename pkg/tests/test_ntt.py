import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helix.ckks import RnsPoly, ntt, ring_mul
from helix.params import ntt_primes

IMPLS = ["numpy"] + (["compiled"] if ntt.IMPLEMENTATION == "compiled" else [])


def negacyclic(a, b, q):
    """Independent schoolbook oracle for a*b mod (X^N + 1, q)."""
    N = len(a)
    full = np.convolve(np.array(a, dtype=object), np.array(b, dtype=object))
    out = full[:N].copy()
    out[: N - 1] -= full[N:]
    return np.array([int(x) % q for x in out], dtype=np.int64)


def moduli_for(N, k=2):
    return ntt_primes(N, 30, k)


def test_compiled_core_is_active():
    # the extension is part of the build; a silent fallback would hide a packaging bug
    assert ntt.IMPLEMENTATION == "compiled"


@pytest.mark.parametrize("impl", IMPLS)
@pytest.mark.parametrize("N", [4, 8, 16, 32])
def test_matches_schoolbook(impl, N):
    moduli = moduli_for(N, 3)
    rng = np.random.default_rng(N)
    a = np.stack([rng.integers(0, q, N) for q in moduli])
    b = np.stack([rng.integers(0, q, N) for q in moduli])
    prod = ntt.inverse(ntt.forward(a, moduli, impl) * ntt.forward(b, moduli, impl) % np.array(moduli)[:, None], moduli, impl)
    for i, q in enumerate(moduli):
        np.testing.assert_array_equal(prod[i], negacyclic(a[i], b[i], q))
        np.testing.assert_array_equal(prod[i], ntt.schoolbook_negacyclic(a[i], b[i], q))


@pytest.mark.parametrize("impl", IMPLS)
def test_forward_evaluates_at_odd_powers(impl):
    N = 16
    (q,) = moduli_for(N, 1)
    psi = ntt.primitive_root_2n(q, N)
    a = np.random.default_rng(0).integers(0, q, N)
    got = ntt.forward(a[None, :], (q,), impl)[0]
    exps = ntt.evaluation_exponents(N)
    for i in range(N):
        val = sum(int(c) * pow(psi, int(exps[i]) * j, q) for j, c in enumerate(a)) % q
        assert got[i] == val


@pytest.mark.parametrize("N", [64, 1024, 4096])
def test_compiled_equals_numpy(N):
    if len(IMPLS) < 2:
        pytest.skip("compiled core not built")
    moduli = moduli_for(N, 4)
    rng = np.random.default_rng(1)
    a = np.stack([rng.integers(0, q, N) for q in moduli])
    f_np = ntt.forward(a, moduli, "numpy")
    np.testing.assert_array_equal(ntt.forward(a, moduli, "compiled"), f_np)
    np.testing.assert_array_equal(ntt.inverse(f_np, moduli, "compiled"), ntt.inverse(f_np, moduli, "numpy"))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([8, 32, 256]), st.integers(0, 2**32 - 1), st.sampled_from(IMPLS))
def test_round_trip(N, seed, impl):
    moduli = moduli_for(N, 2)
    rng = np.random.default_rng(seed)
    a = np.stack([rng.integers(0, q, N) for q in moduli])
    np.testing.assert_array_equal(ntt.inverse(ntt.forward(a, moduli, impl), moduli, impl), a)


def test_primitive_root_order():
    N = 32
    (q,) = moduli_for(N, 1)
    psi = ntt.primitive_root_2n(q, N)
    assert pow(psi, 2 * N, q) == 1 and pow(psi, N, q) == q - 1
    with pytest.raises(ValueError):
        ntt.primitive_root_2n(13, N)


def test_unknown_compiled_request_errors(monkeypatch):
    monkeypatch.setattr(ntt, "_core", None)
    with pytest.raises(RuntimeError):
        ntt.forward(np.zeros((1, 8), dtype=np.int64), moduli_for(8, 1), "compiled")


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([8, 16, 64]), st.integers(0, 2**32 - 1), st.integers(0, 63))
def test_automorphism_ntt_matches_coefficient_domain(N, seed, k):
    moduli = moduli_for(N, 2)
    rng = np.random.default_rng(seed)
    coeffs = rng.integers(-50, 51, N)
    g = pow(5, k, 2 * N) if k % 2 == 0 else (2 * N - pow(5, k, 2 * N))
    coef = RnsPoly.from_integers(coeffs, moduli)
    via_ntt = coef.to_ntt().automorphism(g).to_coeff()
    via_coef = coef.automorphism(g)
    np.testing.assert_array_equal(via_ntt.limbs, via_coef.limbs)
    # direct substitution X -> X^g as an independent check
    expect = np.zeros(N, dtype=object)
    for i, c in enumerate(coeffs):
        e = i * g % (2 * N)
        if e < N:
            expect[e] += int(c)
        else:
            expect[e - N] -= int(c)
    np.testing.assert_array_equal(via_coef.to_integers().astype(np.int64), expect.astype(np.int64))


def test_ring_mul_and_crt():
    N = 16
    moduli = moduli_for(N, 3)
    rng = np.random.default_rng(5)
    a = rng.integers(-1000, 1000, N)
    b = rng.integers(-1000, 1000, N)
    prod = ring_mul(RnsPoly.from_integers(a, moduli), RnsPoly.from_integers(b, moduli))
    assert not prod.is_ntt
    # coefficients stay far below Q/2, so the plain integer product is the centred result
    full = np.convolve(a.astype(object), b.astype(object))
    ref = full[:N].copy()
    ref[: N - 1] -= full[N:]
    np.testing.assert_array_equal(prod.to_integers(), ref)
    with pytest.raises(ValueError):
        ring_mul(RnsPoly.from_integers(a, moduli), RnsPoly.from_integers(b, moduli[:2]))


def test_rns_mul_requires_ntt_form():
    moduli = moduli_for(8, 1)
    p = RnsPoly.from_integers(np.arange(8), moduli)
    with pytest.raises(ValueError):
        p * p
