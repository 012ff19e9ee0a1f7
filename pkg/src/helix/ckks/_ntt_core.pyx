# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled negacyclic NTT butterflies.

Arrays are (limbs, N) int64 with one modulus per row, every modulus below
2**31. Twiddle multiplies use Shoup's precomputed quotient with beta = 2**32,
so no 128-bit arithmetic or division is needed in the inner loop.
"""
from libc.stdint cimport int64_t, uint64_t

ctypedef uint64_t u64


cdef inline u64 _mul_shoup(u64 a, u64 w, u64 wp, u64 q) nogil:
    # a < 2**32, w < q < 2**31, wp = floor(w * 2**32 / q)
    cdef u64 est = (a * wp) >> 32
    cdef u64 r = a * w - est * q
    if r >= q:
        r -= q
    return r


def forward(int64_t[:, ::1] a, int64_t[:, ::1] psi, int64_t[:, ::1] psi_shoup, int64_t[::1] mod):
    """In-place Cooley-Tukey forward transform, bit-reversed output order."""
    cdef Py_ssize_t k = a.shape[0], N = a.shape[1]
    cdef Py_ssize_t r, m, t, i, j, j1
    cdef u64 q, w, wp, U, V, S
    with nogil:
        for r in range(k):
            q = <u64>mod[r]
            t = N
            m = 1
            while m < N:
                t >>= 1
                for i in range(m):
                    j1 = 2 * i * t
                    w = <u64>psi[r, m + i]
                    wp = <u64>psi_shoup[r, m + i]
                    for j in range(j1, j1 + t):
                        U = <u64>a[r, j]
                        V = _mul_shoup(<u64>a[r, j + t], w, wp, q)
                        S = U + V
                        if S >= q:
                            S -= q
                        a[r, j] = <int64_t>S
                        S = U + q - V
                        if S >= q:
                            S -= q
                        a[r, j + t] = <int64_t>S
                m <<= 1


def inverse(int64_t[:, ::1] a, int64_t[:, ::1] psi_inv, int64_t[:, ::1] psi_inv_shoup,
            int64_t[::1] n_inv, int64_t[::1] n_inv_shoup, int64_t[::1] mod):
    """In-place Gentleman-Sande inverse transform including the 1/N factor."""
    cdef Py_ssize_t k = a.shape[0], N = a.shape[1]
    cdef Py_ssize_t r, m, h, t, i, j, j1
    cdef u64 q, w, wp, U, V, S
    with nogil:
        for r in range(k):
            q = <u64>mod[r]
            t = 1
            m = N
            while m > 1:
                h = m >> 1
                for i in range(h):
                    j1 = 2 * i * t
                    w = <u64>psi_inv[r, h + i]
                    wp = <u64>psi_inv_shoup[r, h + i]
                    for j in range(j1, j1 + t):
                        U = <u64>a[r, j]
                        V = <u64>a[r, j + t]
                        S = U + V
                        if S >= q:
                            S -= q
                        a[r, j] = <int64_t>S
                        a[r, j + t] = <int64_t>_mul_shoup(U + q - V, w, wp, q)
                t <<= 1
                m = h
            w = <u64>n_inv[r]
            wp = <u64>n_inv_shoup[r]
            for j in range(N):
                a[r, j] = <int64_t>_mul_shoup(<u64>a[r, j], w, wp, q)
