# cython: language_level=3
"""Compiled radix-2 FFT kernel (hot path).

Same butterfly schedule as the pure-numpy fallback in ``_fft_py``; rows of
the (m, n) batch are transformed independently with the GIL released.
"""

import numpy as np

cimport cython

BACKEND_NAME = "compiled"

ctypedef fused cplx:
    float complex
    double complex


@cython.boundscheck(False)
@cython.wraparound(False)
def _fft_rows(cplx[:, ::1] data, cplx[::1] tw, Py_ssize_t[::1] rev):
    cdef Py_ssize_t m = data.shape[0]
    cdef Py_ssize_t n = data.shape[1]
    cdef Py_ssize_t r, i, j, half, step, base, k
    cdef cplx tmp, lo, hi
    with nogil:
        for r in range(m):
            # bit-reversal permutation (in-place swaps)
            for i in range(n):
                j = rev[i]
                if j > i:
                    tmp = data[r, i]
                    data[r, i] = data[r, j]
                    data[r, j] = tmp
            # butterfly stages; tw holds twiddles packed per stage:
            # stage with half=h uses tw[h-1 .. 2h-2] (h entries)
            half = 1
            while half < n:
                step = half * 2
                base = 0
                while base < n:
                    for k in range(half):
                        lo = data[r, base + k]
                        hi = data[r, base + half + k] * tw[half - 1 + k]
                        data[r, base + half + k] = lo - hi
                        data[r, base + k] = lo + hi
                    base += step
                half = step


def fft_pow2_lastaxis(z, inverse=False):
    """Unnormalised complex FFT along the last axis; length must be 2**k."""
    n = z.shape[-1]
    if n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    out = np.ascontiguousarray(z).copy()
    if n == 1:
        return out
    flat = out.reshape(-1, n)
    sign = 1.0 if inverse else -1.0
    # pack per-stage twiddles into one array: index half-1+k for k<half
    tw = np.empty(n - 1, dtype=np.complex128)
    half = 1
    while half < n:
        tw[half - 1 : 2 * half - 1] = np.exp(sign * 2j * np.pi * np.arange(half) / (2 * half))
        half *= 2
    rev = _bit_reverse_indices(n)
    if flat.dtype == np.complex128:
        _fft_rows(flat, tw, rev)
    elif flat.dtype == np.complex64:
        _fft_rows(flat, tw.astype(np.complex64), rev)
    else:
        raise TypeError(f"unsupported dtype {flat.dtype}")
    return out


def _bit_reverse_indices(n):
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.intp)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev
