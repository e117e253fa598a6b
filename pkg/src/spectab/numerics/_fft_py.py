"""Pure-numpy radix-2 FFT kernel (fallback backend).

Implements an iterative decimation-in-time Cooley-Tukey transform along the
last axis of a batched complex array.  Butterfly stages are vectorised over
the batch axis, so the Python-level loop runs only log2(n) times.  The
compiled backend (``_fft_cy``) performs the identical sequence of butterfly
operations; both are deterministic.
"""

import numpy as np

BACKEND_NAME = "python"


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.intp)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft_pow2_lastaxis(z: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Unnormalised complex FFT along the last axis; length must be 2**k.

    The inverse flag conjugates the twiddle factors only; no 1/n scaling is
    applied here (the 2-D wrappers own the normalisation convention).
    """
    n = z.shape[-1]
    if n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    if n == 1:
        return z.copy()
    out = np.ascontiguousarray(z[..., _bit_reverse_indices(n)])
    sign = 1.0 if inverse else -1.0
    half = 1
    while half < n:
        step = half * 2
        w = np.exp(sign * 2j * np.pi * np.arange(half) / step).astype(z.dtype)
        view = out.reshape(out.shape[:-1] + (n // step, step))
        lo = view[..., :half]
        hi = view[..., half:] * w
        view[..., half:] = lo - hi
        view[..., :half] = lo + hi
        half = step
    return out
