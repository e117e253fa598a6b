"""2-D real FFT over the trailing (H, W, D) layout, per channel.

Forward transform is unnormalised; the inverse carries the 1/(H*W) factor,
so ``irfft2(rfft2(x), W) == x``.  Only the non-redundant half-spectrum
(W//2 + 1 columns) is kept, exploiting conjugate symmetry of real input.

Power-of-two extents run through a radix-2 kernel; one of two
interchangeable backends is selected at import time:

* ``compiled`` -- Cython extension ``_fft_cy`` (built by setup.py);
* ``python``   -- vectorised numpy fallback ``_fft_py``.

Set ``SPECTAB_FFT_BACKEND=python|compiled`` to force one.  Other extents
fall back to a dense DFT-matrix product (used by oracle tests only; all
architecture grids are powers of two).
"""

import os

import numpy as np

_requested = os.environ.get("SPECTAB_FFT_BACKEND", "auto")
if _requested not in ("auto", "compiled", "python"):
    raise ValueError(f"SPECTAB_FFT_BACKEND must be auto|compiled|python, got {_requested!r}")

if _requested == "python":
    from . import _fft_py as _kernel
else:
    try:
        from . import _fft_cy as _kernel  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _fft_py as _kernel

BACKEND = _kernel.BACKEND_NAME


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _dft_lastaxis(z: np.ndarray, inverse: bool) -> np.ndarray:
    # dense O(n^2) transform; the fallback for non-power-of-two extents
    n = z.shape[-1]
    sign = 1.0 if inverse else -1.0
    k = np.arange(n)
    mat = np.exp(sign * 2j * np.pi * np.outer(k, k) / n).astype(z.dtype)
    return z @ mat


def _fft_axis(z: np.ndarray, axis: int, inverse: bool) -> np.ndarray:
    z = np.moveaxis(z, axis, -1)
    n = z.shape[-1]
    flat = np.ascontiguousarray(z).reshape(-1, n)
    if _is_pow2(n):
        out = _kernel.fft_pow2_lastaxis(flat, inverse)
    else:
        out = _dft_lastaxis(flat, inverse)
    return np.moveaxis(out.reshape(z.shape), -1, axis)


def _complex_dtype(real_dtype) -> np.dtype:
    return np.dtype(np.complex64) if np.dtype(real_dtype) == np.float32 else np.dtype(np.complex128)


def rfft2(x: np.ndarray) -> np.ndarray:
    """Real 2-D DFT of ``x`` with shape (..., H, W, D) -> complex (..., H, W//2+1, D)."""
    if x.ndim < 3:
        raise ValueError(f"rfft2 expects (..., H, W, D), got shape {x.shape}")
    w = x.shape[-2]
    z = x.astype(_complex_dtype(x.dtype))
    z = _fft_axis(z, -2, inverse=False)
    z = _fft_axis(z, -3, inverse=False)
    return z[..., : w // 2 + 1, :]


def irfft2(s: np.ndarray, out_width: int) -> np.ndarray:
    """Inverse of :func:`rfft2`; reconstructs width ``out_width`` real output.

    Columns beyond the stored half are rebuilt by conjugate symmetry; the
    result is the real part of the normalised full inverse transform, which
    makes the map well-defined (and linear) for arbitrary complex input.
    """
    if s.ndim < 3:
        raise ValueError(f"irfft2 expects (..., H, Wh, D), got shape {s.shape}")
    h, wh = s.shape[-3], s.shape[-2]
    if wh != out_width // 2 + 1:
        raise ValueError(f"spectrum width {wh} inconsistent with out_width {out_width}")
    full_shape = s.shape[:-2] + (out_width,) + s.shape[-1:]
    full = np.empty(full_shape, dtype=s.dtype)
    full[..., :wh, :] = s
    if out_width > wh:
        u_idx = (-np.arange(h)) % h
        v_src = np.arange(out_width - wh, 0, -1)
        full[..., wh:, :] = np.conj(s[..., u_idx, :, :][..., v_src, :])
    z = _fft_axis(full, -2, inverse=True)
    z = _fft_axis(z, -3, inverse=True)
    z /= h * out_width
    return np.ascontiguousarray(z.real)


def halfspec_col_weights(out_width: int) -> np.ndarray:
    """Multiplicity of each stored column in the full spectrum.

    1.0 for self-conjugate columns (DC and, for even widths, Nyquist),
    2.0 for columns whose mirror is dropped by the half-spectrum storage.
    Used by Parseval-style sums and the FFT gradient rules.
    """
    wh = out_width // 2 + 1
    weights = np.full(wh, 2.0)
    weights[0] = 1.0
    if out_width % 2 == 0:
        weights[-1] = 1.0
    return weights
