"""Minimal tensor + reverse-mode differentiation core.

Design notes
------------
* A :class:`Tensor` wraps a numpy array (float32 for training, float64 for
  tests/gradient checks).  Array math is delegated to numpy/BLAS; this module
  owns the differentiation bookkeeping.
* Gradients are recorded define-by-run on a :class:`GradTape`.  Each primitive
  appends one node holding the output tensor and, per tracked input, a vjp
  closure.  Replaying the node list in reverse creation order is a valid
  reverse topological sweep.
* Every vjp closure is itself written in terms of the primitives below, so
  running a backward pass with ``create_graph=True`` records the gradient
  computation onto the same tape.  That is what makes the gradient-penalty
  term (a gradient of a gradient) trainable.
* Complex spectra are stored as pairs of real tensors (see
  :class:`ComplexSpectrum`); the only complex-aware primitives are the two
  FFT entry points, whose adjoints are each other up to constant column
  weights.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import fft as _fft

__all__ = [
    "Tensor",
    "GradTape",
    "ComplexSpectrum",
    "no_grad",
    "frozen",
    "tensor",
    "constant",
    "parameter",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "reshape",
    "transpose",
    "broadcast_to",
    "narrow",
    "pad_axis",
    "concat",
    "reduce_sum",
    "reduce_mean",
    "variance",
    "std",
    "exp",
    "log",
    "sqrt",
    "square",
    "tanh",
    "gelu",
    "leaky_relu",
    "maximum_const",
    "softmax",
    "softmax_segments",
    "dropout",
    "layer_norm",
    "rfft2",
    "irfft2",
    "complex_filter_mul",
]

# Guard used by the sqrt adjoint: keeps the downstream factor finite so that
# chains like d(sqrt(var))/dx collapse to an exact 0 (not inf*0) when var==0.
_SQRT_GUARD = 1e-12


class Tensor:
    """N-dimensional real array, optionally tracked on the active tape."""

    __slots__ = ("data", "requires_grad", "_tape", "_node_id")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self._tape = None
        self._node_id = None

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, tracked={_tracked(self)})"

    # -- operator sugar -------------------------------------------------
    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other):
        return add(self, self._coerce(other))

    def __radd__(self, other):
        return add(self._coerce(other), self)

    def __sub__(self, other):
        return sub(self, self._coerce(other))

    def __rsub__(self, other):
        return sub(self._coerce(other), self)

    def __mul__(self, other):
        return mul(self, self._coerce(other))

    def __rmul__(self, other):
        return mul(self._coerce(other), self)

    def __truediv__(self, other):
        return div(self, self._coerce(other))

    def __rtruediv__(self, other):
        return div(self._coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)


# ---------------------------------------------------------------------------
# tape machinery
# ---------------------------------------------------------------------------

_ACTIVE_TAPE: "GradTape | None" = None
_GRAD_ENABLED = True


class GradTape:
    """Ordered record of primitive applications for one training step.

    One tape may be active at a time (tensors on a tape belong to exactly
    that tape).  ``gradients`` may be called repeatedly while the tape is
    open; a call with ``create_graph=False`` and ``retain=False`` consumes
    the tape.
    """

    def __init__(self):
        self._ops: list[tuple[Tensor, tuple]] = []
        self._closed = False

    def __enter__(self) -> "GradTape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("another GradTape is already active")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def watch(self, *tensors: Tensor) -> None:
        for t in tensors:
            t.requires_grad = True

    def _record(self, out: Tensor, parents: tuple) -> None:
        if self._closed:
            raise RuntimeError("tape already consumed by a backward pass")
        out._tape = self
        out._node_id = len(self._ops)
        self._ops.append((out, parents))

    def gradients(
        self,
        target: Tensor,
        sources: Sequence[Tensor],
        create_graph: bool = False,
        retain: bool = False,
    ) -> list["Tensor | None"]:
        """Reverse-mode gradients of a scalar ``target`` w.r.t. ``sources``.

        Returns one entry per source; ``None`` marks a source the target does
        not depend on (e.g. a detached constant).  With ``create_graph`` the
        gradient computation is recorded, so gradients of expressions built
        from the results are exact second-order derivatives.
        """
        if self._closed:
            raise RuntimeError("tape already consumed by a backward pass")
        if target.size != 1:
            raise ValueError(f"backward target must be scalar, got shape {target.shape}")
        grads: dict[int, Tensor] = {
            id(target): Tensor(np.ones_like(target.data))
        }
        ops = list(self._ops)
        if create_graph:
            self._sweep(ops, grads)
        else:
            with no_grad():
                self._sweep(ops, grads)
        result = [grads.get(id(s)) for s in sources]
        if not create_graph and not retain:
            self._closed = True
            self._ops.clear()
        return result

    @staticmethod
    def _sweep(ops, grads) -> None:
        for out, parents in reversed(ops):
            g = grads.get(id(out))
            if g is None:
                continue
            for parent, vjp in parents:
                pg = vjp(g)
                prev = grads.get(id(parent))
                grads[id(parent)] = pg if prev is None else add(prev, pg)


def backward(loss: Tensor, sources: Sequence[Tensor]) -> list["Tensor | None"]:
    """Consume the active tape: gradients of scalar ``loss`` w.r.t. sources."""
    if _ACTIVE_TAPE is None:
        raise RuntimeError("backward requires an active GradTape")
    return _ACTIVE_TAPE.gradients(loss, sources)


@contextmanager
def no_grad():
    """Disable recording inside the block (forward values only)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


@contextmanager
def frozen(params: Iterable[Tensor]):
    """Temporarily clear ``requires_grad`` (e.g. critic weights in a generator step)."""
    params = list(params)
    prev = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, r in zip(params, prev):
            p.requires_grad = r


def _tracked(t: Tensor) -> bool:
    return t.requires_grad or (t._tape is not None and t._tape is _ACTIVE_TAPE)


def _make(out_data: np.ndarray, parents: Sequence[tuple]) -> Tensor:
    out = Tensor(out_data)
    tape = _ACTIVE_TAPE
    if tape is not None and _GRAD_ENABLED:
        tracked = tuple((p, vjp) for p, vjp in parents if _tracked(p))
        if tracked:
            tape._record(out, tracked)
    return out


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------


def tensor(data, dtype=np.float64) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype))


def constant(data, dtype=np.float64) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype))


def parameter(data, dtype=None) -> Tensor:
    return Tensor(np.array(data, dtype=dtype, copy=True), requires_grad=True)


# ---------------------------------------------------------------------------
# broadcasting helpers
# ---------------------------------------------------------------------------


def _unbroadcast(g: Tensor, shape: tuple) -> Tensor:
    """Sum ``g`` down to ``shape`` (adjoint of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = reduce_sum(g, axis=tuple(range(extra)))
    axes = tuple(i for i, (gd, sd) in enumerate(zip(g.shape, shape)) if sd == 1 and gd != 1)
    if axes:
        g = reduce_sum(g, axis=axes, keepdims=True)
    if g.shape != shape:
        g = reshape(g, shape)
    return g


# ---------------------------------------------------------------------------
# arithmetic primitives
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data
    return _make(
        out,
        [
            (a, lambda g: _unbroadcast(g, a.shape)),
            (b, lambda g: _unbroadcast(g, b.shape)),
        ],
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data
    return _make(
        out,
        [
            (a, lambda g: _unbroadcast(g, a.shape)),
            (b, lambda g: _unbroadcast(neg(g), b.shape)),
        ],
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data
    return _make(
        out,
        [
            (a, lambda g: _unbroadcast(mul(g, b), a.shape)),
            (b, lambda g: _unbroadcast(mul(g, a), b.shape)),
        ],
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    out = a.data / b.data
    return _make(
        out,
        [
            (a, lambda g: _unbroadcast(div(g, b), a.shape)),
            (b, lambda g: _unbroadcast(neg(div(mul(g, a), mul(b, b))), b.shape)),
        ],
    )


def neg(a: Tensor) -> Tensor:
    minus_one = Tensor(np.asarray(-1.0, dtype=a.dtype))
    return mul(a, minus_one)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = a.data @ b.data
    return _make(
        out,
        [
            (a, lambda g: matmul(g, transpose(b, (1, 0)))),
            (b, lambda g: matmul(transpose(a, (1, 0)), g)),
        ],
    )


# ---------------------------------------------------------------------------
# shape primitives
# ---------------------------------------------------------------------------


def reshape(x: Tensor, shape: tuple) -> Tensor:
    shape = tuple(shape)
    old = x.shape
    return _make(x.data.reshape(shape), [(x, lambda g: reshape(g, old))])


def transpose(x: Tensor, axes: tuple) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _make(np.transpose(x.data, axes), [(x, lambda g: transpose(g, inverse))])


def broadcast_to(x: Tensor, shape: tuple) -> Tensor:
    shape = tuple(shape)
    old = x.shape
    out = np.broadcast_to(x.data, shape).copy()
    return _make(out, [(x, lambda g: _unbroadcast(g, old))])


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    axis = axis % x.ndim
    n = x.shape[axis]
    if start < 0 or start + length > n:
        raise ValueError(f"narrow [{start}:{start + length}] out of range for axis {axis} of size {n}")
    index = tuple(slice(None) if i != axis else slice(start, start + length) for i in range(x.ndim))
    out = np.ascontiguousarray(x.data[index])
    return _make(out, [(x, lambda g: pad_axis(g, axis, start, n - start - length))])


def pad_axis(x: Tensor, axis: int, before: int, after: int) -> Tensor:
    axis = axis % x.ndim
    pads = [(0, 0)] * x.ndim
    pads[axis] = (before, after)
    length = x.shape[axis]
    out = np.pad(x.data, pads)
    return _make(out, [(x, lambda g: narrow(g, axis, before, length))])


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    parts = list(parts)
    axis = axis % parts[0].ndim
    out = np.concatenate([p.data for p in parts], axis=axis)
    parents = []
    offset = 0
    for p in parts:
        length = p.shape[axis]
        parents.append((p, (lambda o, L: lambda g: narrow(g, axis, o, L))(offset, length)))
        offset += length
    return _make(out, parents)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def _norm_axes(axis, ndim) -> tuple:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        return (axis % ndim,)
    return tuple(a % ndim for a in axis)


def reduce_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)
    old = x.shape
    kept = tuple(1 if i in axes else d for i, d in enumerate(old))

    def vjp(g):
        if not keepdims:
            g = reshape(g, kept)
        return broadcast_to(g, old)

    return _make(np.asarray(out), [(x, vjp)])


def reduce_mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, x.ndim)
    count = 1
    for a in axes:
        count *= x.shape[a]
    return mul(reduce_sum(x, axis=axis, keepdims=keepdims), Tensor(np.asarray(1.0 / count, dtype=x.dtype)))


def variance(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Population variance (ddof=0) along ``axis``."""
    m = reduce_mean(x, axis=axis, keepdims=True)
    d = sub(x, m)
    return reduce_mean(mul(d, d), axis=axis, keepdims=keepdims)


def std(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Population standard deviation; gradient is taken as 0 where it is 0."""
    v = maximum_const(variance(x, axis=axis, keepdims=keepdims), 0.0)
    return sqrt(v)


# ---------------------------------------------------------------------------
# pointwise primitives
# ---------------------------------------------------------------------------


def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)
    out = _make(out_data, [(x, lambda g: mul(g, out))])
    return out


def log(x: Tensor) -> Tensor:
    return _make(np.log(x.data), [(x, lambda g: div(g, x))])


def sqrt(x: Tensor) -> Tensor:
    out_data = np.sqrt(x.data)
    out = _make(out_data, [(x, lambda g: div(g, mul(Tensor(np.asarray(2.0, dtype=x.dtype)), maximum_const(out, _SQRT_GUARD))))])
    return out


def square(x: Tensor) -> Tensor:
    return mul(x, x)


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)
    one = Tensor(np.asarray(1.0, dtype=x.dtype))
    out = _make(out_data, [(x, lambda g: mul(g, sub(one, mul(out, out))))])
    return out


def maximum_const(x: Tensor, c: float) -> Tensor:
    mask = Tensor((x.data >= c).astype(x.data.dtype))
    return _make(np.maximum(x.data, c), [(x, lambda g: mul(g, mask))])


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    pos = x.data > 0
    mask = Tensor(np.where(pos, 1.0, slope).astype(x.data.dtype))
    return _make(np.where(pos, x.data, slope * x.data), [(x, lambda g: mul(g, mask))])


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3)))."""
    dt = x.dtype
    c0 = Tensor(np.asarray(math.sqrt(2.0 / math.pi), dtype=dt))
    c1 = Tensor(np.asarray(0.044715, dtype=dt))
    half = Tensor(np.asarray(0.5, dtype=dt))
    one = Tensor(np.asarray(1.0, dtype=dt))
    inner = mul(c0, add(x, mul(c1, mul(x, mul(x, x)))))
    return mul(mul(half, x), add(one, tanh(inner)))


# ---------------------------------------------------------------------------
# composite layers
# ---------------------------------------------------------------------------


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along ``axis``.

    The max shift is detached: softmax is shift invariant, so treating the
    shift as a constant leaves both the value and the gradient exact.
    """
    axis = axis % x.ndim
    if x.shape[axis] == 0:
        raise ValueError("softmax over an empty segment")
    shift = Tensor(np.max(x.data, axis=axis, keepdims=True))
    z = exp(sub(x, shift))
    return div(z, reduce_sum(z, axis=axis, keepdims=True))


def softmax_segments(x: Tensor, segments: Sequence[tuple], axis: int = -1) -> Tensor:
    """Independent softmax over each (offset, width) span of ``axis``.

    Coordinates not covered by any segment pass through unchanged; segments
    must be disjoint and sorted.  Used for the per-column one-hot spans of an
    encoded row.
    """
    axis = axis % x.ndim
    total = x.shape[axis]
    parts = []
    cursor = 0
    for offset, width in segments:
        if width < 1:
            raise ValueError("softmax segment must be non-empty")
        if offset < cursor:
            raise ValueError("softmax segments must be disjoint and sorted")
        if offset > cursor:
            parts.append(narrow(x, axis, cursor, offset - cursor))
        parts.append(softmax(narrow(x, axis, offset, width), axis=axis))
        cursor = offset + width
    if cursor < total:
        parts.append(narrow(x, axis, cursor, total - cursor))
    return concat(parts, axis=axis)


def dropout(x: Tensor, keep_prob: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout driven by an explicit rng stream (replayable)."""
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError(f"keep_prob must be in (0, 1], got {keep_prob}")
    if keep_prob == 1.0:
        return x
    mask = (rng.random(x.shape) < keep_prob).astype(x.data.dtype) / np.asarray(keep_prob, dtype=x.dtype)
    return mul(x, Tensor(mask))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, axis: int = -1, eps: float = 1e-5) -> Tensor:
    """Layer normalisation over ``axis`` with learnable gain/bias."""
    m = reduce_mean(x, axis=axis, keepdims=True)
    d = sub(x, m)
    v = reduce_mean(mul(d, d), axis=axis, keepdims=True)
    inv = div(Tensor(np.asarray(1.0, dtype=x.dtype)), sqrt(add(v, Tensor(np.asarray(eps, dtype=x.dtype)))))
    return add(mul(mul(d, inv), gain), bias)


# ---------------------------------------------------------------------------
# spectral primitives
# ---------------------------------------------------------------------------


@dataclass
class ComplexSpectrum:
    """Half-spectrum of a real 2-D transform: re/im tensors of shape (..., H, W//2+1, D)."""

    re: Tensor
    im: Tensor

    @property
    def shape(self) -> tuple:
        return self.re.shape

    def stacked(self) -> Tensor:
        r = reshape(self.re, (1,) + self.re.shape)
        i = reshape(self.im, (1,) + self.im.shape)
        return concat([r, i], axis=0)


def _split_stacked(s: Tensor) -> ComplexSpectrum:
    inner = s.shape[1:]
    re = reshape(narrow(s, 0, 0, 1), inner)
    im = reshape(narrow(s, 0, 1, 1), inner)
    return ComplexSpectrum(re, im)


def _col_mask(width: int, wh: int, ndim: int, dtype, invert: bool) -> Tensor:
    weights = _fft.halfspec_col_weights(width)
    if invert:
        weights = 1.0 / weights
    shape = (1,) * (ndim - 2) + (wh, 1)
    return Tensor(weights.reshape(shape).astype(dtype))


def _rfft2_stacked(x: Tensor) -> Tensor:
    h, w = x.shape[-3], x.shape[-2]
    spec = _fft.rfft2(x.data)
    out = np.stack([np.ascontiguousarray(spec.real), np.ascontiguousarray(spec.imag)]).astype(x.data.dtype)

    def vjp(g):
        # adjoint: scale mirrored columns by 1/2, inverse-transform, undo the
        # 1/(H*W) normalisation of irfft2
        mask = _col_mask(w, spec.shape[-2], g.ndim, g.dtype, invert=True)
        scale = Tensor(np.asarray(float(h * w), dtype=g.dtype))
        return mul(_irfft2_stacked(mul(g, mask), w), scale)

    return _make(out, [(x, vjp)])


def _irfft2_stacked(s: Tensor, out_width: int) -> Tensor:
    h, wh = s.shape[-3], s.shape[-2]
    z = s.data[0] + 1j * s.data[1]
    out = _fft.irfft2(z, out_width).astype(s.data.dtype)

    def vjp(g):
        mask = _col_mask(out_width, wh, g.ndim + 1, g.dtype, invert=False)
        scale = Tensor(np.asarray(1.0 / (h * out_width), dtype=g.dtype))
        return mul(mul(_rfft2_stacked(g), mask), scale)

    return _make(out, [(s, vjp)])


def rfft2(x: Tensor) -> ComplexSpectrum:
    """Differentiable real 2-D DFT over (..., H, W, D) -> half spectrum."""
    return _split_stacked(_rfft2_stacked(x))


def irfft2(s: ComplexSpectrum, out_width: int) -> Tensor:
    """Differentiable inverse of :func:`rfft2`; needs the original width."""
    if s.re.shape != s.im.shape:
        raise ValueError("spectrum re/im shapes differ")
    if s.re.shape[-2] != out_width // 2 + 1:
        raise ValueError(
            f"spectrum width {s.re.shape[-2]} inconsistent with out_width {out_width}"
        )
    return _irfft2_stacked(s.stacked(), out_width)


def complex_filter_mul(s: ComplexSpectrum, k_re: Tensor, k_im: Tensor) -> ComplexSpectrum:
    """Element-wise complex product of a spectrum with learnable weights."""
    if s.re.shape[-3:] != k_re.shape[-3:] or k_re.shape != k_im.shape:
        raise ValueError(f"filter shape {k_re.shape} does not match spectrum {s.re.shape}")
    re = sub(mul(s.re, k_re), mul(s.im, k_im))
    im = add(mul(s.re, k_im), mul(s.im, k_re))
    return ComplexSpectrum(re, im)
