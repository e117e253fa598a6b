"""Tensor core: numpy-backed arrays, a gradient tape, a differentiable real
2-D FFT (compiled kernel with pure-python fallback), and Adam."""

from .adam import AdamState, adam_init, adam_step
from .fft import BACKEND as FFT_BACKEND
from .tensor import (
    ComplexSpectrum,
    GradTape,
    Tensor,
    add,
    backward,
    broadcast_to,
    complex_filter_mul,
    concat,
    constant,
    div,
    dropout,
    exp,
    frozen,
    gelu,
    irfft2,
    layer_norm,
    leaky_relu,
    log,
    matmul,
    maximum_const,
    mul,
    narrow,
    neg,
    no_grad,
    pad_axis,
    parameter,
    reduce_mean,
    reduce_sum,
    reshape,
    rfft2,
    softmax,
    softmax_segments,
    sqrt,
    square,
    std,
    sub,
    tanh,
    transpose,
    variance,
)

__all__ = [n for n in dir() if not n.startswith("_")]
