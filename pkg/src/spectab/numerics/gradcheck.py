"""Central finite-difference gradient checks for the differentiable primitives.

The numeric side perturbs every input coordinate with step ``h`` (central
differences) and never touches the tape, so it stays independent of the
reverse-mode path it validates.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .tensor import GradTape, Tensor

DEFAULT_STEP = 1e-6


def numerical_gradient(f: Callable[[Sequence[np.ndarray]], float], xs: list[np.ndarray], wrt: int, step: float = DEFAULT_STEP) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` w.r.t. ``xs[wrt]``."""
    base = [x.copy() for x in xs]
    x = base[wrt]
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = f(base)
        flat[i] = orig - step
        lo = f(base)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def analytic_gradient(f: Callable[[Sequence[Tensor]], Tensor], xs: list[np.ndarray], wrt: int) -> np.ndarray:
    with GradTape() as tape:
        ts = [Tensor(x.copy()) for x in xs]
        tape.watch(ts[wrt])
        loss = f(ts)
        (g,) = tape.gradients(loss, [ts[wrt]])
    if g is None:
        return np.zeros_like(xs[wrt])
    return g.data


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| scaled by max(1, max |n|)."""
    denom = max(1.0, float(np.max(np.abs(numeric))) if numeric.size else 0.0)
    diff = float(np.max(np.abs(analytic - numeric))) if numeric.size else 0.0
    return diff / denom


def check_gradient(
    f: Callable[[Sequence[Tensor]], Tensor],
    xs: list[np.ndarray],
    wrt: int = 0,
    step: float = DEFAULT_STEP,
) -> float:
    """Relative error between reverse-mode and central-difference gradients."""

    def f_np(arrays: Sequence[np.ndarray]) -> float:
        with T.no_grad():
            return f([Tensor(a) for a in arrays]).item()

    num = numerical_gradient(f_np, xs, wrt, step)
    ana = analytic_gradient(f, xs, wrt)
    return rel_error(ana, num)


def _weighted_sum(out: Tensor, w: np.ndarray) -> Tensor:
    return T.reduce_sum(T.mul(out, Tensor(w)))


def _rand(rng, *shape):
    return rng.standard_normal(shape)


def primitive_cases(rng: np.random.Generator) -> dict[str, tuple]:
    """One randomly drawn check case per primitive: name -> (f, xs, wrt)."""
    w34 = rng.standard_normal((3, 4))
    w32 = rng.standard_normal((3, 2))
    cases: dict[str, tuple] = {}

    cases["add"] = (lambda ts: _weighted_sum(T.add(ts[0], ts[1]), w34), [_rand(rng, 3, 4), _rand(rng, 3, 4)], 0)
    cases["add_broadcast"] = (lambda ts: _weighted_sum(T.add(ts[0], ts[1]), w34), [_rand(rng, 3, 4), _rand(rng, 4)], 1)
    cases["sub"] = (lambda ts: _weighted_sum(T.sub(ts[0], ts[1]), w34), [_rand(rng, 3, 4), _rand(rng, 3, 4)], 1)
    cases["mul"] = (lambda ts: _weighted_sum(T.mul(ts[0], ts[1]), w34), [_rand(rng, 3, 4), _rand(rng, 3, 4)], 0)
    cases["div"] = (
        lambda ts: _weighted_sum(T.div(ts[0], ts[1]), w34),
        [_rand(rng, 3, 4), rng.uniform(0.5, 2.0, (3, 4)) * rng.choice([-1.0, 1.0], (3, 4))],
        1,
    )
    cases["matmul_lhs"] = (lambda ts: _weighted_sum(T.matmul(ts[0], ts[1]), w32), [_rand(rng, 3, 4), _rand(rng, 4, 2)], 0)
    cases["matmul_rhs"] = (lambda ts: _weighted_sum(T.matmul(ts[0], ts[1]), w32), [_rand(rng, 3, 4), _rand(rng, 4, 2)], 1)
    cases["reshape"] = (lambda ts: _weighted_sum(T.reshape(ts[0], (4, 3)), w34.reshape(4, 3)), [_rand(rng, 3, 4)], 0)
    cases["transpose"] = (lambda ts: _weighted_sum(T.transpose(ts[0], (1, 0)), w34.T.copy()), [_rand(rng, 3, 4)], 0)
    cases["broadcast_to"] = (lambda ts: _weighted_sum(T.broadcast_to(ts[0], (3, 4)), w34), [_rand(rng, 1, 4)], 0)
    cases["narrow"] = (lambda ts: _weighted_sum(T.narrow(ts[0], 1, 1, 2), w34[:, :2].copy()), [_rand(rng, 3, 4)], 0)
    w37 = rng.standard_normal((3, 7))
    cases["pad_axis"] = (lambda ts: _weighted_sum(T.pad_axis(ts[0], 1, 1, 2), w37), [_rand(rng, 3, 4)], 0)
    w36 = rng.standard_normal((3, 6))
    cases["concat"] = (
        lambda ts: _weighted_sum(T.concat([ts[0], ts[1]], axis=1), w36),
        [_rand(rng, 3, 4), _rand(rng, 3, 2)],
        1,
    )
    w3 = rng.standard_normal(3)
    w4 = rng.standard_normal(4)
    cases["reduce_sum"] = (lambda ts: _weighted_sum(T.reduce_sum(ts[0], axis=1), w3), [_rand(rng, 3, 4)], 0)
    cases["reduce_mean"] = (lambda ts: _weighted_sum(T.reduce_mean(ts[0], axis=0), w4), [_rand(rng, 3, 4)], 0)
    cases["variance"] = (lambda ts: _weighted_sum(T.variance(ts[0], axis=1), w3), [_rand(rng, 3, 4)], 0)
    cases["std"] = (lambda ts: _weighted_sum(T.std(ts[0], axis=0), w4), [_rand(rng, 3, 4)], 0)
    cases["exp"] = (lambda ts: _weighted_sum(T.exp(ts[0]), w34), [_rand(rng, 3, 4)], 0)
    cases["log"] = (lambda ts: _weighted_sum(T.log(ts[0]), w34), [rng.uniform(0.5, 3.0, (3, 4))], 0)
    cases["sqrt"] = (lambda ts: _weighted_sum(T.sqrt(ts[0]), w34), [rng.uniform(0.5, 3.0, (3, 4))], 0)
    cases["tanh"] = (lambda ts: _weighted_sum(T.tanh(ts[0]), w34), [_rand(rng, 3, 4)], 0)
    cases["gelu"] = (lambda ts: _weighted_sum(T.gelu(ts[0]), w34), [_rand(rng, 3, 4)], 0)
    cases["leaky_relu"] = (lambda ts: _weighted_sum(T.leaky_relu(ts[0]), w34), [rng.uniform(0.2, 2.0, (3, 4)) * rng.choice([-1.0, 1.0], (3, 4))], 0)
    cases["maximum_const"] = (
        lambda ts: _weighted_sum(T.maximum_const(ts[0], 0.0), w34),
        [rng.uniform(0.2, 2.0, (3, 4)) * rng.choice([-1.0, 1.0], (3, 4))],
        0,
    )
    cases["softmax"] = (lambda ts: _weighted_sum(T.softmax(ts[0], axis=1), w34), [_rand(rng, 3, 4)], 0)
    cases["softmax_segments"] = (
        lambda ts: _weighted_sum(T.softmax_segments(ts[0], [(0, 2), (3, 1)], axis=1), w34),
        [_rand(rng, 3, 4)],
        0,
    )

    def ln(ts):
        return _weighted_sum(T.layer_norm(ts[0], ts[1], ts[2]), w34)

    ln_xs = [_rand(rng, 3, 4), rng.uniform(0.5, 1.5, 4), _rand(rng, 4)]
    cases["layer_norm_x"] = (ln, ln_xs, 0)
    cases["layer_norm_gain"] = (ln, ln_xs, 1)

    def drop(ts):
        return _weighted_sum(T.dropout(ts[0], 0.75, np.random.default_rng(1234)), w34)

    cases["dropout"] = (drop, [_rand(rng, 3, 4)], 0)

    w_spec = rng.standard_normal((2, 2, 4, 3, 2))

    def rfft_case(ts):
        return _weighted_sum(T.rfft2(ts[0]).stacked(), w_spec)

    cases["rfft2"] = (rfft_case, [_rand(rng, 2, 4, 4, 2)], 0)

    w_real = rng.standard_normal((2, 4, 4, 2))
    cases["irfft2"] = (
        lambda ts: _weighted_sum(T.irfft2(T._split_stacked(ts[0]), 4), w_real),
        [_rand(rng, 2, 2, 4, 3, 2)],
        0,
    )

    kre = rng.standard_normal((4, 3, 2))
    kim = rng.standard_normal((4, 3, 2))
    spec_in = _rand(rng, 2, 2, 4, 3, 2)

    def filt_s(ts):
        spec = T._split_stacked(ts[0])
        out = T.complex_filter_mul(spec, Tensor(kre), Tensor(kim))
        return _weighted_sum(out.stacked(), w_spec)

    cases["complex_filter_mul_spec"] = (filt_s, [spec_in.copy()], 0)

    def filt_k(ts):
        spec = T._split_stacked(Tensor(spec_in))
        out = T.complex_filter_mul(spec, ts[0], ts[1])
        return _weighted_sum(out.stacked(), w_spec)

    cases["complex_filter_mul_kre"] = (filt_k, [kre.copy(), kim.copy()], 0)
    cases["complex_filter_mul_kim"] = (filt_k, [kre.copy(), kim.copy()], 1)

    def roundtrip(ts):
        spec = T.rfft2(ts[0])
        filtered = T.complex_filter_mul(spec, Tensor(kre), Tensor(kim))
        back = T.irfft2(filtered, 4)
        return _weighted_sum(back, w_real)

    cases["rfft2_filter_irfft2"] = (roundtrip, [_rand(rng, 2, 4, 4, 2)], 0)
    return cases


def run_primitive_suite(points: int = 20, seed: int = 0, step: float = DEFAULT_STEP) -> dict[str, float]:
    """Max relative finite-difference error per primitive over ``points`` draws."""
    worst: dict[str, float] = {}
    for p in range(points):
        rng = np.random.default_rng(seed + p)
        for name, (f, xs, wrt) in primitive_cases(rng).items():
            err = check_gradient(f, xs, wrt, step)
            worst[name] = max(worst.get(name, 0.0), err)
    return worst
