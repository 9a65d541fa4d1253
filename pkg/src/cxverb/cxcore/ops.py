"""
Differentiable primitives on CxTensor.  Each forward function computes both planes and records itself through
`emit`; the matching backward rule is registered with `defvjp` under the same name.
"""
from typing import Literal, Sequence, Tuple

import numpy as np

from cxverb.cxcore.tape import defvjp, emit
from cxverb.cxcore.tensor import CxTensor
from cxverb.errors import ArgumentError, ShapeError


def broadcast_shape(a: Tuple[int, ...], b: Tuple[int, ...]) -> Tuple[int, ...]:
    """Same-rank broadcasting over size-1 dimensions only."""
    if len(a) != len(b):
        raise ShapeError(f"rank mismatch {a} vs {b}: no implicit rank promotion")
    out = []
    for x, y in zip(a, b):
        if x == y or y == 1:
            out.append(x)
        elif x == 1:
            out.append(y)
        else:
            raise ShapeError(f"shapes {a} and {b} are not broadcast-compatible")
    return tuple(out)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    return grad.sum(axis=axes, keepdims=True)


# -- elementwise arithmetic ------------------------------------------------------------------------------------

def add(a: CxTensor, b: CxTensor) -> CxTensor:
    shape = broadcast_shape(a.shape, b.shape)
    return emit("add", (a, b), a.re + b.re, a.im + b.im, (a.shape, b.shape, shape),
                real_valued=a.real_valued and b.real_valued)


@defvjp("add")
def _add_vjp(saved, g_re, g_im):
    a_shape, b_shape, _ = saved
    return [(unbroadcast(g_re, a_shape), unbroadcast(g_im, a_shape)),
            (unbroadcast(g_re, b_shape), unbroadcast(g_im, b_shape))]


def sub(a: CxTensor, b: CxTensor) -> CxTensor:
    shape = broadcast_shape(a.shape, b.shape)
    return emit("sub", (a, b), a.re - b.re, a.im - b.im, (a.shape, b.shape, shape),
                real_valued=a.real_valued and b.real_valued)


@defvjp("sub")
def _sub_vjp(saved, g_re, g_im):
    a_shape, b_shape, _ = saved
    return [(unbroadcast(g_re, a_shape), unbroadcast(g_im, a_shape)),
            (unbroadcast(-g_re, b_shape), unbroadcast(-g_im, b_shape))]


def mul(a: CxTensor, b: CxTensor) -> CxTensor:
    """(a_r b_r - a_i b_i) + j(a_r b_i + a_i b_r), elementwise with broadcasting."""
    broadcast_shape(a.shape, b.shape)
    re = a.re * b.re - a.im * b.im
    im = a.re * b.im + a.im * b.re
    return emit("mul", (a, b), re, im, (a.re, a.im, b.re, b.im), real_valued=a.real_valued and b.real_valued)


@defvjp("mul")
def _mul_vjp(saved, g_re, g_im):
    a_re, a_im, b_re, b_im = saved
    return [(unbroadcast(g_re * b_re + g_im * b_im, a_re.shape),
             unbroadcast(g_im * b_re - g_re * b_im, a_re.shape)),
            (unbroadcast(g_re * a_re + g_im * a_im, b_re.shape),
             unbroadcast(g_im * a_re - g_re * a_im, b_re.shape))]


def cx_elementwise(a: CxTensor, b: CxTensor, kind: Literal['add', 'sub', 'mul']) -> CxTensor:
    if kind == 'add':
        return add(a, b)
    if kind == 'sub':
        return sub(a, b)
    if kind == 'mul':
        return mul(a, b)
    raise ArgumentError(f"unknown elementwise kind '{kind}'")


def scale(x: CxTensor, factor: float) -> CxTensor:
    """Multiply by a real constant."""
    return emit("scale", (x,), x.re * factor, x.im * factor, factor, real_valued=x.real_valued)


@defvjp("scale")
def _scale_vjp(factor, g_re, g_im):
    return [(g_re * factor, g_im * factor)]


def shift(x: CxTensor, offset: float) -> CxTensor:
    """Add a real constant to the real plane."""
    return emit("shift", (x,), x.re + offset, x.im, None, real_valued=x.real_valued)


@defvjp("shift")
def _shift_vjp(saved, g_re, g_im):
    return [(g_re, g_im)]


def conj(x: CxTensor) -> CxTensor:
    return emit("conj", (x,), x.re, -x.im, None, real_valued=x.real_valued)


@defvjp("conj")
def _conj_vjp(saved, g_re, g_im):
    return [(g_re, -g_im)]


# -- matrix products -------------------------------------------------------------------------------------------

def cx_matmul(a: CxTensor, b: CxTensor, conj_b: bool = False) -> CxTensor:
    """
    Batched complex product a @ b for a (B,M,K).  Without conj_b, b is (B,K,N); with conj_b, b is (B,N,K) and
    its conjugate transpose b^H is used.  A batch size of 1 on b broadcasts over a's batch.
    """
    if a.ndim != 3 or b.ndim != 3:
        raise ShapeError(f"cx_matmul needs rank-3 operands, got {a.shape} and {b.shape}")
    b_re, b_im = b.re, b.im
    if conj_b:
        b_re, b_im = np.swapaxes(b_re, -1, -2), -np.swapaxes(b_im, -1, -2)
    if a.shape[2] != b_re.shape[1]:
        raise ShapeError(f"inner dimensions differ: {a.shape} @ {b_re.shape}")
    if b_re.shape[0] not in (1, a.shape[0]):
        raise ShapeError(f"batch sizes differ: {a.shape[0]} vs {b_re.shape[0]}")
    re = a.re @ b_re - a.im @ b_im
    im = a.re @ b_im + a.im @ b_re
    return emit("matmul", (a, b), re, im, (a.re, a.im, b_re, b_im, conj_b, b.shape[0]),
                real_valued=a.real_valued and b.real_valued)


@defvjp("matmul")
def _matmul_vjp(saved, g_re, g_im):
    a_re, a_im, b_re, b_im, conj_b, b_batch = saved
    t = lambda m: np.swapaxes(m, -1, -2)
    d_a_re = g_re @ t(b_re) + g_im @ t(b_im)
    d_a_im = g_im @ t(b_re) - g_re @ t(b_im)
    d_b_re = t(a_re) @ g_re + t(a_im) @ g_im
    d_b_im = t(a_re) @ g_im - t(a_im) @ g_re
    if b_batch == 1 and d_b_re.shape[0] != 1:
        d_b_re = d_b_re.sum(axis=0, keepdims=True)
        d_b_im = d_b_im.sum(axis=0, keepdims=True)
    if conj_b:
        d_b_re, d_b_im = t(d_b_re), -t(d_b_im)
    return [(d_a_re, d_a_im), (d_b_re, d_b_im)]


# -- magnitudes and real-valued maps ---------------------------------------------------------------------------

def cx_magnitude(x: CxTensor) -> CxTensor:
    mag = np.sqrt(x.re * x.re + x.im * x.im)
    return emit("magnitude", (x,), mag, np.zeros_like(mag), (x.re, x.im, mag), real_valued=True)


@defvjp("magnitude")
def _magnitude_vjp(saved, g_re, g_im):
    re, im, mag = saved
    safe = np.where(mag > 0, mag, 1.0)
    inv = np.where(mag > 0, 1.0 / safe, 0.0)
    return [(g_re * re * inv, g_re * im * inv)]


def abs2(x: CxTensor) -> CxTensor:
    """|z|^2 as a real-valued tensor."""
    power = x.re * x.re + x.im * x.im
    return emit("abs2", (x,), power, np.zeros_like(power), (x.re, x.im), real_valued=True)


@defvjp("abs2")
def _abs2_vjp(saved, g_re, g_im):
    re, im = saved
    return [(2.0 * g_re * re, 2.0 * g_re * im)]


def fold_planes(x: CxTensor) -> CxTensor:
    """Real-valued tensor re + im (collapses the two planes for plane-wise sums)."""
    total = x.re + x.im
    return emit("fold_planes", (x,), total, np.zeros_like(total), None, real_valued=True)


@defvjp("fold_planes")
def _fold_planes_vjp(saved, g_re, g_im):
    return [(g_re, g_re)]


def plane_abs(x: CxTensor) -> CxTensor:
    """|re| + j|im|, applied to each plane independently."""
    return emit("plane_abs", (x,), np.abs(x.re), np.abs(x.im), (np.sign(x.re), np.sign(x.im)),
                real_valued=x.real_valued)


@defvjp("plane_abs")
def _plane_abs_vjp(saved, g_re, g_im):
    s_re, s_im = saved
    return [(g_re * s_re, g_im * s_im)]


def square_planes(x: CxTensor) -> CxTensor:
    return emit("square_planes", (x,), x.re * x.re, x.im * x.im, (x.re, x.im), real_valued=x.real_valued)


@defvjp("square_planes")
def _square_planes_vjp(saved, g_re, g_im):
    re, im = saved
    return [(2.0 * g_re * re, 2.0 * g_im * im)]


def tanh_planes(x: CxTensor) -> CxTensor:
    t_re, t_im = np.tanh(x.re), np.tanh(x.im)
    return emit("tanh_planes", (x,), t_re, t_im, (t_re, t_im), real_valued=x.real_valued)


@defvjp("tanh_planes")
def _tanh_planes_vjp(saved, g_re, g_im):
    t_re, t_im = saved
    return [(g_re * (1.0 - t_re * t_re), g_im * (1.0 - t_im * t_im))]


def _require_real(x: CxTensor, op: str) -> None:
    if not x.real_valued:
        raise ArgumentError(f"{op} needs a real-valued tensor")


def sigmoid(x: CxTensor) -> CxTensor:
    _require_real(x, "sigmoid")
    s = 0.5 * (1.0 + np.tanh(0.5 * x.re))
    return emit("sigmoid", (x,), s, np.zeros_like(s), s, real_valued=True)


@defvjp("sigmoid")
def _sigmoid_vjp(s, g_re, g_im):
    return [(g_re * s * (1.0 - s), None)]


def softmax(x: CxTensor, axis: int = -1) -> CxTensor:
    """Softmax of a real-valued tensor along one axis."""
    _require_real(x, "softmax")
    z = x.re - x.re.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)
    return emit("softmax", (x,), s, np.zeros_like(s), (s, axis), real_valued=True)


@defvjp("softmax")
def _softmax_vjp(saved, g_re, g_im):
    s, axis = saved
    return [(s * (g_re - (g_re * s).sum(axis=axis, keepdims=True)), None)]


# -- shape manipulation ----------------------------------------------------------------------------------------

def reshape(x: CxTensor, shape: Sequence[int]) -> CxTensor:
    shape = tuple(int(d) for d in shape)
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"cannot reshape {x.shape} ({x.size} elements) to {shape}")
    return emit("reshape", (x,), x.re.reshape(shape), x.im.reshape(shape), x.shape, real_valued=x.real_valued)


@defvjp("reshape")
def _reshape_vjp(shape, g_re, g_im):
    return [(g_re.reshape(shape), g_im.reshape(shape))]


def permute(x: CxTensor, order: Sequence[int]) -> CxTensor:
    order = tuple(int(o) for o in order)
    if sorted(order) != list(range(x.ndim)):
        raise ArgumentError(f"{order} is not a permutation of {x.ndim} axes")
    re = np.ascontiguousarray(np.transpose(x.re, order))
    im = np.ascontiguousarray(np.transpose(x.im, order))
    return emit("permute", (x,), re, im, order, real_valued=x.real_valued)


@defvjp("permute")
def _permute_vjp(order, g_re, g_im):
    inverse = tuple(np.argsort(order))
    return [(np.transpose(g_re, inverse), np.transpose(g_im, inverse))]


def concat(tensors: Sequence[CxTensor], axis: int = 1) -> CxTensor:
    if not tensors:
        raise ArgumentError("concat needs at least one tensor")
    ranks = {t.ndim for t in tensors}
    if len(ranks) != 1:
        raise ShapeError(f"concat operands differ in rank: {[t.shape for t in tensors]}")
    axis = axis % tensors[0].ndim
    for t in tensors[1:]:
        if t.shape[:axis] + t.shape[axis + 1:] != tensors[0].shape[:axis] + tensors[0].shape[axis + 1:]:
            raise ShapeError(f"concat operands differ off axis {axis}: {[t.shape for t in tensors]}")
    re = np.concatenate([t.re for t in tensors], axis=axis)
    im = np.concatenate([t.im for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    return emit("concat", tuple(tensors), re, im, (axis, sizes),
                real_valued=all(t.real_valued for t in tensors))


@defvjp("concat")
def _concat_vjp(saved, g_re, g_im):
    axis, sizes = saved
    cuts = np.cumsum(sizes)[:-1]
    return list(zip(np.split(g_re, cuts, axis=axis), np.split(g_im, cuts, axis=axis)))


# -- reductions ------------------------------------------------------------------------------------------------

def sum_all(x: CxTensor) -> CxTensor:
    return emit("sum_all", (x,), np.array(x.re.sum()), np.array(x.im.sum()), x.shape, real_valued=x.real_valued)


@defvjp("sum_all")
def _sum_all_vjp(shape, g_re, g_im):
    return [(np.full(shape, g_re.reshape(-1)[0]), np.full(shape, g_im.reshape(-1)[0]))]


def mean_all(x: CxTensor) -> CxTensor:
    n = x.size
    return emit("mean_all", (x,), np.array(x.re.sum() / n), np.array(x.im.sum() / n), x.shape,
                real_valued=x.real_valued)


@defvjp("mean_all")
def _mean_all_vjp(shape, g_re, g_im):
    n = int(np.prod(shape))
    return [(np.full(shape, g_re.reshape(-1)[0] / n), np.full(shape, g_im.reshape(-1)[0] / n))]


def dot_planes(x: CxTensor, weight_re: np.ndarray, weight_im: np.ndarray) -> CxTensor:
    """Real scalar sum(re * weight_re + im * weight_im) against constant weights."""
    if weight_re.shape != x.shape or weight_im.shape != x.shape:
        raise ShapeError(f"weights {weight_re.shape} do not match tensor {x.shape}")
    value = np.array(np.sum(x.re * weight_re) + np.sum(x.im * weight_im))
    return emit("dot_planes", (x,), value, np.zeros_like(value), (weight_re, weight_im), real_valued=True)


@defvjp("dot_planes")
def _dot_planes_vjp(saved, g_re, g_im):
    weight_re, weight_im = saved
    g = g_re.reshape(-1)[0]
    return [(g * weight_re, g * weight_im)]


def reciprocal(x: CxTensor) -> CxTensor:
    """1/x of a real-valued tensor."""
    _require_real(x, "reciprocal")
    if np.any(x.re == 0):
        raise ArgumentError("reciprocal of zero")
    inv = 1.0 / x.re
    return emit("reciprocal", (x,), inv, np.zeros_like(inv), inv, real_valued=True)


@defvjp("reciprocal")
def _reciprocal_vjp(inv, g_re, g_im):
    return [(-g_re * inv * inv, None)]


def log(x: CxTensor) -> CxTensor:
    """Natural logarithm of a strictly positive real-valued tensor."""
    _require_real(x, "log")
    if np.any(x.re <= 0):
        raise ArgumentError("log of a non-positive value")
    out = np.log(x.re)
    return emit("log", (x,), out, np.zeros_like(out), x.re, real_valued=True)


@defvjp("log")
def _log_vjp(values, g_re, g_im):
    return [(g_re / values, None)]
