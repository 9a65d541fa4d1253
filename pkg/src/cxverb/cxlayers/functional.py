"""
Differentiable complex layer primitives.

A complex convolution with kernel W = W_r + jW_i is evaluated as one real cross-correlation over the
channel-stacked input [U_r; U_i] with the block kernel

    [[ W_r, W_i],
     [-W_i, W_r]]

so that Z_r = W_r*U_r + W_i*U_i and Z_i = W_r*U_i - W_i*U_r.  The transposed convolution uses the same block in
(C_in, C_out, k_t, k_f) layout and is exactly the real adjoint of the convolution.
"""
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from cxverb.cxcore.tape import defvjp, emit
from cxverb.cxcore.tensor import CxTensor
from cxverb.errors import ArgumentError, ShapeError

Pair = Tuple[int, int]


def _pair(value) -> Pair:
    if isinstance(value, (int, np.integer)):
        return int(value), int(value)
    t, f = value
    return int(t), int(f)


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv_transpose_output_size(size: int, kernel: int, stride: int, padding: int, output_padding: int = 0) -> int:
    return (size - 1) * stride - 2 * padding + kernel + output_padding


# -- real kernels ----------------------------------------------------------------------------------------------

def _windows(x: np.ndarray, kernel: Pair, stride: Pair, padding: Pair) -> np.ndarray:
    """Strided (B, C, T', F', k_t, k_f) view of the zero-padded input."""
    p_t, p_f = padding
    padded = np.pad(x, ((0, 0), (0, 0), (p_t, p_t), (p_f, p_f)))
    view = sliding_window_view(padded, kernel, axis=(2, 3))
    return view[:, :, ::stride[0], ::stride[1]]


def corr2d(x: np.ndarray, w: np.ndarray, stride: Pair, padding: Pair) -> np.ndarray:
    """Real 2-D cross-correlation of x (B, C, T, F) with w (O, C, k_t, k_f)."""
    windows = _windows(x, w.shape[2:], stride, padding)
    out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def corr2d_grad_input(g: np.ndarray, w: np.ndarray, stride: Pair, padding: Pair,
                      input_size: Pair) -> np.ndarray:
    """Adjoint of corr2d with respect to its input: scatter g (B, O, T', F') back onto (B, C, T, F)."""
    batch, _, t_out, f_out = g.shape
    k_t, k_f = w.shape[2:]
    p_t, p_f = padding
    s_t, s_f = stride
    t_in, f_in = input_size
    grad = np.zeros((batch, w.shape[1], t_in + 2 * p_t, f_in + 2 * p_f), dtype=g.dtype)
    for a in range(k_t):
        for b in range(k_f):
            contrib = np.tensordot(g, w[:, :, a, b], axes=([1], [0])).transpose(0, 3, 1, 2)
            grad[:, :, a:a + s_t * (t_out - 1) + 1:s_t, b:b + s_f * (f_out - 1) + 1:s_f] += contrib
    return np.ascontiguousarray(grad[:, :, p_t:p_t + t_in, p_f:p_f + f_in])


def corr2d_grad_weight(x: np.ndarray, g: np.ndarray, kernel: Pair, stride: Pair, padding: Pair) -> np.ndarray:
    """Gradient of corr2d with respect to its kernel, shape (O, C, k_t, k_f)."""
    windows = _windows(x, kernel, stride, padding)
    return np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))


# -- block embedding -------------------------------------------------------------------------------------------

def embed_kernel(w_re: np.ndarray, w_im: np.ndarray) -> np.ndarray:
    """Real block kernel (2A, 2B, k_t, k_f) of a complex kernel (A, B, k_t, k_f)."""
    top = np.concatenate([w_re, w_im], axis=1)
    bottom = np.concatenate([-w_im, w_re], axis=1)
    return np.concatenate([top, bottom], axis=0)


def unembed_grad(block: np.ndarray, a: int, b: int) -> Tuple[np.ndarray, np.ndarray]:
    """Fold a gradient with respect to the block kernel back onto (W_r, W_i)."""
    d_re = block[:a, :b] + block[a:, b:]
    d_im = block[:a, b:] - block[a:, :b]
    return d_re, d_im


def _stack(x: CxTensor) -> np.ndarray:
    return np.concatenate([x.re, x.im], axis=1)


def _split(z: np.ndarray, channels: int) -> Tuple[np.ndarray, np.ndarray]:
    return z[:, :channels], z[:, channels:]


# -- convolution -----------------------------------------------------------------------------------------------

def cx_conv2d(x: CxTensor, weight: CxTensor, bias: Optional[CxTensor] = None, stride=(1, 1),
              padding=(0, 0)) -> CxTensor:
    """
    Complex 2-D convolution (cross-correlation) of x (B, C_in, T, F) with weight (C_out, C_in, k_t, k_f).

    :param bias: Optional complex bias of shape (C_out,).
    """
    stride, padding = _pair(stride), _pair(padding)
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"cx_conv2d needs rank-4 input and kernel, got {x.shape} and {weight.shape}")
    c_out, c_in, k_t, k_f = weight.shape
    if x.shape[1] != c_in:
        raise ShapeError(f"input has {x.shape[1]} channels, kernel expects {c_in}")
    if min(stride) < 1 or min(padding) < 0:
        raise ArgumentError(f"invalid stride {stride} or padding {padding}")
    if x.shape[2] + 2 * padding[0] < k_t or x.shape[3] + 2 * padding[1] < k_f:
        raise ShapeError(f"padded input {x.shape[2:]} (padding {padding}) smaller than kernel {(k_t, k_f)}")
    if bias is not None and bias.shape != (c_out,):
        raise ShapeError(f"bias shape {bias.shape} does not match {c_out} output channels")

    stacked = _stack(x)
    block = embed_kernel(weight.re, weight.im)
    z_re, z_im = _split(corr2d(stacked, block, stride, padding), c_out)
    if bias is not None:
        z_re = z_re + bias.re[None, :, None, None]
        z_im = z_im + bias.im[None, :, None, None]
        inputs = (x, weight, bias)
    else:
        inputs = (x, weight)
    saved = (stacked, block, stride, padding, x.shape, bias is not None)
    return emit("conv2d", inputs, z_re, z_im, saved)


@defvjp("conv2d")
def _conv2d_vjp(saved, g_re, g_im):
    stacked, block, stride, padding, in_shape, has_bias = saved
    c_out, c_in = block.shape[0] // 2, block.shape[1] // 2
    g = np.concatenate([g_re, g_im], axis=1)
    d_x = corr2d_grad_input(g, block, stride, padding, in_shape[2:])
    d_block = corr2d_grad_weight(stacked, g, block.shape[2:], stride, padding)
    grads = [_split(d_x, c_in), unembed_grad(d_block, c_out, c_in)]
    if has_bias:
        grads.append((g_re.sum(axis=(0, 2, 3)), g_im.sum(axis=(0, 2, 3))))
    return grads


def transpose_output_padding(in_size: Pair, out_size: Pair, kernel: Pair, stride: Pair, padding: Pair) -> Pair:
    """Output padding that makes a transposed convolution produce out_size exactly."""
    result = []
    for n, target, k, s, p in zip(in_size, out_size, kernel, stride, padding):
        extra = target - conv_transpose_output_size(n, k, s, p)
        if not 0 <= extra < s:
            raise ShapeError(f"transposed convolution cannot map size {n} to {target} "
                             f"(kernel {k}, stride {s}, padding {p})")
        result.append(extra)
    return result[0], result[1]


def cx_conv_transpose2d(x: CxTensor, weight: CxTensor, bias: Optional[CxTensor] = None, stride=(1, 1),
                        padding=(0, 0), output_size: Optional[Sequence[int]] = None) -> CxTensor:
    """
    Complex transposed convolution of x (B, C_in, T, F) with weight (C_in, C_out, k_t, k_f).

    :param output_size: Target spatial size (T_out, F_out); resolves the stride ambiguity (output padding).
        Defaults to zero output padding.
    """
    stride, padding = _pair(stride), _pair(padding)
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"cx_conv_transpose2d needs rank-4 input and kernel, got {x.shape} and {weight.shape}")
    c_in, c_out, k_t, k_f = weight.shape
    if x.shape[1] != c_in:
        raise ShapeError(f"input has {x.shape[1]} channels, kernel expects {c_in}")
    if min(stride) < 1 or min(padding) < 0:
        raise ArgumentError(f"invalid stride {stride} or padding {padding}")
    if bias is not None and bias.shape != (c_out,):
        raise ShapeError(f"bias shape {bias.shape} does not match {c_out} output channels")
    if output_size is None:
        output_size = tuple(conv_transpose_output_size(n, k, s, p)
                            for n, k, s, p in zip(x.shape[2:], (k_t, k_f), stride, padding))
    output_size = _pair(tuple(output_size))
    transpose_output_padding(x.shape[2:], output_size, (k_t, k_f), stride, padding)
    if min(output_size) < 1:
        raise ShapeError(f"transposed convolution output {output_size} is empty")

    stacked = _stack(x)
    block = embed_kernel(weight.re, weight.im)
    z = corr2d_grad_input(stacked, block, stride, padding, output_size)
    z_re, z_im = _split(z, c_out)
    if bias is not None:
        z_re = z_re + bias.re[None, :, None, None]
        z_im = z_im + bias.im[None, :, None, None]
        inputs = (x, weight, bias)
    else:
        inputs = (x, weight)
    saved = (stacked, block, stride, padding, bias is not None)
    return emit("conv_transpose2d", inputs, z_re, z_im, saved)


@defvjp("conv_transpose2d")
def _conv_transpose2d_vjp(saved, g_re, g_im):
    stacked, block, stride, padding, has_bias = saved
    c_in, c_out = block.shape[0] // 2, block.shape[1] // 2
    g = np.concatenate([g_re, g_im], axis=1)
    d_x = corr2d(g, block, stride, padding)
    d_block = corr2d_grad_weight(g, stacked, block.shape[2:], stride, padding)
    grads = [_split(d_x, c_in), unembed_grad(d_block, c_in, c_out)]
    if has_bias:
        grads.append((g_re.sum(axis=(0, 2, 3)), g_im.sum(axis=(0, 2, 3))))
    return grads


# -- normalization and activation ------------------------------------------------------------------------------

def cx_batchnorm(x: CxTensor, gamma: CxTensor, beta: CxTensor, mean: Tuple[np.ndarray, np.ndarray],
                 var: Tuple[np.ndarray, np.ndarray], training: bool, eps: float = 1e-5) -> CxTensor:
    """
    Split batch normalization: re and im planes are normalized per channel over (B, T, F), either with batch
    statistics (training) or with the given running statistics, then scaled by complex gamma and shifted by beta.

    :param mean: Running means (re, im) of shape (C,), used when not training.
    :param var: Running variances (re, im) of shape (C,), used when not training.
    """
    if x.ndim != 4:
        raise ShapeError(f"cx_batchnorm needs a rank-4 input, got {x.shape}")
    channels = x.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise ShapeError(f"affine parameters {gamma.shape}/{beta.shape} do not match {channels} channels")
    if training and x.shape[0] < 2:
        raise ArgumentError("batch normalization in training mode needs a batch of at least 2")

    axes = (0, 2, 3)
    planes = []
    for k, plane in enumerate((x.re, x.im)):
        if training:
            mu = plane.mean(axis=axes)
            sigma2 = plane.var(axis=axes)
        else:
            mu, sigma2 = mean[k], var[k]
        inv_std = 1.0 / np.sqrt(sigma2 + eps)
        planes.append(((plane - mu[None, :, None, None]) * inv_std[None, :, None, None], inv_std))
    (h_re, inv_re), (h_im, inv_im) = planes

    g_r, g_i = gamma.re[None, :, None, None], gamma.im[None, :, None, None]
    out_re = g_r * h_re - g_i * h_im + beta.re[None, :, None, None]
    out_im = g_r * h_im + g_i * h_re + beta.im[None, :, None, None]
    saved = (h_re, h_im, inv_re, inv_im, gamma.re, gamma.im, training)
    return emit("batchnorm_split", (x, gamma, beta), out_re, out_im, saved)


def batch_statistics(x: CxTensor) -> Tuple[Tuple[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """Per-channel (mean, unbiased variance) of each plane, for running-statistic updates."""
    axes = (0, 2, 3)
    n = x.size // x.shape[1]
    correction = n / max(n - 1, 1)
    means = (x.re.mean(axis=axes), x.im.mean(axis=axes))
    variances = (x.re.var(axis=axes) * correction, x.im.var(axis=axes) * correction)
    return means, variances


@defvjp("batchnorm_split")
def _batchnorm_vjp(saved, g_re, g_im):
    h_re, h_im, inv_re, inv_im, gam_re, gam_im, training = saved
    axes = (0, 2, 3)
    c = lambda v: v[None, :, None, None]
    d_h_re = g_re * c(gam_re) + g_im * c(gam_im)
    d_h_im = g_im * c(gam_re) - g_re * c(gam_im)
    d_gamma = ((g_re * h_re + g_im * h_im).sum(axis=axes), (g_im * h_re - g_re * h_im).sum(axis=axes))
    d_beta = (g_re.sum(axis=axes), g_im.sum(axis=axes))

    def through_norm(d_h, h, inv_std):
        if not training:
            return d_h * c(inv_std)
        n = d_h.size // d_h.shape[1]
        return c(inv_std) / n * (n * d_h - c(d_h.sum(axis=axes)) - h * c((d_h * h).sum(axis=axes)))

    return [(through_norm(d_h_re, h_re, inv_re), through_norm(d_h_im, h_im, inv_im)), d_gamma, d_beta]


def cx_leaky_relu(x: CxTensor, slope: float = 0.2) -> CxTensor:
    """Split leaky rectification of the re and im planes."""
    if not 0.0 < slope < 1.0:
        raise ArgumentError(f"leaky slope must lie in (0, 1), got {slope}")
    pos_re, pos_im = x.re > 0, x.im > 0
    return emit("leaky_relu", (x,), np.where(pos_re, x.re, slope * x.re), np.where(pos_im, x.im, slope * x.im),
                (pos_re, pos_im, slope), real_valued=x.real_valued)


@defvjp("leaky_relu")
def _leaky_relu_vjp(saved, g_re, g_im):
    pos_re, pos_im, slope = saved
    return [(np.where(pos_re, g_re, slope * g_re), np.where(pos_im, g_im, slope * g_im))]
