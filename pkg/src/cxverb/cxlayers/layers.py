"""
Complex layers and the encoder, decoder and SkipConv building blocks of the U-Net generator.
"""
from typing import Optional, Sequence, Tuple

import numpy as np

from cxverb.cxcore import ops
from cxverb.cxcore.tensor import CxTensor
from cxverb.cxlayers.functional import (_pair, batch_statistics, conv_output_size, cx_batchnorm, cx_conv2d,
                                        cx_conv_transpose2d, cx_leaky_relu)
from cxverb.cxlayers.module import Module, Parameter
from cxverb.errors import ConfigError, ShapeError


def init_kernel(shape: Tuple[int, ...], fan_in: int, rng: np.random.Generator, dtype=np.float64) -> CxTensor:
    """Complex Gaussian kernel with per-plane standard deviation sqrt(1 / (2 fan_in))."""
    std = np.sqrt(1.0 / (2.0 * fan_in))
    return CxTensor(rng.normal(0.0, std, shape), rng.normal(0.0, std, shape), dtype=dtype)


def same_padding(kernel: Sequence[int]) -> Tuple[int, int]:
    return (int(kernel[0]) - 1) // 2, (int(kernel[1]) - 1) // 2


class CxConv2d(Module):
    """Complex 2-D convolution; weight (C_out, C_in, k_t, k_f), bias (C_out,)."""

    def __init__(self, in_channels: int, out_channels: int, kernel, stride=(1, 1), padding=(0, 0),
                 bias: bool = True, rng: Optional[np.random.Generator] = None) -> None:
        super().__init__()
        kernel, self.stride, self.padding = _pair(kernel), _pair(stride), _pair(padding)
        if min(kernel) < 1 or min(self.stride) < 1 or min(self.padding) < 0:
            raise ConfigError(f"invalid convolution geometry: kernel {kernel}, stride {self.stride}, "
                              f"padding {self.padding}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_channels * kernel[0] * kernel[1]
        self.weight = Parameter(init_kernel((out_channels, in_channels) + kernel, fan_in, rng))
        if bias:
            self.bias = Parameter(CxTensor.zeros((out_channels,)))
        else:
            self.bias = None

    def output_size(self, size: Tuple[int, int]) -> Tuple[int, int]:
        return (conv_output_size(size[0], self.kernel[0], self.stride[0], self.padding[0]),
                conv_output_size(size[1], self.kernel[1], self.stride[1], self.padding[1]))

    def effective_weight(self) -> CxTensor:
        return self.weight.data

    def forward(self, x: CxTensor) -> CxTensor:
        bias = self.bias.data if self.bias is not None else None
        return cx_conv2d(x, self.effective_weight(), bias, self.stride, self.padding)


class CxConvTranspose2d(Module):
    """Complex transposed convolution; weight (C_in, C_out, k_t, k_f)."""

    def __init__(self, in_channels: int, out_channels: int, kernel, stride=(1, 1), padding=(0, 0),
                 bias: bool = True, rng: Optional[np.random.Generator] = None) -> None:
        super().__init__()
        kernel, self.stride, self.padding = _pair(kernel), _pair(stride), _pair(padding)
        if min(kernel) < 1 or min(self.stride) < 1 or min(self.padding) < 0:
            raise ConfigError(f"invalid transposed convolution geometry: kernel {kernel}, stride {self.stride}, "
                              f"padding {self.padding}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_channels * kernel[0] * kernel[1]
        self.weight = Parameter(init_kernel((in_channels, out_channels) + kernel, fan_in, rng))
        if bias:
            self.bias = Parameter(CxTensor.zeros((out_channels,)))
        else:
            self.bias = None

    def forward(self, x: CxTensor, output_size: Optional[Sequence[int]] = None) -> CxTensor:
        bias = self.bias.data if self.bias is not None else None
        return cx_conv_transpose2d(x, self.weight.data, bias, self.stride, self.padding, output_size)


class CxBatchNorm2d(Module):
    """
    Split complex batch normalization with running statistics.  Running statistics update in training mode
    unless the module is frozen.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1, mode: str = 'split') -> None:
        super().__init__()
        if mode == 'whitening':
            raise ConfigError("complex whitening batch normalization is reserved and not implemented; use 'split'")
        if mode != 'split':
            raise ConfigError(f"unknown batch normalization mode '{mode}'")
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = Parameter(CxTensor.ones((channels,)))
        self.beta = Parameter(CxTensor.zeros((channels,)))
        self.register_buffer('running_mean_re', np.zeros(channels))
        self.register_buffer('running_mean_im', np.zeros(channels))
        self.register_buffer('running_var_re', np.ones(channels))
        self.register_buffer('running_var_im', np.ones(channels))

    def forward(self, x: CxTensor) -> CxTensor:
        if self.training and not self.is_frozen and x.ndim == 4 and x.shape[0] >= 2:
            (m_re, m_im), (v_re, v_im) = batch_statistics(x)
            k = self.momentum
            self.running_mean_re = (1 - k) * self.running_mean_re + k * m_re
            self.running_mean_im = (1 - k) * self.running_mean_im + k * m_im
            self.running_var_re = (1 - k) * self.running_var_re + k * v_re
            self.running_var_im = (1 - k) * self.running_var_im + k * v_im
        return cx_batchnorm(x, self.gamma.data, self.beta.data,
                            (self.running_mean_re, self.running_mean_im),
                            (self.running_var_re, self.running_var_im), self.training, self.eps)


class SkipConvBlock(Module):
    """Residual unit out = x + act(bn(conv(x))) on a shape-preserving complex convolution."""

    def __init__(self, channels: int, kernel=(5, 3), stride=(1, 1), padding=None, out_channels: Optional[int] = None,
                 slope: float = 0.2, batchnorm: bool = True, bn_mode: str = 'split',
                 rng: Optional[np.random.Generator] = None) -> None:
        super().__init__()
        kernel, stride = _pair(kernel), _pair(stride)
        padding = same_padding(kernel) if padding is None else _pair(padding)
        out_channels = channels if out_channels is None else out_channels
        if out_channels != channels:
            raise ConfigError(f"SkipConv block must keep its channel count ({channels} -> {out_channels})")
        if stride != (1, 1):
            raise ConfigError(f"SkipConv block needs stride 1, got {stride}")
        if any(k % 2 == 0 or 2 * p != k - 1 for k, p in zip(kernel, padding)):
            raise ConfigError(f"SkipConv block kernel {kernel} with padding {padding} does not preserve shape")
        self.slope = slope
        self.conv = CxConv2d(channels, channels, kernel, stride, padding, rng=rng)
        self.bn = CxBatchNorm2d(channels, mode=bn_mode) if batchnorm else None

    def forward(self, x: CxTensor) -> CxTensor:
        h = self.conv(x)
        if self.bn is not None:
            h = self.bn(h)
        return ops.add(x, cx_leaky_relu(h, self.slope))


class EncoderBlock(Module):
    """conv (stride 1x2 by default) -> batch norm -> leaky activation."""

    def __init__(self, in_channels: int, out_channels: int, kernel=(5, 3), stride=(1, 2), padding=None,
                 slope: float = 0.2, batchnorm: bool = True, bn_mode: str = 'split',
                 rng: Optional[np.random.Generator] = None) -> None:
        super().__init__()
        padding = same_padding(_pair(kernel)) if padding is None else padding
        self.slope = slope
        self.conv = CxConv2d(in_channels, out_channels, kernel, stride, padding, rng=rng)
        self.bn = CxBatchNorm2d(out_channels, mode=bn_mode) if batchnorm else None

    def output_size(self, size: Tuple[int, int]) -> Tuple[int, int]:
        return self.conv.output_size(size)

    def forward(self, x: CxTensor) -> CxTensor:
        h = self.conv(x)
        if self.bn is not None:
            h = self.bn(h)
        return cx_leaky_relu(h, self.slope)


class DecoderBlock(Module):
    """
    [concat skip] -> transposed conv -> batch norm -> leaky activation.  The final block of a generator is linear
    (no normalization, no activation).
    """

    def __init__(self, in_channels: int, out_channels: int, kernel=(5, 3), stride=(1, 2), padding=None,
                 slope: float = 0.2, batchnorm: bool = True, final: bool = False, bn_mode: str = 'split',
                 rng: Optional[np.random.Generator] = None) -> None:
        super().__init__()
        padding = same_padding(_pair(kernel)) if padding is None else padding
        self.slope = slope
        self.final = final
        self.tconv = CxConvTranspose2d(in_channels, out_channels, kernel, stride, padding, rng=rng)
        self.bn = CxBatchNorm2d(out_channels, mode=bn_mode) if (batchnorm and not final) else None

    def forward(self, x: CxTensor, skip: Optional[CxTensor] = None,
                output_size: Optional[Sequence[int]] = None) -> CxTensor:
        if skip is not None:
            if skip.ndim != 4 or (skip.shape[0],) + skip.shape[2:] != (x.shape[0],) + x.shape[2:]:
                raise ShapeError(f"skip features {skip.shape} do not match decoder input {x.shape}")
            x = ops.concat([x, skip], axis=1)
        h = self.tconv(x, output_size)
        if self.final:
            return h
        if self.bn is not None:
            h = self.bn(h)
        return cx_leaky_relu(h, self.slope)
