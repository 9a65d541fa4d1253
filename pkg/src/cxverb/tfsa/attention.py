"""
Complex time-frequency self-attention.

Each branch flattens a (B, C, T, F) feature map into a sequence along one axis (frames for the time branch, bins
for the frequency branch), forms Q, K, V with complex 1x1 projections and attends with the real row-stochastic map
A = softmax(|Q K^H|).  The fusion layer mixes the input and both branch outputs channel-wise.
"""
from typing import Literal, Optional

import numpy as np

from cxverb.cxcore import ops
from cxverb.cxcore.tape import no_record
from cxverb.cxcore.tensor import CxTensor
from cxverb.cxlayers.layers import CxConv2d
from cxverb.cxlayers.module import Module, Parameter
from cxverb.errors import ConfigError, ShapeError

Axis = Literal['time', 'freq']


def flatten_axis(u: CxTensor, axis: Axis) -> CxTensor:
    """(B, C, T, F) -> (B, T, C*F) for the time axis, (B, F, C*T) for the frequency axis."""
    b, c, t, f = u.shape
    if axis == 'time':
        return ops.reshape(ops.permute(u, (0, 2, 1, 3)), (b, t, c * f))
    return ops.reshape(ops.permute(u, (0, 3, 1, 2)), (b, f, c * t))


def unflatten_axis(y: CxTensor, shape, axis: Axis) -> CxTensor:
    b, c, t, f = shape
    if axis == 'time':
        return ops.permute(ops.reshape(y, (b, t, c, f)), (0, 2, 1, 3))
    return ops.permute(ops.reshape(y, (b, f, c, t)), (0, 2, 3, 1))


class AxisAttention(Module):
    """
    Self-attention along one axis of a (B, C, T, F) map.

    In 'channel' projection mode W^Q, W^K, W^V are complex 1x1 convolutions over channels applied before
    flattening.  In 'full' mode they are dense square matrices over the flattened feature dimension, which needs
    the size of the other axis (`extent`: F for the time branch, T for the frequency branch).
    """

    def __init__(self, channels: int, axis: Axis, projection: Literal['channel', 'full'] = 'channel',
                 scale: bool = False, extent: Optional[int] = None,
                 rng: Optional[np.random.Generator] = None) -> None:
        super().__init__()
        if axis not in ('time', 'freq'):
            raise ConfigError(f"attention axis must be 'time' or 'freq', got '{axis}'")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.channels = channels
        self.axis = axis
        self.projection = projection
        self.use_scale = scale
        if projection == 'channel':
            self.query = CxConv2d(channels, channels, 1, bias=False, rng=rng)
            self.key = CxConv2d(channels, channels, 1, bias=False, rng=rng)
            self.value = CxConv2d(channels, channels, 1, bias=False, rng=rng)
        elif projection == 'full':
            if extent is None:
                raise ConfigError("'full' attention projection needs the extent of the flattened axis")
            dim = channels * extent
            std = np.sqrt(1.0 / (2.0 * dim))
            for name in ('w_query', 'w_key', 'w_value'):
                setattr(self, name, Parameter(CxTensor(rng.normal(0.0, std, (1, dim, dim)),
                                                       rng.normal(0.0, std, (1, dim, dim)))))
        else:
            raise ConfigError(f"unknown attention projection '{projection}'")

    def _project(self, u: CxTensor):
        if self.projection == 'channel':
            return (flatten_axis(self.query(u), self.axis), flatten_axis(self.key(u), self.axis),
                    flatten_axis(self.value(u), self.axis))
        flat = flatten_axis(u, self.axis)
        if flat.shape[2] != self.w_query.shape[1]:
            raise ShapeError(f"flattened feature size {flat.shape[2]} does not match projection "
                             f"size {self.w_query.shape[1]}")
        return (ops.cx_matmul(flat, self.w_query.data), ops.cx_matmul(flat, self.w_key.data),
                ops.cx_matmul(flat, self.w_value.data))

    def _attend(self, q: CxTensor, k: CxTensor) -> CxTensor:
        magnitude = ops.cx_magnitude(ops.cx_matmul(q, k, conj_b=True))
        if self.use_scale:
            magnitude = ops.scale(magnitude, 1.0 / np.sqrt(q.shape[2]))
        return ops.softmax(magnitude, axis=-1)

    def forward(self, u: CxTensor) -> CxTensor:
        if u.ndim != 4:
            raise ShapeError(f"attention needs a (B, C, T, F) input, got {u.shape}")
        q, k, v = self._project(u)
        attention = self._attend(q, k)
        return unflatten_axis(ops.cx_matmul(attention, v), u.shape, self.axis)

    def attention_map(self, u: CxTensor) -> CxTensor:
        """Real (B, L, L) attention map for an input, computed without recording."""
        with no_record():
            q, k, _ = self._project(u)
            return self._attend(q, k)


class TFSelfAttention(Module):
    """TF-SA(U) = Concat(U, SA_time(U), SA_freq(U)) fused back to C channels by a complex 1x1 convolution."""

    def __init__(self, channels: int, projection: Literal['channel', 'full'] = 'channel', scale: bool = False,
                 n_frames: Optional[int] = None, n_bins: Optional[int] = None,
                 rng: Optional[np.random.Generator] = None) -> None:
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.channels = channels
        self.time = AxisAttention(channels, 'time', projection, scale, extent=n_bins, rng=rng)
        self.freq = AxisAttention(channels, 'freq', projection, scale, extent=n_frames, rng=rng)
        self.fuse = CxConv2d(3 * channels, channels, 1, bias=False, rng=rng)
        identity = np.zeros((channels, 3 * channels, 1, 1))
        identity[np.arange(channels), np.arange(channels), 0, 0] = 1.0
        noise = 0.01 * np.sqrt(1.0 / (6.0 * channels))
        self.fuse.weight.data = CxTensor(identity + rng.normal(0.0, noise, identity.shape),
                                         rng.normal(0.0, noise, identity.shape))

    def forward(self, u: CxTensor) -> CxTensor:
        return self.fuse(ops.concat([u, self.time(u), self.freq(u)], axis=1))


def sa_axis(u: CxTensor, params: AxisAttention) -> CxTensor:
    return params(u)


def tf_sa(u: CxTensor, params: TFSelfAttention) -> CxTensor:
    return params(u)
