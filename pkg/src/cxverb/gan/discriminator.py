"""
Complex patch discriminator: six spectrally normalized complex encoder layers, scored per patch by
sigmoid(log |z|) = |z| / (1 + |z|) on the last layer's output.  A plain sigmoid of |z| never drops below 0.5;
the log map spans (0, 1) with 0.5 at |z| = 1, the LSGAN decision point between fake (0) and real (1).
"""
from typing import List, Optional, Tuple

import numpy as np

from cxverb.config.config import DiscriminatorConfig
from cxverb.cxcore import ops
from cxverb.cxcore.tensor import CxTensor
from cxverb.cxlayers.functional import conv_output_size, cx_leaky_relu
from cxverb.cxlayers.layers import CxBatchNorm2d
from cxverb.cxlayers.module import Module, ModuleList
from cxverb.cxlayers.spectral import SNConv2d
from cxverb.errors import ConfigError, ShapeError

MAGNITUDE_FLOOR = 1e-12


class Discriminator(Module):
    """
    Unconditional patch discriminator.  Layers 1..n-2 carry batch normalization, every layer but the last a
    leaky activation; the feature list returned with the scores holds every layer's output.
    """

    def __init__(self, cfg: DiscriminatorConfig, seed: int = 0) -> None:
        super().__init__()
        n_layers = len(cfg.channels) - 1
        if not (len(cfg.kernels) == len(cfg.strides) == len(cfg.paddings) == n_layers):
            raise ConfigError(f"discriminator needs one kernel/stride/padding per layer ({n_layers}), got "
                              f"{len(cfg.kernels)}/{len(cfg.strides)}/{len(cfg.paddings)}")
        if cfg.channels[0] != 1:
            raise ConfigError(f"discriminator input must have 1 channel, ladder is {cfg.channels}")
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        self.convs = ModuleList([
            SNConv2d(cfg.channels[i], cfg.channels[i + 1], cfg.kernels[i], cfg.strides[i], cfg.paddings[i],
                     init_iterations=cfg.sn_init_iterations, step_iterations=cfg.sn_step_iterations, rng=rng)
            for i in range(n_layers)])
        self.norm_layers = tuple(range(1, n_layers - 1)) if cfg.batchnorm else ()
        self.norms = ModuleList([CxBatchNorm2d(cfg.channels[i + 1]) for i in self.norm_layers])
        self.logger.info("Built discriminator: ladder %s, %d complex parameters", cfg.channels,
                         self.num_parameters())

    @property
    def n_layers(self) -> int:
        return len(self.convs)

    def patch_grid(self, size: Tuple[int, int]) -> Tuple[int, int]:
        t, f = size
        for conv in self.convs:
            t = conv_output_size(t, conv.kernel[0], conv.stride[0], conv.padding[0])
            f = conv_output_size(f, conv.kernel[1], conv.stride[1], conv.padding[1])
        return t, f

    def update_spectral_norms(self, iterations: Optional[int] = None) -> List[float]:
        """One power-iteration step on every layer (skipped while frozen)."""
        return [conv.update_spectral_norm(iterations) for conv in self.convs]

    def forward(self, s: CxTensor) -> Tuple[CxTensor, List[CxTensor]]:
        if s.ndim != 4 or s.shape[1] != 1:
            raise ShapeError(f"discriminator input must be (B, 1, T, F), got {s.shape}")
        if min(self.patch_grid(s.shape[2:])) < 1:
            raise ShapeError(f"input grid {s.shape[2:]} is too small for the discriminator")
        slot = {layer: i for i, layer in enumerate(self.norm_layers)}
        features = []
        h = s
        last = self.n_layers - 1
        for i, conv in enumerate(self.convs):
            h = conv(h)
            if i in slot:
                h = self.norms[slot[i]](h)
            if i < last:
                h = cx_leaky_relu(h, self.cfg.leaky_slope)
            features.append(h)
        scores = ops.sigmoid(ops.log(ops.shift(ops.cx_magnitude(h), MAGNITUDE_FLOOR)))
        return scores, features


def build_discriminator(cfg: DiscriminatorConfig, seed: int = 0) -> Discriminator:
    return Discriminator(cfg, seed)


def discriminator_forward(net: Discriminator, s: CxTensor) -> Tuple[CxTensor, List[CxTensor]]:
    """Real patch scores in (0, 1) and the per-layer complex feature maps."""
    return net(s)
