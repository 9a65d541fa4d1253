"""
Complex U-Net generator with SkipConv blocks on the skip connections and TF-SA modules at mirrored positions.

Encoder i maps channels[i] -> channels[i+1] and halves the frequency axis.  Skip connection k (k < depth-1) runs
through sb_counts[k] SkipConv blocks; the deepest encoder output feeds the deepest decoder directly.  Decoder k
consumes concat(d_{k+1}, SB_k(e_k)) and restores the size of encoder k's input.  A TF-SA position p places one
module after encoder p and one on d_{p+1} just before it is concatenated into decoder p.
"""
from dataclasses import dataclass, field
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from cxverb.config.config import GeneratorConfig
from cxverb.cxcore import ops
from cxverb.cxcore.tensor import CxTensor
from cxverb.cxlayers.functional import conv_output_size
from cxverb.cxlayers.layers import DecoderBlock, EncoderBlock, SkipConvBlock, same_padding
from cxverb.cxlayers.module import Module, ModuleList
from cxverb.errors import ConfigError, ShapeError
from cxverb.tfsa.attention import TFSelfAttention


@dataclass
class GeneratorPlan:
    """Validated layer plan and closed-form complex parameter counts of a generator configuration."""
    depth: int
    channels: Tuple[int, ...]
    time_sizes: List[int]
    freq_sizes: List[int]
    counts: Dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def n_encoders(self) -> int:
        return self.depth

    @property
    def n_decoders(self) -> int:
        return self.depth


def plan_generator(cfg: GeneratorConfig, n_frames: Optional[int] = None,
                   n_bins: Optional[int] = None) -> GeneratorPlan:
    """
    Check a generator configuration and derive its geometry and parameter counts without allocating weights.

    :param n_frames: Chip length in frames; defaults to cfg.chip_frames.
    :param n_bins: Frequency bins; defaults to cfg.n_bins.
    :raises ConfigError: on inconsistent ladder, SkipConv or TF-SA settings.
    """
    depth = cfg.depth
    c = tuple(cfg.channels)
    if depth < 1:
        raise ConfigError(f"generator depth must be at least 1, got {depth}")
    if len(c) != depth + 1:
        raise ConfigError(f"channel ladder needs depth+1 = {depth + 1} entries, got {len(c)}")
    if min(c) < 1 or c[0] != 1:
        raise ConfigError(f"channel ladder must start at 1 input channel and stay positive: {c}")
    if len(cfg.sb_counts) != depth - 1:
        raise ConfigError(f"sb_counts needs depth-1 = {depth - 1} entries, got {len(cfg.sb_counts)}")
    if any(n < 0 for n in cfg.sb_counts):
        raise ConfigError(f"sb_counts must be non-negative: {cfg.sb_counts}")
    positions = tuple(cfg.tfsa_positions)
    if len(set(positions)) != len(positions) or any(not 0 <= p <= depth - 2 for p in positions):
        raise ConfigError(f"tfsa_positions must be distinct encoder indices in [0, {depth - 2}]: {positions}")
    if cfg.batchnorm != 'split':
        raise ConfigError("complex whitening batch normalization is reserved and not implemented; use 'split'")

    k_t, k_f = cfg.kernel
    s_t, s_f = cfg.stride
    p_t, p_f = same_padding(cfg.kernel)
    time_sizes = [n_frames or cfg.chip_frames]
    freq_sizes = [n_bins or cfg.n_bins]
    for _ in range(depth):
        time_sizes.append(conv_output_size(time_sizes[-1], k_t, s_t, p_t))
        freq_sizes.append(conv_output_size(freq_sizes[-1], k_f, s_f, p_f))
    if min(freq_sizes[1:]) < k_f or min(time_sizes) < 1:
        raise ConfigError(f"{freq_sizes[0]} bins do not survive {depth} encoder levels: {freq_sizes}")

    kk = k_t * k_f
    counts = {
        'encoders': sum(c[i] * c[i + 1] * kk + 3 * c[i + 1] for i in range(depth)),
        'decoders': 0,
        'skipconv': sum(n * (c[k + 1] * c[k + 1] * kk + 3 * c[k + 1]) for k, n in enumerate(cfg.sb_counts)),
        'tfsa': 0,
    }
    for k in range(depth):
        c_in = c[depth] if k == depth - 1 else 2 * c[k + 1]
        counts['decoders'] += c_in * c[k] * kk + c[k] + (0 if k == 0 else 2 * c[k])
    for p in positions:
        ch = c[p + 1]
        if cfg.tfsa_projection == 'channel':
            per_module = 9 * ch * ch
        else:
            per_module = 3 * (ch * freq_sizes[p + 1]) ** 2 + 3 * (ch * time_sizes[p + 1]) ** 2 + 3 * ch * ch
        counts['tfsa'] += 2 * per_module
    return GeneratorPlan(depth, c, time_sizes, freq_sizes, counts)


class Generator(Module):
    """Mask estimator M = G(Y) for (B, 1, T, F) spectrogram chips."""

    def __init__(self, cfg: GeneratorConfig, seed: int = 0) -> None:
        super().__init__()
        self.plan = plan_generator(cfg)
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        c, depth = self.plan.channels, cfg.depth
        common = dict(kernel=cfg.kernel, stride=cfg.stride, slope=cfg.leaky_slope, bn_mode=cfg.batchnorm)

        self.encoders = ModuleList([EncoderBlock(c[i], c[i + 1], rng=rng, **common) for i in range(depth)])
        self.skips = ModuleList([
            ModuleList([SkipConvBlock(c[k + 1], kernel=cfg.kernel, slope=cfg.leaky_slope, bn_mode=cfg.batchnorm,
                                      rng=rng) for _ in range(n)])
            for k, n in enumerate(cfg.sb_counts)])
        self.decoders = ModuleList([
            DecoderBlock(c[depth] if k == depth - 1 else 2 * c[k + 1], c[k], final=(k == 0), rng=rng, **common)
            for k in range(depth)])

        self.tfsa_positions = tuple(cfg.tfsa_positions)
        tfsa = lambda p: TFSelfAttention(c[p + 1], cfg.tfsa_projection, cfg.tfsa_scale,
                                         n_frames=self.plan.time_sizes[p + 1],
                                         n_bins=self.plan.freq_sizes[p + 1], rng=rng)
        self.encoder_attention = ModuleList([tfsa(p) for p in self.tfsa_positions])
        self.decoder_attention = ModuleList([tfsa(p) for p in self.tfsa_positions])
        self.register_buffer('trained_steps', np.zeros(1))
        self.logger.info("Built generator: depth %d, ladder %s, %d SkipConv blocks, %d TF-SA modules, "
                         "%d complex parameters", depth, c, sum(cfg.sb_counts), 2 * len(self.tfsa_positions),
                         self.num_parameters())

    @property
    def n_skipconv_blocks(self) -> int:
        return sum(len(chain) for chain in self.skips)

    @property
    def n_tfsa_modules(self) -> int:
        return len(self.encoder_attention) + len(self.decoder_attention)

    def _check_input(self, y: CxTensor) -> None:
        if y.ndim != 4 or y.shape[1] != 1:
            raise ShapeError(f"generator input must be (B, 1, T, F), got {y.shape}")
        k_f = self.cfg.kernel[1]
        p_f = same_padding(self.cfg.kernel)[1]
        f = y.shape[3]
        for _ in range(self.cfg.depth):
            f = conv_output_size(f, k_f, self.cfg.stride[1], p_f)
            if f < k_f:
                raise ShapeError(f"{y.shape[3]} frequency bins are too few for {self.cfg.depth} encoder levels")

    def forward(self, y: CxTensor) -> CxTensor:
        self._check_input(y)
        slot = {p: i for i, p in enumerate(self.tfsa_positions)}
        sizes = [y.shape[2:]]
        features = []
        h = y
        for i, encoder in enumerate(self.encoders):
            h = encoder(h)
            if i in slot:
                h = self.encoder_attention[slot[i]](h)
            features.append(h)
            sizes.append(h.shape[2:])

        depth = self.cfg.depth
        d = features[-1]
        for k in reversed(range(depth)):
            if k == depth - 1:
                d = self.decoders[k](d, None, output_size=sizes[k])
                continue
            if k in slot:
                d = self.decoder_attention[slot[k]](d)
            skip = features[k]
            for block in self.skips[k]:
                skip = block(skip)
            d = self.decoders[k](d, skip, output_size=sizes[k])

        if self.cfg.mask_head == 'tanh':
            bound = self.cfg.mask_bound
            d = ops.scale(ops.tanh_planes(ops.scale(d, 1.0 / bound)), bound)
        return d


def build_generator(cfg: GeneratorConfig, seed: int = 0) -> Generator:
    return Generator(cfg, seed)


def generator_forward(net: Generator, y: CxTensor) -> CxTensor:
    """Complex ratio mask for a (B, 1, T, F) input."""
    return net(y)


def count_parameters(cfg: GeneratorConfig) -> int:
    """Closed-form complex parameter count of a generator configuration."""
    logging.getLogger(__name__).debug("Counting parameters for depth %d generator", cfg.depth)
    return plan_generator(cfg).total
