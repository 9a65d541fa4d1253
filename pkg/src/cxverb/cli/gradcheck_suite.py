"""
Finite-difference gradient checks of every taped layer and loss, on small 64-bit shapes.
"""
import logging
from typing import Callable, List, Optional, Tuple

import numpy as np

from cxverb.config.config import DiscriminatorConfig, GeneratorConfig
from cxverb.cxcore import ops
from cxverb.cxcore.gradcheck import GradCheckReport, grad_check, grad_check_module
from cxverb.cxcore.tensor import CxTensor
from cxverb.cxlayers.functional import cx_batchnorm, cx_conv2d, cx_conv_transpose2d, cx_leaky_relu
from cxverb.cxlayers.layers import DecoderBlock, EncoderBlock, SkipConvBlock
from cxverb.cxlayers.module import Module
from cxverb.cxlayers.spectral import SpectralNormState, power_iterate, spectral_normalize
from cxverb.gan.discriminator import Discriminator
from cxverb.gan.generator import Generator
from cxverb.gan.losses import loss_feature, loss_generator_total, loss_lsgan, loss_mag, loss_ri, loss_ri_mag
from cxverb.result import ResultBase
from cxverb.tfsa.attention import AxisAttention, TFSelfAttention

OP_TOLERANCE = 1e-5
MODULE_TOLERANCE = 1e-4

# Smallest generator that still has a SkipConv chain, a TF-SA pair and a skip concatenation.
MINI_GENERATOR = GeneratorConfig(depth=2, channels=(1, 2, 2), sb_counts=(1,), tfsa_positions=(0,), chip_frames=4,
                                 n_bins=9, tfsa_projection='channel')
MINI_DISCRIMINATOR = DiscriminatorConfig(channels=(1, 2, 2, 1), kernels=((3, 3), (3, 3), (1, 1)),
                                         strides=((2, 2), (1, 1), (1, 1)), paddings=((1, 1), (1, 1), (0, 0)))


class GradCheckSuiteReport(ResultBase):
    """Reports of the whole suite; an error when any check failed."""

    def __init__(self, reports: List[GradCheckReport]) -> None:
        self.reports = reports
        failed = [r.name for r in reports if not r.passed]
        super().__init__(bool(failed), f"gradient checks failed: {', '.join(failed)}" if failed else "")

    @property
    def passed(self) -> bool:
        return not self.result_status.is_error

    def format_table(self) -> str:
        width = max(len(r.name) for r in self.reports)
        lines = [f"{'check':<{width}}  {'max_rel_err':>11}  {'tolerance':>9}  {'entries':>7}  status"]
        for r in self.reports:
            lines.append(f"{r.name:<{width}}  {r.max_rel_err:11.3e}  {r.tolerance:9.1e}  {r.checked:7d}  "
                         f"{'pass' if r.passed else 'FAIL'}")
        return "\n".join(lines)


class _Scores(Module):
    """Discriminator restricted to its patch scores."""

    def __init__(self, disc: Discriminator) -> None:
        super().__init__()
        self.disc = disc

    def forward(self, s: CxTensor) -> CxTensor:
        return self.disc(s)[0]


def _sn_state(shape: Tuple[int, ...], seed: int) -> Tuple[CxTensor, SpectralNormState]:
    rng = np.random.default_rng(seed)
    weight = CxTensor(rng.standard_normal(shape), rng.standard_normal(shape))
    state = SpectralNormState.initial(weight, rng)
    power_iterate(weight, state, 20)
    return weight, state


def op_checks(seed: int = 0) -> List[Tuple[str, Callable[..., CxTensor], list]]:
    """(name, function, inputs) for every primitive-level check."""
    rng = np.random.default_rng(seed)
    zeros, ones = np.zeros(2), np.ones(2)
    sn_weight, sn_state = _sn_state((3, 2, 3, 3), seed)
    real_scores = lambda shape: CxTensor.real(rng.uniform(0.1, 0.9, shape))
    return [
        ('cx_conv2d', lambda x, w, b: cx_conv2d(x, w, b, stride=(1, 2), padding=(2, 1)),
         [(2, 2, 5, 6), (3, 2, 3, 3), (3,)]),
        ('cx_conv_transpose2d', lambda x, w, b: cx_conv_transpose2d(x, w, b, stride=(1, 2), padding=(2, 1),
                                                                     output_size=(5, 6)),
         [(2, 3, 5, 3), (3, 2, 5, 3), (2,)]),
        ('cx_batchnorm[train]', lambda x, g, b: cx_batchnorm(x, g, b, (zeros, zeros), (ones, ones), True),
         [(3, 2, 3, 4), (2,), (2,)]),
        ('cx_batchnorm[eval]', lambda x, g, b: cx_batchnorm(x, g, b, (0.1 * ones, -0.2 * ones),
                                                            (2.0 * ones, 0.5 * ones), False),
         [(3, 2, 3, 4), (2,), (2,)]),
        ('cx_leaky_relu', lambda x: cx_leaky_relu(x, 0.2), [(2, 3, 4, 5)]),
        ('cx_magnitude', ops.cx_magnitude, [(3, 4)]),
        ('cx_matmul[conj]', lambda a, b: ops.cx_matmul(a, b, conj_b=True), [(2, 3, 4), (2, 5, 4)]),
        ('softmax', lambda x: ops.softmax(ops.cx_magnitude(x), axis=-1), [(2, 3, 4)]),
        ('spectral_normalize', lambda w: spectral_normalize(w, SpectralNormState(sn_state.u.copy(),
                                                                                 sn_state.v.copy()), 0),
         [sn_weight]),
        ('loss_ri', loss_ri, [(2, 1, 3, 4), (2, 1, 3, 4)]),
        ('loss_mag', loss_mag, [(2, 1, 3, 4), (2, 1, 3, 4)]),
        ('loss_ri_mag', lambda a, b: loss_ri_mag(a, b, 0.3), [(2, 1, 3, 4), (2, 1, 3, 4)]),
        ('loss_lsgan[D]', lambda r, f: loss_lsgan(r, f, 'D'),
         [real_scores((2, 1, 3, 3)), real_scores((2, 1, 3, 3))]),
        ('loss_lsgan[G]', lambda f: loss_lsgan(None, f, 'G'), [real_scores((2, 1, 3, 3))]),
        ('loss_feature', lambda a, b, c, d: loss_feature([a, b], [c, d]),
         [(2, 2, 3, 3), (2, 1, 2, 2), (2, 2, 3, 3), (2, 1, 2, 2)]),
        ('loss_generator_total', lambda g, r, f: loss_generator_total(g, r, f, 0.4, 0.3),
         [CxTensor.real(0.7), CxTensor.real(1.3), CxTensor.real(0.2)]),
    ]


def module_checks(seed: int = 0) -> List[Tuple[str, Module, list]]:
    """(name, module, inputs) for every layer-level check, with respect to inputs and parameters."""
    rng = np.random.default_rng(seed)
    return [
        ('SkipConvBlock', SkipConvBlock(2, kernel=(3, 3), rng=rng), [(2, 2, 4, 5)]),
        ('EncoderBlock', EncoderBlock(1, 2, kernel=(3, 3), rng=rng), [(2, 1, 4, 5)]),
        ('DecoderBlock', DecoderBlock(2, 1, kernel=(3, 3), final=True, rng=rng), [(2, 2, 4, 3)]),
        ('sa_axis[time]', AxisAttention(2, 'time', rng=rng), [(1, 2, 4, 3)]),
        ('sa_axis[freq]', AxisAttention(2, 'freq', rng=rng), [(1, 2, 4, 3)]),
        ('sa_axis[full]', AxisAttention(1, 'time', projection='full', extent=3, rng=rng), [(1, 1, 4, 3)]),
        ('tf_sa', TFSelfAttention(2, rng=rng), [(1, 2, 3, 4)]),
        ('tf_sa[full]', TFSelfAttention(2, projection='full', n_frames=3, n_bins=4, rng=rng), [(1, 2, 3, 4)]),
        ('generator', Generator(MINI_GENERATOR, seed=seed), [(2, 1, 4, 9)]),
        ('discriminator', _Scores(Discriminator(MINI_DISCRIMINATOR, seed=seed)), [(2, 1, 8, 8)]),
    ]


def run_suite(seed: int = 0, names: Optional[List[str]] = None) -> GradCheckSuiteReport:
    """
    Run every check, or only those whose name starts with one of names.

    :param seed: Seeds inputs, parameters and cotangents.
    :param names: Optional name prefixes to select.
    """
    logger = logging.getLogger(__name__)

    def selected(name: str) -> bool:
        return names is None or any(name.startswith(n) for n in names)

    reports = []
    for name, op, inputs in op_checks(seed):
        if selected(name):
            reports.append(grad_check(op, inputs, tolerance=OP_TOLERANCE, seed=seed, name=name))
    for name, module, inputs in module_checks(seed):
        if selected(name):
            reports.append(grad_check_module(module, inputs, tolerance=MODULE_TOLERANCE, seed=seed, name=name))
    suite = GradCheckSuiteReport(reports)
    logger.info("Gradient check suite: %d of %d passed", sum(r.passed for r in reports), len(reports))
    return suite

