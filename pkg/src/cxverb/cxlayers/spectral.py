"""
Spectral normalization of complex kernels.

The kernel is viewed through its real block embedding as a (2 C_out, 2 C_in k_t k_f) matrix M.  Power iteration
keeps unit vectors u, v with sigma = u^T M v approximating the top singular value; the normalized kernel W / sigma
is differentiated through sigma with u and v held fixed.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from cxverb.cxcore import ops
from cxverb.cxcore.tensor import CxTensor
from cxverb.cxlayers.functional import embed_kernel, unembed_grad
from cxverb.cxlayers.layers import CxConv2d
from cxverb.errors import DegenerateWeightError


@dataclass
class SpectralNormState:
    """Power-iteration vectors over the embedded kernel matrix."""
    u: np.ndarray
    v: np.ndarray
    iterations: int = 1

    @classmethod
    def initial(cls, weight: CxTensor, rng: np.random.Generator, iterations: int = 1) -> 'SpectralNormState':
        rows = 2 * weight.shape[0]
        cols = 2 * int(np.prod(weight.shape[1:]))
        u = rng.standard_normal(rows)
        v = rng.standard_normal(cols)
        return cls(u / np.linalg.norm(u), v / np.linalg.norm(v), iterations)


def embedded_matrix(weight: CxTensor) -> np.ndarray:
    block = embed_kernel(np.asarray(weight.re, dtype=np.float64), np.asarray(weight.im, dtype=np.float64))
    return block.reshape(block.shape[0], -1)


def power_iterate(weight: CxTensor, state: SpectralNormState, iterations: Optional[int] = None) -> float:
    """Run power iterations in place on state and return the current estimate u^T M v."""
    matrix = embedded_matrix(weight)
    for _ in range(state.iterations if iterations is None else iterations):
        v = matrix.T @ state.u
        norm_v = np.linalg.norm(v)
        if norm_v == 0.0:
            raise DegenerateWeightError("spectral normalization of a kernel with no energy along u")
        state.v = v / norm_v
        u = matrix @ state.v
        norm_u = np.linalg.norm(u)
        if norm_u == 0.0:
            raise DegenerateWeightError("spectral normalization of a zero kernel")
        state.u = u / norm_u
    return float(state.u @ matrix @ state.v)


def spectral_normalize(weight: CxTensor, state: SpectralNormState, iterations: Optional[int] = None) -> CxTensor:
    """
    Normalized kernel view W / sigma.

    :param weight: Complex kernel (C_out, C_in, k_t, k_f).
    :param state: Power-iteration vectors, updated in place.
    :param iterations: Power iterations to run first; defaults to state.iterations, 0 uses the vectors as they are.
    """
    if not np.any(weight.re) and not np.any(weight.im):
        raise DegenerateWeightError("cannot spectrally normalize an all-zero kernel")
    power_iterate(weight, state, iterations)
    c_out, c_in = weight.shape[0], weight.shape[1]
    outer = np.outer(state.u, state.v).reshape((2 * c_out, 2 * c_in) + weight.shape[2:])
    a_re, a_im = unembed_grad(outer, c_out, c_in)
    sigma = ops.dot_planes(weight, a_re, a_im)
    if sigma.item() <= 0.0:
        raise DegenerateWeightError(f"non-positive spectral norm estimate {sigma.item():.3e}")
    inverse = ops.reshape(ops.reciprocal(sigma), (1,) * weight.ndim)
    return ops.mul(weight, inverse)


class SNConv2d(CxConv2d):
    """
    Complex convolution whose kernel is spectrally normalized on every forward pass.  The power-iteration vectors
    are buffers; they advance only through update_spectral_norm.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel, stride=(1, 1), padding=(0, 0),
                 bias: bool = True, init_iterations: int = 5, step_iterations: int = 1,
                 rng: Optional[np.random.Generator] = None) -> None:
        rng = rng if rng is not None else np.random.default_rng(0)
        super().__init__(in_channels, out_channels, kernel, stride, padding, bias, rng)
        self.step_iterations = step_iterations
        state = SpectralNormState.initial(self.weight.data, rng, init_iterations)
        power_iterate(self.weight.data, state)
        self.register_buffer('sn_u', state.u)
        self.register_buffer('sn_v', state.v)

    def state(self) -> SpectralNormState:
        return SpectralNormState(self.sn_u, self.sn_v, self.step_iterations)

    def update_spectral_norm(self, iterations: Optional[int] = None) -> float:
        """Advance the power iteration; a no-op while frozen.  Returns the current sigma estimate."""
        state = self.state()
        if self.is_frozen:
            return power_iterate(self.weight.data, state, 0)
        sigma = power_iterate(self.weight.data, state, iterations)
        self.sn_u = state.u
        self.sn_v = state.v
        self.logger.debug("Spectral norm estimate %.6f", sigma)
        return sigma

    def effective_weight(self) -> CxTensor:
        return spectral_normalize(self.weight.data, self.state(), iterations=0)
