"""Complex ratio masks."""
import numpy as np

from cxverb.cxcore import ops
from cxverb.cxcore.tensor import CxTensor
from cxverb.errors import ShapeError

ORACLE_THRESHOLD = 1e-8


def apply_crm(y: CxTensor, mask: CxTensor) -> CxTensor:
    """X_hat = (M_r Y_r - M_i Y_i) + j (M_r Y_i + M_i Y_r).  Taped, so it can sit inside a training loss."""
    if y.shape != mask.shape:
        raise ShapeError(f"mask {mask.shape} does not match spectrogram {y.shape}")
    return ops.mul(mask, y)


def oracle_mask(x: CxTensor, y: CxTensor, threshold: float = ORACLE_THRESHOLD) -> CxTensor:
    """M = X / Y where |Y| > threshold, 0 elsewhere."""
    if x.shape != y.shape:
        raise ShapeError(f"target {x.shape} and mixture {y.shape} differ in shape")
    xc, yc = x.to_complex(), y.to_complex()
    valid = np.abs(yc) > threshold
    mask = np.where(valid, xc / np.where(valid, yc, 1.0), 0.0)
    return CxTensor.from_complex(mask, dtype=y.dtype)


def identity_mask(shape) -> CxTensor:
    return CxTensor.ones(shape)
