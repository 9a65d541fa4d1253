"""
Central finite-difference verification of backward rules.

The checked function's output is contracted against a seeded random cotangent with `dot_planes`, so a single
backward sweep yields the full vector-Jacobian product that every perturbed entry is compared against.
"""
import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from cxverb.cxcore.ops import dot_planes
from cxverb.cxcore.tape import Tape, no_record
from cxverb.cxcore.tensor import CxTensor
from cxverb.result import ResultBase

InputSpec = Union[CxTensor, Tuple[int, ...]]

# Headroom between the finite-difference rounding level and the smallest gradient measured relatively
NOISE_MARGIN = 100.0


class GradCheckReport(ResultBase):
    """Outcome of one gradient check; failures are reported, never raised."""

    def __init__(self, name: str, max_rel_err: float, tolerance: float, checked: int,
                 worst: Optional[Tuple[int, str, int]] = None, message: str = "") -> None:
        """
        :param name: Label of the checked operation.
        :param max_rel_err: Largest relative error over all perturbed entries.
        :param tolerance: Pass threshold for max_rel_err.
        :param checked: Number of real entries perturbed.
        :param worst: (leaf index, plane, flat index) of the largest error.
        """
        self.name = name
        self.max_rel_err = float(max_rel_err)
        self.tolerance = tolerance
        self.checked = checked
        self.worst = worst
        self.passed = bool(np.isfinite(max_rel_err) and max_rel_err <= tolerance)
        if not message and not self.passed:
            message = f"{name}: max relative error {max_rel_err:.3e} exceeds {tolerance:.1e} at {worst}"
        super().__init__(not self.passed, message)

    def __repr__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"GradCheckReport({self.name}: {status}, max_rel_err={self.max_rel_err:.3e}, n={self.checked})"


def noise_floor(scale: float, step: float, tolerance: float, eps: float) -> float:
    """
    Gradient magnitude below which rounding in the contracted output, not the backward rule, can reach the
    tolerance.

    :param scale: Sum of the absolute terms of the contracted output.
    :param step: Finite-difference step.
    :param tolerance: Pass threshold of the check.
    :param eps: Machine epsilon of the checked dtype.
    """
    return max(NOISE_MARGIN * eps * scale / (step * tolerance), 1e-12)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor)."""
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def _materialize(inputs: Sequence[InputSpec], rng: np.random.Generator) -> List[CxTensor]:
    tensors = []
    for spec in inputs:
        if isinstance(spec, CxTensor):
            tensors.append(spec)
        else:
            shape = tuple(spec)
            tensors.append(CxTensor(rng.standard_normal(shape), rng.standard_normal(shape)))
    return tensors


def _check(name: str, run: Callable[[List[CxTensor]], CxTensor], values: List[CxTensor], tolerance: float,
           rng: np.random.Generator, step: float) -> GradCheckReport:
    logger = logging.getLogger(__name__)

    tape = Tape()
    with tape:
        for value in values:
            tape.watch(value)
        out = run(values)
        w_re = rng.standard_normal(out.shape)
        w_im = np.zeros(out.shape) if out.real_valued else rng.standard_normal(out.shape)
        loss = dot_planes(out, w_re, w_im)
    grads = tape.backward(loss)
    scale = float(np.sum(np.abs(out.re * w_re)) + np.sum(np.abs(out.im * w_im)))
    eps = max(float(np.finfo(v.dtype).eps) for v in values)
    floor = noise_floor(scale, step, tolerance, eps)

    def contracted(vals: List[CxTensor]) -> float:
        with no_record():
            y = run(vals)
        return float(np.sum(y.re * w_re) + np.sum(y.im * w_im))

    max_err = 0.0
    worst = None
    checked = 0
    for k, value in enumerate(values):
        analytic = grads.of(value)
        for plane in ("re", "im"):
            base = np.array(getattr(value, plane), dtype=np.float64)
            analytic_plane = getattr(analytic, plane).reshape(-1)
            for i in range(base.size):
                numeric = []
                for sign in (1.0, -1.0):
                    perturbed = base.copy().reshape(-1)
                    perturbed[i] += sign * step
                    perturbed = perturbed.reshape(base.shape)
                    trial = CxTensor(perturbed, value.im, dtype=value.dtype) if plane == "re" \
                        else CxTensor(value.re, perturbed, dtype=value.dtype)
                    numeric.append(contracted(values[:k] + [trial] + values[k + 1:]))
                estimate = (numeric[0] - numeric[1]) / (2.0 * step)
                err = float(relative_error(analytic_plane[i], estimate, floor))
                checked += 1
                if err > max_err or not np.isfinite(err):
                    max_err = err
                    worst = (k, plane, i)
    report = GradCheckReport(name, max_err, tolerance, checked, worst)
    if report.passed:
        logger.debug("Gradient check %s passed: max_rel_err=%.3e over %d entries", name, max_err, checked)
    else:
        logger.warning(report.result_status.message)
    return report


def grad_check(op: Callable[..., CxTensor], inputs: Sequence[InputSpec], tolerance: float = 1e-5,
               seed: int = 0, step: float = 1e-5, name: Optional[str] = None) -> GradCheckReport:
    """
    Compare the tape gradient of op with central finite differences over every re/im entry of every input.

    :param op: Function of CxTensor arguments built from registered primitives.
    :param inputs: Tensors, or shapes from which 64-bit standard-normal inputs are drawn.
    :param tolerance: Maximum relative error for a pass.
    :param seed: Seeds both the drawn inputs and the random cotangent.
    :param step: Finite-difference step.
    """
    rng = np.random.default_rng(seed)
    values = _materialize(inputs, rng)
    return _check(name or getattr(op, '__name__', 'op'), lambda vals: op(*vals), values, tolerance, rng, step)


def grad_check_module(module, inputs: Sequence[InputSpec], tolerance: float = 1e-4, seed: int = 0,
                      step: float = 1e-5, name: Optional[str] = None) -> GradCheckReport:
    """
    Gradient check of a layer with respect to its inputs and all of its parameters.  The module runs frozen so
    running statistics and spectral-norm vectors stay fixed across the perturbed evaluations.
    """
    rng = np.random.default_rng(seed)
    tensors = _materialize(inputs, rng)
    params = [p for _, p in module.named_parameters()]
    originals = [p.data for p in params]
    n_inputs = len(tensors)

    def run(vals: List[CxTensor]) -> CxTensor:
        for param, value in zip(params, vals[n_inputs:]):
            param.data = value
        return module(*vals[:n_inputs])

    try:
        with module.frozen():
            return _check(name or type(module).__name__, run, tensors + originals, tolerance, rng, step)
    finally:
        for param, value in zip(params, originals):
            param.data = value
