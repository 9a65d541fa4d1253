"""
Adam with decoupled weight decay over complex parameters (re and im planes updated independently), and the
plateau learning-rate rule used during pretraining.
"""
from dataclasses import dataclass, field
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from cxverb.cxcore.tape import Gradients
from cxverb.cxcore.tensor import CxTensor
from cxverb.cxlayers.module import Parameter
from cxverb.errors import ShapeError


@dataclass
class AdamState:
    """First and second moment buffers per parameter plane, plus the shared step counter."""
    m_re: List[np.ndarray] = field(default_factory=list)
    m_im: List[np.ndarray] = field(default_factory=list)
    v_re: List[np.ndarray] = field(default_factory=list)
    v_im: List[np.ndarray] = field(default_factory=list)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[Parameter]) -> 'AdamState':
        zeros = lambda: [np.zeros(p.shape) for p in params]
        return cls(zeros(), zeros(), zeros(), zeros(), 0)


def adam_step(params: Sequence[Parameter], grads: Sequence[CxTensor], state: AdamState, lr: float,
              weight_decay: float = 0.0, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> None:
    """
    One bias-corrected Adam update with decoupled weight decay, applied in place to params.

    :param grads: Gradient tensors aligned with params.
    """
    if len(params) != len(grads) or len(params) != len(state.m_re):
        raise ShapeError(f"{len(params)} parameters, {len(grads)} gradients, {len(state.m_re)} moment buffers")
    beta1, beta2 = betas
    state.step += 1
    bias1 = 1.0 - beta1 ** state.step
    bias2 = 1.0 - beta2 ** state.step
    for i, (param, grad) in enumerate(zip(params, grads)):
        if grad.shape != param.shape:
            raise ShapeError(f"gradient {grad.shape} does not match parameter {param.shape}")
        planes = []
        for value, g, m, v in ((param.data.re, grad.re, state.m_re, state.v_re),
                               (param.data.im, grad.im, state.m_im, state.v_im)):
            m[i] = beta1 * m[i] + (1.0 - beta1) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
            update = (m[i] / bias1) / (np.sqrt(v[i] / bias2) + eps)
            planes.append(value - lr * weight_decay * value - lr * update)
        param.data = CxTensor(planes[0], planes[1], dtype=param.data.dtype)


class Adam:
    """Adam optimizer bound to a fixed, ordered parameter list."""

    def __init__(self, params: Sequence[Parameter], lr: float, weight_decay: float = 0.0,
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> None:
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        self.state = AdamState.zeros_like(self.params)

    def step(self, grads: Gradients) -> None:
        adam_step(self.params, [grads.of(p.data) for p in self.params], self.state, self.lr, self.weight_decay,
                  self.betas, self.eps)


class PlateauScheduler:
    """Divide the learning rate by 1/factor after `patience` consecutive epochs without a new best loss."""

    def __init__(self, optimizer: Adam, patience: int = 2, factor: float = 0.1) -> None:
        self.optimizer = optimizer
        self.patience = patience
        self.factor = factor
        self.best: Optional[float] = None
        self.stagnant = 0
        self.reductions = 0
        self.logger = logging.getLogger(__name__)

    def step(self, loss: float) -> bool:
        """Record an epoch loss; returns True when the learning rate was reduced."""
        if self.best is None or loss < self.best:
            self.best = loss
            self.stagnant = 0
            return False
        self.stagnant += 1
        if self.stagnant < self.patience:
            return False
        self.optimizer.lr *= self.factor
        self.stagnant = 0
        self.reductions += 1
        self.logger.info("Validation loss stagnated for %d epochs, learning rate reduced to %.3e",
                         self.patience, self.optimizer.lr)
        return True
