"""
Reverse-mode differentiation over real planes.

Complex parameters are treated as independent (re, im) real parameters: every primitive registers a backward rule
that maps the cotangent planes of its output to cotangent planes of its inputs.  A Tape records primitives in
execution order, so node ids are topologically ordered and backward is a single reverse sweep.
"""
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
import itertools
import logging
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from cxverb.cxcore.tensor import CxTensor
from cxverb.errors import ArgumentError, UnsupportedOpError

PlaneGrad = Tuple[Optional[np.ndarray], Optional[np.ndarray]]
BackwardRule = Callable[[Any, np.ndarray, np.ndarray], Sequence[Optional[PlaneGrad]]]

_RULES: Dict[str, BackwardRule] = {}
_ACTIVE_TAPE: ContextVar[Optional['Tape']] = ContextVar('cxverb_active_tape', default=None)
_TAPE_SERIAL = itertools.count(1)

LEAF = "leaf"


def defvjp(name: str) -> Callable[[BackwardRule], BackwardRule]:
    """Register the backward rule of primitive `name`."""
    def register(rule: BackwardRule) -> BackwardRule:
        _RULES[name] = rule
        return rule
    return register


def registered_ops() -> List[str]:
    return sorted(_RULES)


def current_tape() -> Optional['Tape']:
    return _ACTIVE_TAPE.get()


@contextmanager
def no_record() -> Iterator[None]:
    """Evaluate operations without recording them on the active tape."""
    token = _ACTIVE_TAPE.set(None)
    try:
        yield
    finally:
        _ACTIVE_TAPE.reset(token)


@dataclass
class TapeNode:
    op: str
    inputs: Tuple[int, ...]
    saved: Any
    shape: Tuple[int, ...]
    dtype: np.dtype


class Gradients:
    """Gradients of a scalar loss with respect to the leaf tensors of a tape."""

    def __init__(self, tape: 'Tape', grads: List[Optional[Tuple[np.ndarray, np.ndarray]]]) -> None:
        self._tape = tape
        self._grads = grads

    def of(self, tensor: CxTensor) -> CxTensor:
        """Gradient planes (d/d re, d/d im) for a tensor used on the tape; zeros if it did not affect the loss."""
        node_id = self._tape.node_of(tensor)
        if node_id is None or self._grads[node_id] is None:
            return CxTensor(np.zeros(tensor.shape, dtype=tensor.dtype), np.zeros(tensor.shape, dtype=tensor.dtype))
        g_re, g_im = self._grads[node_id]
        return CxTensor(g_re, g_im, dtype=tensor.dtype)

    def __contains__(self, tensor: CxTensor) -> bool:
        node_id = self._tape.node_of(tensor)
        return node_id is not None and self._grads[node_id] is not None


class Tape:
    """Append-only record of primitive operations for one forward/backward pass."""

    def __init__(self) -> None:
        self.serial = next(_TAPE_SERIAL)
        self.nodes: List[TapeNode] = []
        self._token = None
        self.logger = logging.getLogger(__name__)

    def __enter__(self) -> 'Tape':
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def node_of(self, tensor: CxTensor) -> Optional[int]:
        trace = tensor._trace
        if trace is not None and trace[0] == self.serial:
            return trace[1]
        return None

    def watch(self, tensor: CxTensor) -> int:
        """Register a tensor as a leaf (idempotent) and return its node id."""
        node_id = self.node_of(tensor)
        if node_id is None:
            node_id = len(self.nodes)
            self.nodes.append(TapeNode(LEAF, (), None, tensor.shape, tensor.dtype))
            tensor._trace = (self.serial, node_id)
        return node_id

    def record(self, op: str, inputs: Sequence[CxTensor], output: CxTensor, saved: Any) -> int:
        if op not in _RULES:
            raise UnsupportedOpError(f"primitive '{op}' has no registered backward rule")
        input_ids = tuple(self.watch(t) for t in inputs)
        node_id = len(self.nodes)
        self.nodes.append(TapeNode(op, input_ids, saved, output.shape, output.dtype))
        output._trace = (self.serial, node_id)
        return node_id

    def backward(self, loss: CxTensor) -> Gradients:
        """Sweep the tape once in reverse order, accumulating gradients of a real scalar loss."""
        loss_id = self.node_of(loss)
        if loss.size != 1:
            raise ArgumentError(f"loss must be a scalar, got shape {loss.shape}")
        if not loss.real_valued:
            raise ArgumentError("loss must be real-valued")
        if loss_id is None:
            raise ArgumentError("loss was not computed on this tape")

        grads: List[Optional[Tuple[np.ndarray, np.ndarray]]] = [None] * len(self.nodes)
        grads[loss_id] = (np.ones(loss.shape, dtype=loss.dtype), np.zeros(loss.shape, dtype=loss.dtype))

        for node_id in range(loss_id, -1, -1):
            node = self.nodes[node_id]
            if node.op == LEAF or grads[node_id] is None:
                continue
            g_re, g_im = grads[node_id]
            input_grads = _RULES[node.op](node.saved, g_re, g_im)
            for input_id, plane_grad in zip(node.inputs, input_grads):
                if plane_grad is None:
                    continue
                shape = self.nodes[input_id].shape
                dtype = self.nodes[input_id].dtype
                d_re, d_im = plane_grad
                d_re = np.zeros(shape, dtype=dtype) if d_re is None else d_re
                d_im = np.zeros(shape, dtype=dtype) if d_im is None else d_im
                if grads[input_id] is None:
                    grads[input_id] = (np.array(d_re, dtype=dtype), np.array(d_im, dtype=dtype))
                else:
                    acc_re, acc_im = grads[input_id]
                    acc_re += d_re
                    acc_im += d_im
        self.logger.debug("Backward pass over %d tape nodes completed", loss_id + 1)
        return Gradients(self, grads)


def emit(op: str, inputs: Sequence[CxTensor], re: np.ndarray, im: np.ndarray, saved: Any = None,
         real_valued: bool = False) -> CxTensor:
    """Wrap primitive results in a tensor and record it on the active tape, if any."""
    out = CxTensor(re, im, real_valued=real_valued, dtype=inputs[0].dtype if inputs else None)
    tape = current_tape()
    if tape is not None:
        tape.record(op, inputs, out, saved)
    return out


def tape_forward(f: Callable[..., CxTensor], inputs: Sequence[CxTensor]) -> Tuple[CxTensor, Tape]:
    """Run f on the inputs while recording a tape; inputs become the first leaf nodes."""
    tape = Tape()
    with tape:
        for tensor in inputs:
            tape.watch(tensor)
        output = f(*inputs)
    return output, tape


def backward(tape: Tape, loss: CxTensor) -> Gradients:
    return tape.backward(loss)
