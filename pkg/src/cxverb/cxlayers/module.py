"""
Parameter containers for complex networks.

A Module registers Parameter and sub-Module attributes automatically; real-valued state that is not trained
(batch-norm running statistics, spectral-norm vectors) lives in named buffers.
"""
from contextlib import contextmanager
import logging
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from cxverb.cxcore.tensor import CxTensor
from cxverb.errors import ArgumentError, ShapeError


class Parameter:
    """Trainable complex tensor slot; optimizers replace `data` with updated tensors."""

    __slots__ = ("data",)

    def __init__(self, data: CxTensor) -> None:
        self.data = data

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Parameter(shape={self.shape})"


class Module:
    """Base class of all layers and networks."""

    def __init__(self) -> None:
        object.__setattr__(self, '_parameters', {})
        object.__setattr__(self, '_modules', {})
        object.__setattr__(self, '_buffers', {})
        object.__setattr__(self, 'training', True)
        object.__setattr__(self, '_frozen', False)
        object.__setattr__(self, 'logger', logging.getLogger(type(self).__module__))

    def __setattr__(self, name: str, value) -> None:
        if isinstance(value, Parameter):
            self._parameters[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        elif name in self.__dict__.get('_buffers', {}):
            self.set_buffer(name, value)
        else:
            object.__setattr__(self, name, value)

    def __getattr__(self, name: str):
        for store in ('_parameters', '_modules', '_buffers'):
            table = self.__dict__.get(store)
            if table is not None and name in table:
                return table[name]
        raise AttributeError(f"'{type(self).__name__}' object has no attribute '{name}'")

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = np.array(value, dtype=np.float64)

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        current = self._buffers[name]
        value = np.asarray(value, dtype=current.dtype)
        if value.shape != current.shape:
            raise ShapeError(f"buffer '{name}' has shape {current.shape}, got {value.shape}")
        self._buffers[name] = value.copy()

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_modules(self, prefix: str = "") -> Iterator[Tuple[str, 'Module']]:
        yield prefix, self
        for name, child in self._modules.items():
            yield from child.named_modules(f"{prefix}.{name}" if prefix else name)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for module_name, module in self.named_modules(prefix):
            for name, param in module._parameters.items():
                yield (f"{module_name}.{name}" if module_name else name), param

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for module_name, module in self.named_modules(prefix):
            for name, buf in module._buffers.items():
                yield (f"{module_name}.{name}" if module_name else name), buf

    def num_parameters(self) -> int:
        """Number of complex parameter entries."""
        return sum(p.size for p in self.parameters())

    def train(self, mode: bool = True) -> 'Module':
        for _, module in self.named_modules():
            object.__setattr__(module, 'training', mode)
        return self

    def eval(self) -> 'Module':
        return self.train(False)

    @property
    def is_frozen(self) -> bool:
        return self._frozen

    @contextmanager
    def frozen(self) -> Iterator['Module']:
        """Suspend every state update (running statistics, power iterations) below this module."""
        previous = [(module, module._frozen) for _, module in self.named_modules()]
        for module, _ in previous:
            object.__setattr__(module, '_frozen', True)
        try:
            yield self
        finally:
            for module, state in previous:
                object.__setattr__(module, '_frozen', state)

    def state_dict(self) -> Dict[str, CxTensor]:
        """Parameters and buffers by dotted name; buffers are stored as real-valued tensors."""
        state: Dict[str, CxTensor] = {}
        for name, param in self.named_parameters():
            state[name] = param.data
        for name, buf in self.named_buffers():
            state[name] = CxTensor.real(buf)
        return state

    def load_state_dict(self, state: Dict[str, CxTensor], strict: bool = True) -> List[str]:
        """
        Copy tensors into parameters and buffers.

        :param state: Mapping produced by state_dict (or read from a checkpoint).
        :param strict: Reject missing and unexpected names.
        :return: Names of expected entries that were missing from state.
        """
        params = dict(self.named_parameters())
        owners = {}
        for module_name, module in self.named_modules():
            for name in module._buffers:
                owners[f"{module_name}.{name}" if module_name else name] = (module, name)

        expected = set(params) | set(owners)
        missing = sorted(expected - set(state))
        unexpected = sorted(set(state) - expected)
        if strict and (missing or unexpected):
            raise ArgumentError(f"state mismatch: missing {missing}, unexpected {unexpected}")

        for name, tensor in state.items():
            if name in params:
                param = params[name]
                if tensor.shape != param.shape:
                    raise ShapeError(f"parameter '{name}' has shape {param.shape}, got {tensor.shape}")
                param.data = CxTensor(tensor.re, tensor.im, dtype=param.data.dtype)
            elif name in owners:
                module, local = owners[name]
                module.set_buffer(local, tensor.re)
        self.logger.debug("Loaded %d tensors into %s", len(state), type(self).__name__)
        return missing

    def astype(self, dtype) -> 'Module':
        for param in self.parameters():
            param.data = param.data.astype(dtype)
        return self

    def __repr__(self) -> str:
        return f"{type(self).__name__}(parameters={self.num_parameters()})"


class ModuleList(Module):
    """Ordered list of sub-modules registered under their index."""

    def __init__(self, modules: Optional[List[Module]] = None) -> None:
        super().__init__()
        for module in modules or []:
            self.append(module)

    def append(self, module: Module) -> None:
        self._modules[str(len(self._modules))] = module

    def __len__(self) -> int:
        return len(self._modules)

    def __iter__(self) -> Iterator[Module]:
        return iter(self._modules.values())

    def __getitem__(self, index: int) -> Module:
        return list(self._modules.values())[index]
