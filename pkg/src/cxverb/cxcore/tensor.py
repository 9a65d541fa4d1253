"""
Dense complex tensors stored as paired real/imaginary planes.

Planes are row-major numpy arrays of identical shape, ordered (B, C, T, F) at rank 4.  Tensors are immutable values:
both planes are read-only views, and every operation returns a new tensor.
"""
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from cxverb.errors import ArgumentError, ShapeError

ArrayLike = Union[np.ndarray, Sequence, float, int]

_FLOAT_TYPES = (np.float32, np.float64)


def _as_plane(values: ArrayLike, dtype) -> np.ndarray:
    plane = np.asarray(values, dtype=dtype).view()
    plane.flags.writeable = False
    return plane


class CxTensor:
    """Complex tensor with separate real and imaginary planes."""

    __slots__ = ("re", "im", "real_valued", "_trace")

    def __init__(self, re: ArrayLike, im: Optional[ArrayLike] = None, *, real_valued: bool = False,
                 dtype=None) -> None:
        """
        :param re: Real plane.
        :param im: Imaginary plane; zeros when omitted.
        :param real_valued: Marks a tensor whose imaginary plane is identically zero (attention maps, scores).
        :param dtype: np.float64 (default) or np.float32.
        """
        if dtype is None:
            dtype = getattr(re, 'dtype', np.float64)
            if dtype not in _FLOAT_TYPES:
                dtype = np.float64
        dtype = np.dtype(dtype)
        if dtype.type not in _FLOAT_TYPES:
            raise ArgumentError(f"unsupported dtype {dtype}; use float32 or float64")
        re_plane = _as_plane(re, dtype)
        im_plane = _as_plane(np.zeros(re_plane.shape, dtype=dtype) if im is None else im, dtype)
        if re_plane.shape != im_plane.shape:
            raise ShapeError(f"real plane {re_plane.shape} and imaginary plane {im_plane.shape} differ")
        if any(d < 1 for d in re_plane.shape):
            raise ShapeError(f"all dimensions must be >= 1, got {re_plane.shape}")
        if real_valued and np.any(im_plane != 0):
            raise ArgumentError("tensor flagged real-valued has a non-zero imaginary plane")
        self.re = re_plane
        self.im = im_plane
        self.real_valued = real_valued
        self._trace = None

    @classmethod
    def from_complex(cls, values: ArrayLike, dtype=np.float64) -> 'CxTensor':
        z = np.asarray(values)
        return cls(np.real(z), np.imag(z), dtype=dtype)

    @classmethod
    def real(cls, values: ArrayLike, dtype=np.float64) -> 'CxTensor':
        """Real-valued tensor (zero imaginary plane)."""
        return cls(values, None, real_valued=True, dtype=dtype)

    @classmethod
    def zeros(cls, shape: Iterable[int], dtype=np.float64) -> 'CxTensor':
        shape = tuple(shape)
        return cls(np.zeros(shape, dtype=dtype), np.zeros(shape, dtype=dtype), dtype=dtype)

    @classmethod
    def ones(cls, shape: Iterable[int], dtype=np.float64) -> 'CxTensor':
        shape = tuple(shape)
        return cls(np.ones(shape, dtype=dtype), np.zeros(shape, dtype=dtype), dtype=dtype)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.re.shape

    @property
    def ndim(self) -> int:
        return self.re.ndim

    @property
    def size(self) -> int:
        return int(self.re.size)

    @property
    def dtype(self) -> np.dtype:
        return self.re.dtype

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    def item(self) -> float:
        """Real part of a single-element tensor as a Python float."""
        if self.size != 1:
            raise ShapeError(f"item() needs a single element, tensor has shape {self.shape}")
        return float(self.re.reshape(-1)[0])

    def astype(self, dtype) -> 'CxTensor':
        return CxTensor(self.re.astype(dtype), self.im.astype(dtype), real_valued=self.real_valued, dtype=dtype)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.re)) and np.all(np.isfinite(self.im)))

    def __add__(self, other: 'CxTensor') -> 'CxTensor':
        from cxverb.cxcore import ops
        return ops.add(self, other)

    def __sub__(self, other: 'CxTensor') -> 'CxTensor':
        from cxverb.cxcore import ops
        return ops.sub(self, other)

    def __mul__(self, other: 'CxTensor') -> 'CxTensor':
        from cxverb.cxcore import ops
        return ops.mul(self, other)

    def __repr__(self) -> str:
        kind = "real" if self.real_valued else "complex"
        return f"CxTensor(shape={self.shape}, dtype={self.dtype.name}, {kind})"


def stack(tensors: Sequence[CxTensor], axis: int = 0) -> CxTensor:
    """Stack equally shaped tensors along a new leading axis (data assembly, not recorded on tapes)."""
    if not tensors:
        raise ArgumentError("stack needs at least one tensor")
    return CxTensor(np.stack([t.re for t in tensors], axis=axis), np.stack([t.im for t in tensors], axis=axis),
                    real_valued=all(t.real_valued for t in tensors), dtype=tensors[0].dtype)
