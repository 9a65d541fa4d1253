"""
Binary checkpoint format.

    magic  b"SCGAN001"
    then, repeated until end of file, one record per tensor:
        u32 name length, UTF-8 name, u32 dtype tag (0 = float32, 1 = float64), u32 rank, u32 dims...,
        raw re plane, raw im plane

All integers and samples are little-endian; planes are row-major.
"""
import logging
import os
import struct
from typing import BinaryIO, Dict, Optional

import numpy as np

from cxverb.cxcore.tensor import CxTensor
from cxverb.cxlayers.module import Module
from cxverb.errors import FormatError

MAGIC = b"SCGAN001"
_DTYPE_TAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_TAG_DTYPES = {0: np.dtype('<f4'), 1: np.dtype('<f8')}


def _write_record(f: BinaryIO, name: str, tensor: CxTensor) -> None:
    encoded = name.encode('utf-8')
    dtype = tensor.dtype
    f.write(struct.pack('<I', len(encoded)))
    f.write(encoded)
    f.write(struct.pack('<II', _DTYPE_TAGS[dtype], tensor.ndim))
    if tensor.ndim:
        f.write(struct.pack(f'<{tensor.ndim}I', *tensor.shape))
    little = dtype.newbyteorder('<')
    f.write(np.ascontiguousarray(tensor.re, dtype=little).tobytes())
    f.write(np.ascontiguousarray(tensor.im, dtype=little).tobytes())


def _read_exact(f: BinaryIO, n: int, path: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise FormatError(f"{path}: truncated checkpoint record")
    return data


def save_tensors(path: str, tensors: Dict[str, CxTensor]) -> str:
    logger = logging.getLogger(__name__)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(MAGIC)
        for name in sorted(tensors):
            _write_record(f, name, tensors[name])
    logger.info("Saved %d tensors to %s", len(tensors), path)
    return path


def load_tensors(path: str) -> Dict[str, CxTensor]:
    logger = logging.getLogger(__name__)
    tensors: Dict[str, CxTensor] = {}
    with open(path, 'rb') as f:
        if f.read(len(MAGIC)) != MAGIC:
            logger.error("Not a cxverb checkpoint: %s", path)
            raise FormatError(f"{path}: missing checkpoint magic {MAGIC!r}")
        while True:
            head = f.read(4)
            if not head:
                break
            if len(head) != 4:
                raise FormatError(f"{path}: truncated checkpoint record")
            (name_len,) = struct.unpack('<I', head)
            name = _read_exact(f, name_len, path).decode('utf-8')
            tag, rank = struct.unpack('<II', _read_exact(f, 8, path))
            if tag not in _TAG_DTYPES:
                raise FormatError(f"{path}: unknown dtype tag {tag} for '{name}'")
            shape = struct.unpack(f'<{rank}I', _read_exact(f, 4 * rank, path)) if rank else ()
            dtype = _TAG_DTYPES[tag]
            count = int(np.prod(shape)) if rank else 1
            re = np.frombuffer(_read_exact(f, count * dtype.itemsize, path), dtype=dtype).reshape(shape)
            im = np.frombuffer(_read_exact(f, count * dtype.itemsize, path), dtype=dtype).reshape(shape)
            tensors[name] = CxTensor(re, im, dtype=dtype.newbyteorder('='))
    logger.info("Loaded %d tensors from %s", len(tensors), path)
    return tensors


def save_checkpoint(path: str, generator: Module, discriminator: Optional[Module] = None) -> str:
    """Write generator (and optional discriminator) parameters and buffers under 'generator.' / 'discriminator.'."""
    tensors = {f"generator.{k}": v for k, v in generator.state_dict().items()}
    if discriminator is not None:
        tensors.update({f"discriminator.{k}": v for k, v in discriminator.state_dict().items()})
    return save_tensors(path, tensors)


def load_checkpoint(path: str, generator: Module, discriminator: Optional[Module] = None) -> Dict[str, CxTensor]:
    """Restore networks from a checkpoint; a missing discriminator section leaves the discriminator untouched."""
    tensors = load_tensors(path)
    split: Dict[str, Dict[str, CxTensor]] = {'generator': {}, 'discriminator': {}}
    for name, tensor in tensors.items():
        section, _, local = name.partition('.')
        if section not in split:
            raise FormatError(f"{path}: unexpected tensor '{name}'")
        split[section][local] = tensor
    if not split['generator']:
        raise FormatError(f"{path}: checkpoint holds no generator tensors")
    generator.load_state_dict(split['generator'])
    if discriminator is not None and split['discriminator']:
        discriminator.load_state_dict(split['discriminator'])
    return tensors
