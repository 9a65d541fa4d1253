"""
Fixed-length spectrogram chips.  An utterance of T frames is cut into ceil(T / chip_frames) non-overlapping
blocks; the last block is zero-padded and remembers how many of its frames are real.
"""
from dataclasses import dataclass, replace
from typing import List, Sequence

import numpy as np

from cxverb.cxcore.tensor import CxTensor
from cxverb.errors import ArgumentError, ShapeError


@dataclass(frozen=True)
class Chip:
    """One (1, chip_frames, F) block of an utterance spectrogram."""
    data: CxTensor
    utterance_id: str
    offset: int
    valid_frames: int

    @property
    def padded(self) -> bool:
        return self.valid_frames < self.data.shape[1]

    def with_data(self, data: CxTensor) -> 'Chip':
        """Same position, new contents (for example the enhanced block)."""
        if data.shape != self.data.shape:
            raise ShapeError(f"replacement {data.shape} does not match chip {self.data.shape}")
        return replace(self, data=data)


def _planes(s: CxTensor):
    if s.ndim == 4 and s.shape[:2] == (1, 1):
        return s.re[0, 0], s.im[0, 0]
    if s.ndim == 3 and s.shape[0] == 1:
        return s.re[0], s.im[0]
    if s.ndim == 2:
        return s.re, s.im
    raise ShapeError(f"expected a single-channel spectrogram, got {s.shape}")


def chip(s: CxTensor, chip_frames: int = 257, utterance_id: str = "") -> List[Chip]:
    """
    Cut an utterance spectrogram into chips.

    :param s: Spectrogram of shape (1, 1, T, F), (1, T, F) or (T, F).
    :param chip_frames: Frames per chip.
    :param utterance_id: Source utterance, carried on every chip.
    """
    if chip_frames < 1:
        raise ArgumentError(f"chip_frames must be positive, got {chip_frames}")
    re, im = _planes(s)
    n_t, n_f = re.shape
    chips = []
    for offset in range(0, n_t, chip_frames):
        valid = min(chip_frames, n_t - offset)
        block_re = np.zeros((1, chip_frames, n_f), dtype=re.dtype)
        block_im = np.zeros((1, chip_frames, n_f), dtype=re.dtype)
        block_re[0, :valid] = re[offset:offset + valid]
        block_im[0, :valid] = im[offset:offset + valid]
        chips.append(Chip(CxTensor(block_re, block_im), utterance_id, offset, valid))
    return chips


def dechip(chips: Sequence[Chip]) -> CxTensor:
    """Reassemble chips in offset order into a (1, 1, T, F) spectrogram, dropping the padding."""
    if not chips:
        raise ArgumentError("no chips to reassemble")
    ordered = sorted(chips, key=lambda c: c.offset)
    expected = 0
    for c in ordered:
        if c.offset != expected:
            raise ShapeError(f"chip at frame {c.offset} leaves a gap after frame {expected}")
        expected += c.valid_frames
    re = np.concatenate([c.data.re[0, :c.valid_frames] for c in ordered])
    im = np.concatenate([c.data.im[0, :c.valid_frames] for c in ordered])
    return CxTensor(re[None, None], im[None, None])


def stack_chips(chips: Sequence[Chip]) -> CxTensor:
    """Batch of chips as a (B, 1, chip_frames, F) tensor."""
    return CxTensor(np.stack([c.data.re for c in chips]), np.stack([c.data.im for c in chips]))
