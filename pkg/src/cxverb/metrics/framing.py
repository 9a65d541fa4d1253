"""Shared short-time framing and speech-activity gating for the framewise metrics."""
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from cxverb.errors import DataError

FRAME_MS = 25.0
HOP_MS = 10.0
ACTIVITY_DB = -40.0
MIN_FRAMES = 10


def frame_geometry(rate: int) -> Tuple[int, int]:
    return int(round(FRAME_MS * rate / 1000.0)), int(round(HOP_MS * rate / 1000.0))


def frame_signal(x: np.ndarray, rate: int) -> np.ndarray:
    """(n_frames, frame_length) view of 25 ms frames every 10 ms; a trailing partial frame is dropped."""
    length, hop = frame_geometry(rate)
    x = np.asarray(x, dtype=np.float64)
    if len(x) < length:
        return np.zeros((0, length))
    return sliding_window_view(x, length)[::hop]


def check_pair(ref: np.ndarray, deg: np.ndarray, rate: int) -> None:
    if len(ref) != len(deg):
        raise DataError(f"reference has {len(ref)} samples, degraded signal {len(deg)}")
    length, hop = frame_geometry(rate)
    if len(ref) < length + (MIN_FRAMES - 1) * hop:
        raise DataError(f"{len(ref)} samples give fewer than {MIN_FRAMES} analysis frames")


def active_frames(frames: np.ndarray, threshold_db: float = ACTIVITY_DB) -> np.ndarray:
    """Mask of frames whose energy is within threshold_db of the loudest frame."""
    energy = np.sum(frames ** 2, axis=1)
    peak = energy.max() if len(energy) else 0.0
    if peak <= 0:
        raise DataError("reference signal is silent")
    return energy > peak * 10.0 ** (threshold_db / 10.0)
