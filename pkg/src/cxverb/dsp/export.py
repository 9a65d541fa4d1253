"""Spectrogram export as magnitude-dB CSV tables and 8-bit binary PGM images."""
import logging
import os

import numpy as np

from cxverb.cxcore.tensor import CxTensor
from cxverb.errors import ShapeError

DB_RANGE = (-120.0, 0.0)


def magnitude_db(s: CxTensor) -> np.ndarray:
    """(T, F) magnitude in dB relative to the spectrogram peak, clipped to [-120, 0]."""
    spec = s.to_complex()
    while spec.ndim > 2:
        if spec.shape[0] != 1:
            raise ShapeError(f"expected a single spectrogram, got {s.shape}")
        spec = spec[0]
    magnitude = np.abs(spec)
    peak = magnitude.max()
    if peak == 0:
        return np.full(magnitude.shape, DB_RANGE[0])
    with np.errstate(divide='ignore'):
        db = 20.0 * np.log10(magnitude / peak)
    return np.clip(db, *DB_RANGE)


def _prepare(path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_csv(path: str, s: CxTensor) -> str:
    """T rows by F columns."""
    _prepare(path)
    np.savetxt(path, magnitude_db(s), fmt='%.3f', delimiter=',')
    logging.getLogger(__name__).info("Wrote spectrogram table %s", path)
    return path


def write_pgm(path: str, s: CxTensor) -> str:
    """P5 image, one column per frame, lowest frequency at the bottom."""
    db = magnitude_db(s)
    low, high = DB_RANGE
    pixels = np.round((db - low) / (high - low) * 255.0).astype(np.uint8)
    image = np.ascontiguousarray(pixels.T[::-1])
    height, width = image.shape
    _prepare(path)
    with open(path, 'wb') as f:
        f.write(f"P5\n{width} {height}\n255\n".encode('ascii'))
        f.write(image.tobytes())
    logging.getLogger(__name__).info("Wrote spectrogram image %s (%dx%d)", path, width, height)
    return path
