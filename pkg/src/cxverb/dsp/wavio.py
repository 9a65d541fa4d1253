"""16-bit PCM mono WAV files at a fixed sample rate.  Samples are scaled by 1/32768."""
import logging
import os
from typing import Tuple

import numpy as np
import soundfile as sf

from cxverb.errors import FormatError

PCM_SCALE = 32768.0


def wav_info(path: str):
    try:
        return sf.info(path)
    except RuntimeError as e:
        raise FormatError(f"{path}: not a readable audio file ({e})")


def wav_read(path: str, expected_rate: int = 16000) -> Tuple[np.ndarray, int]:
    """
    Read a mono 16-bit PCM WAV file.

    :param path: File to read.
    :param expected_rate: Required sample rate; no resampling is done.
    :return: (samples in [-1, 1), sample rate)
    :raises FormatError: for compressed, non-16-bit, multi-channel or wrong-rate files.
    """
    logger = logging.getLogger(__name__)
    info = wav_info(path)
    if info.format != 'WAV' or info.subtype != 'PCM_16':
        logger.error("Unsupported audio encoding in %s: %s/%s", path, info.format, info.subtype)
        raise FormatError(f"{path}: expected 16-bit PCM WAV, got {info.format}/{info.subtype}")
    if info.channels != 1:
        raise FormatError(f"{path}: expected mono audio, got {info.channels} channels")
    if info.samplerate != expected_rate:
        raise FormatError(f"{path}: sample rate {info.samplerate} Hz, expected {expected_rate} Hz")
    data, rate = sf.read(path, dtype='int16', always_2d=False)
    return data.astype(np.float64) / PCM_SCALE, rate


def wav_write(path: str, samples: np.ndarray, rate: int = 16000) -> str:
    """Write samples as 16-bit PCM; values outside [-1, 1] warn; everything is clamped to the int16 range."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise FormatError(f"{path}: only mono waveforms can be written, got shape {samples.shape}")
    ints = np.round(samples * PCM_SCALE)
    clipped = int(np.count_nonzero(np.abs(samples) > 1.0))
    if clipped:
        logging.getLogger(__name__).warning("Clamped %d of %d samples writing %s", clipped, len(samples), path)
    ints = np.clip(ints, -PCM_SCALE, PCM_SCALE - 1).astype(np.int16)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    sf.write(path, ints, rate, subtype='PCM_16', format='WAV')
    return path
