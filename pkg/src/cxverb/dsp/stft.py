"""
Analysis/synthesis frontend: pre-emphasis and a centered STFT with weighted overlap-add inverse.

Frames are centered: the waveform is zero-padded by n_fft/2 on both sides, so an L-sample signal yields
1 + L // hop frames and frame t is centered on sample t * hop.
"""
import logging
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window, lfilter

from cxverb.config.config import StftConfig
from cxverb.cxcore.tensor import CxTensor
from cxverb.errors import ArgumentError, DataError, ShapeError

_WOLA_FLOOR = 1e-10


def pre_emphasis(x: np.ndarray, coeff: float = 0.97) -> np.ndarray:
    """y[n] = x[n] - coeff * x[n-1], with y[0] = x[0]."""
    if not 0.0 <= coeff < 1.0:
        raise ArgumentError(f"pre-emphasis coefficient must lie in [0, 1), got {coeff}")
    return lfilter([1.0, -coeff], [1.0], np.asarray(x, dtype=np.float64))


def de_emphasis(y: np.ndarray, coeff: float = 0.97) -> np.ndarray:
    """Inverse of pre_emphasis: x[n] = y[n] + coeff * x[n-1]."""
    if not 0.0 <= coeff < 1.0:
        raise ArgumentError(f"pre-emphasis coefficient must lie in [0, 1), got {coeff}")
    return lfilter([1.0], [1.0, -coeff], np.asarray(y, dtype=np.float64))


def analysis_window(cfg: StftConfig) -> np.ndarray:
    """Periodic window of win_length samples, zero-padded symmetrically to n_fft."""
    window = get_window(cfg.window, cfg.win_length, fftbins=True)
    left = (cfg.n_fft - cfg.win_length) // 2
    return np.pad(window, (left, cfg.n_fft - cfg.win_length - left))


def n_frames(n_samples: int, cfg: StftConfig) -> int:
    return 1 + n_samples // cfg.hop


def stft_array(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Complex (T, n_fft/2 + 1) spectrogram of a mono waveform."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"expected a mono waveform, got shape {x.shape}")
    if len(x) < cfg.win_length:
        raise DataError(f"waveform of {len(x)} samples is shorter than one {cfg.win_length}-sample window")
    half = cfg.n_fft // 2
    padded = np.pad(x, (half, half))
    frames = sliding_window_view(padded, cfg.n_fft)[::cfg.hop][:n_frames(len(x), cfg)]
    return np.fft.rfft(frames * analysis_window(cfg), n=cfg.n_fft, axis=-1)


def istft_array(spec: np.ndarray, cfg: StftConfig, length: Optional[int] = None) -> np.ndarray:
    """
    Weighted overlap-add synthesis of a (T, n_fft/2 + 1) spectrogram.

    :param length: Output length in samples; defaults to (T - 1) * hop.
    """
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != cfg.n_bins:
        raise ShapeError(f"expected a (T, {cfg.n_bins}) spectrogram, got {spec.shape}")
    window = analysis_window(cfg)
    n_t = spec.shape[0]
    frames = np.fft.irfft(spec, n=cfg.n_fft, axis=-1) * window
    total = cfg.n_fft + (n_t - 1) * cfg.hop
    signal = np.zeros(total)
    norm = np.zeros(total)
    for t in range(n_t):
        start = t * cfg.hop
        signal[start:start + cfg.n_fft] += frames[t]
        norm[start:start + cfg.n_fft] += window * window
    signal = np.where(norm > _WOLA_FLOOR, signal / np.maximum(norm, _WOLA_FLOOR), 0.0)
    half = cfg.n_fft // 2
    length = (n_t - 1) * cfg.hop if length is None else length
    out = signal[half:half + length]
    if len(out) < length:
        out = np.pad(out, (0, length - len(out)))
    return out


def stft(x: np.ndarray, cfg: StftConfig) -> CxTensor:
    """
    Complex spectrogram of a mono waveform.

    :param x: Waveform samples.
    :param cfg: Frontend settings.
    :return: CxTensor of shape (1, 1, T, n_fft/2 + 1).
    :raises DataError: if the waveform is shorter than one window.
    """
    spec = stft_array(x, cfg)
    logging.getLogger(__name__).debug("STFT of %d samples: %d frames x %d bins", len(x), *spec.shape)
    return CxTensor.from_complex(spec[None, None])


def istft(s: CxTensor, cfg: StftConfig, length: Optional[int] = None) -> np.ndarray:
    """Waveform from a (1, 1, T, F) or (T, F) spectrogram produced with the same cfg."""
    spec = s.to_complex()
    if spec.ndim == 4:
        if spec.shape[:2] != (1, 1):
            raise ShapeError(f"expected a single-channel spectrogram, got {s.shape}")
        spec = spec[0, 0]
    return istft_array(spec, cfg, length)
