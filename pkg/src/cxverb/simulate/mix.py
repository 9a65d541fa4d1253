"""Reverberation and additive noise: y = x + r + n, with x the direct-path target."""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.signal import butter, fftconvolve, sosfilt

from cxverb.errors import ArgumentError, DataError

NOISE_KINDS = ('white', 'pink', 'lowfreq', 'none')


def convolve_fft(s: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Full linear convolution, len(s) + len(h) - 1 samples."""
    return fftconvolve(np.asarray(s, dtype=np.float64), np.asarray(h, dtype=np.float64), mode='full')


def make_noise(kind: str, n: int, rng: np.random.Generator, rate: int = 16000,
               lowfreq_cutoff: float = 400.0) -> np.ndarray:
    """
    Unscaled noise of n samples.

    :param kind: 'white', 'pink' (1/f power), 'lowfreq' (white through a first-order 400 Hz low-pass) or 'none'.
    """
    if kind == 'none':
        return np.zeros(n)
    white = rng.standard_normal(n)
    if kind == 'white':
        return white
    if kind == 'pink':
        spectrum = np.fft.rfft(white)
        freqs = np.arange(len(spectrum), dtype=np.float64)
        freqs[0] = 1.0
        return np.fft.irfft(spectrum / np.sqrt(freqs), n=n)
    if kind == 'lowfreq':
        sos = butter(1, lowfreq_cutoff, btype='low', fs=rate, output='sos')
        return sosfilt(sos, white)
    raise ArgumentError(f"unknown noise kind '{kind}', expected one of {NOISE_KINDS}")


def scale_to_snr(signal: np.ndarray, noise: np.ndarray, snr_db: float) -> np.ndarray:
    """Noise rescaled so that 10 log10(|signal|^2 / |noise|^2) = snr_db."""
    if not np.isfinite(snr_db):
        raise ArgumentError(f"SNR must be finite, got {snr_db}")
    noise_energy = float(np.sum(noise ** 2))
    if noise_energy == 0:
        raise DataError("noise has no energy")
    return noise * np.sqrt(float(np.sum(signal ** 2)) / (noise_energy * 10.0 ** (snr_db / 10.0)))


def reverberate_and_mix(s: np.ndarray, h: np.ndarray, noise_kind: str = 'white', snr_db: Optional[float] = 20.0,
                        rng: Optional[np.random.Generator] = None, rate: int = 16000,
                        lowfreq_cutoff: float = 400.0, early_samples: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reverberant noisy mixture and its aligned target.

    :param s: Dry source waveform.
    :param h: Impulse response with the direct tap at index 0.
    :param noise_kind: One of NOISE_KINDS; 'none' or snr_db None adds no noise.
    :param early_samples: When positive, the target also keeps the reflections h[1:early_samples].
    :return: (y, x_target), both len(s) samples.
    :raises DataError: for a silent source.
    """
    s = np.asarray(s, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if not np.any(s):
        raise DataError("source waveform is silent")
    n = len(s)
    split = max(early_samples, 1)
    direct = h[0] * s
    early = np.zeros(n)
    late = np.zeros(n)
    if split > 1 and np.any(h[1:split]):
        early = convolve_fft(s, np.concatenate([[0.0], h[1:split]]))[:n]
    if np.any(h[split:]):
        late = convolve_fft(s, np.concatenate([np.zeros(split), h[split:]]))[:n]
    target = direct + early if split > 1 else direct
    reverberant = direct + early + late

    y = reverberant
    if noise_kind != 'none' and snr_db is not None:
        rng = rng or np.random.default_rng(0)
        noise = scale_to_snr(reverberant, make_noise(noise_kind, n, rng, rate, lowfreq_cutoff), snr_db)
        y = reverberant + noise
    logging.getLogger(__name__).debug("Mixed %d samples: noise %s at %s dB", n, noise_kind, snr_db)
    return y, target


def measured_snr(signal: np.ndarray, mixture: np.ndarray) -> float:
    noise = mixture - signal
    return 10.0 * np.log10(float(np.sum(signal ** 2)) / float(np.sum(noise ** 2)))
