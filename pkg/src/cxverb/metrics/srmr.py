"""
Reference-free modulation energy ratio, a simplified SRMR.

The signal passes through 23 ERB-spaced 4th-order Butterworth band-pass filters; each band's envelope (full-wave
rectification, low-pass, decimation to 400 Hz) is split by 8 modulation filters with log-spaced centres from 4 to
128 Hz.  The score is the energy in modulation bands 1-4 over the energy in bands 5-8, averaged over acoustic bands.
Values are not comparable to the reference SRMR toolbox.
"""
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.signal import butter, resample_poly, sosfiltfilt, sosfilt

from cxverb.errors import DataError

N_ACOUSTIC = 23
N_MODULATION = 8
MODULATION_RANGE = (4.0, 128.0)
LOW_FREQ = 125.0
HIGH_FRACTION = 0.4
ENVELOPE_RATE = 400
ENVELOPE_CUTOFF = 180.0
MIN_SECONDS = 1.0


def erb_space(low: float, high: float, n: int) -> np.ndarray:
    """n centre frequencies equally spaced on the ERB-rate scale."""
    erb_rate = lambda f: 21.4 * np.log10(1.0 + 0.00437 * f)
    inverse = lambda e: (10.0 ** (e / 21.4) - 1.0) / 0.00437
    return inverse(np.linspace(erb_rate(low), erb_rate(high), n))


def erb_bandwidth(f: np.ndarray) -> np.ndarray:
    return 24.7 * (4.37 * f / 1000.0 + 1.0)


@lru_cache(maxsize=8)
def _acoustic_bank(rate: int) -> Tuple[np.ndarray, ...]:
    sections = []
    for fc in erb_space(LOW_FREQ, HIGH_FRACTION * rate, N_ACOUSTIC):
        half = erb_bandwidth(fc) / 2.0
        sections.append(butter(2, [max(fc - half, 1.0), min(fc + half, 0.49 * rate)], btype='bandpass', fs=rate,
                               output='sos'))
    return tuple(sections)


@lru_cache(maxsize=1)
def _modulation_bank() -> Tuple[np.ndarray, ...]:
    centres = np.geomspace(*MODULATION_RANGE, N_MODULATION)
    half_step = np.sqrt(centres[1] / centres[0])
    return tuple(butter(2, [fc / half_step, fc * half_step], btype='bandpass', fs=ENVELOPE_RATE, output='sos')
                 for fc in centres)


def modulation_energies(x: np.ndarray, rate: int = 16000) -> np.ndarray:
    """(23, 8) energy per acoustic band and modulation band."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < MIN_SECONDS * rate:
        raise DataError(f"srmr_lite needs at least {MIN_SECONDS} s of audio, got {len(x) / rate:.3f} s")
    if rate % ENVELOPE_RATE:
        raise DataError(f"sample rate {rate} is not a multiple of the {ENVELOPE_RATE} Hz envelope rate")
    smoother = butter(4, ENVELOPE_CUTOFF, btype='low', fs=rate, output='sos')
    energies = np.zeros((N_ACOUSTIC, N_MODULATION))
    for i, band in enumerate(_acoustic_bank(rate)):
        envelope = sosfiltfilt(smoother, np.abs(sosfilt(band, x)))
        envelope = resample_poly(envelope, 1, rate // ENVELOPE_RATE)
        for j, mod in enumerate(_modulation_bank()):
            energies[i, j] = np.mean(sosfilt(mod, envelope) ** 2)
    return energies


def srmr_lite(x: np.ndarray, rate: int = 16000) -> float:
    """
    :param x: Waveform, at least one second long.
    :raises DataError: for short input or a silent signal.
    """
    energies = modulation_energies(x, rate)
    low = energies[:, :4].sum(axis=1)
    high = energies[:, 4:].sum(axis=1)
    if not np.any(high > 0):
        raise DataError("signal has no modulation energy")
    valid = high > 0
    return float(np.mean(low[valid] / high[valid]))
