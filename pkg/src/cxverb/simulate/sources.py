"""
Speech-like dry sources for running the pipeline without a corpus: syllables of glottal pulse trains shaped by
three formant resonators, with a smooth syllabic envelope and silent pauses between syllables.
"""
import numpy as np
from scipy.signal import lfilter
from scipy.signal.windows import tukey

# (F1, F2, F3) in Hz for a handful of vowels
VOWEL_FORMANTS = ((730.0, 1090.0, 2440.0), (270.0, 2290.0, 3010.0), (300.0, 870.0, 2240.0),
                  (530.0, 1840.0, 2480.0), (660.0, 1720.0, 2410.0), (490.0, 1350.0, 1690.0))
FORMANT_BANDWIDTHS = (80.0, 100.0, 120.0)
PEAK = 0.5


def _resonator(x: np.ndarray, freq: float, bandwidth: float, rate: int) -> np.ndarray:
    r = np.exp(-np.pi * bandwidth / rate)
    a = [1.0, -2.0 * r * np.cos(2.0 * np.pi * freq / rate), r * r]
    return lfilter([1.0 - r], a, x)


def _pulse_train(n: int, f0_start: float, f0_end: float, rate: int) -> np.ndarray:
    f0 = np.linspace(f0_start, f0_end, n)
    phase = np.cumsum(f0 / rate)
    pulses = np.zeros(n)
    pulses[np.flatnonzero(np.diff(np.floor(phase), prepend=0.0) > 0)] = 1.0
    return pulses


def synthetic_utterance(seconds: float, rate: int, rng: np.random.Generator) -> np.ndarray:
    """
    :param seconds: Utterance duration.
    :param rate: Sample rate in Hz.
    :param rng: Controls syllable timing, pitch, vowels and aspiration noise.
    :return: Waveform peak-normalized to 0.5.
    """
    n = int(round(seconds * rate))
    out = np.zeros(n)
    pos = int(rng.uniform(0.05, 0.15) * rate)
    while pos < n:
        length = min(int(rng.uniform(0.15, 0.3) * rate), n - pos)
        if length < 16:
            break
        f0 = rng.uniform(90.0, 220.0)
        excitation = _pulse_train(length, f0, f0 * rng.uniform(0.85, 1.15), rate)
        excitation += 0.05 * rng.standard_normal(length)
        voiced = np.zeros(length)
        for freq, bandwidth in zip(VOWEL_FORMANTS[rng.integers(len(VOWEL_FORMANTS))], FORMANT_BANDWIDTHS):
            voiced += _resonator(excitation, freq, bandwidth, rate)
        out[pos:pos + length] = voiced * tukey(length, 0.6) * rng.uniform(0.5, 1.0)
        pos += length + int(rng.uniform(0.05, 0.2) * rate)
    peak = np.max(np.abs(out))
    if peak == 0:
        # too short for a syllable: fall back to a single pulse
        out[0] = 1.0
        peak = 1.0
    return out * (PEAK / peak)
