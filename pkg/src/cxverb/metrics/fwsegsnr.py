"""Frequency-weighted segmental SNR over 25 mel-spaced bands."""
import numpy as np
from scipy.signal.windows import hann

from cxverb.metrics.framing import active_frames, check_pair, frame_signal

N_BANDS = 25
WEIGHT_EXPONENT = 0.2
SNR_CLIP = (-10.0, 35.0)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(n_bands: int, n_fft: int, rate: int) -> np.ndarray:
    """(n_bands, n_fft/2 + 1) triangular filters evenly spaced on the mel scale from 0 Hz to rate/2."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(rate / 2.0), n_bands + 2))
    freqs = np.linspace(0.0, rate / 2.0, n_fft // 2 + 1)
    bank = np.zeros((n_bands, len(freqs)))
    for b in range(n_bands):
        lo, mid, hi = edges[b:b + 3]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        bank[b] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def fw_seg_snr(ref: np.ndarray, deg: np.ndarray, rate: int = 16000) -> float:
    """
    Band SNR 10 log10(X_b^2 / (X_b - D_b)^2) on mel-band magnitude spectra, clipped to [-10, 35] dB, averaged per
    frame with weights X_b^0.2, then over speech-active frames.  Gain-sensitive by construction.

    :param ref: Reference waveform.
    :param deg: Degraded waveform of the same length.
    :raises DataError: for mismatched lengths, fewer than 10 frames or a silent reference.
    """
    check_pair(ref, deg, rate)
    ref_frames = frame_signal(ref, rate)
    deg_frames = frame_signal(deg, rate)
    keep = active_frames(ref_frames)
    length = ref_frames.shape[1]
    n_fft = int(2 ** np.ceil(np.log2(length)))
    window = hann(length, sym=False)
    bank = mel_filterbank(N_BANDS, n_fft, rate)
    ref_bands = np.abs(np.fft.rfft(ref_frames[keep] * window, n=n_fft)) @ bank.T
    deg_bands = np.abs(np.fft.rfft(deg_frames[keep] * window, n=n_fft)) @ bank.T

    error = (ref_bands - deg_bands) ** 2
    signal = ref_bands ** 2
    with np.errstate(divide='ignore', invalid='ignore'):
        band_snr = np.where(error > 0, 10.0 * np.log10(np.maximum(signal, 1e-300) / np.where(error > 0, error, 1.0)),
                            SNR_CLIP[1])
    band_snr = np.clip(band_snr, *SNR_CLIP)
    weights = ref_bands ** WEIGHT_EXPONENT
    totals = weights.sum(axis=1)
    segments = np.where(totals > 0, (weights * band_snr).sum(axis=1) / np.where(totals > 0, totals, 1.0),
                        SNR_CLIP[1])
    return float(np.clip(segments, *SNR_CLIP).mean())
