"""
Linear-prediction spectral-envelope distances: cepstral distance and log-likelihood ratio, both computed from
order-10 autocorrelation LPC on Hann-windowed 25 ms frames of speech-active reference frames.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve_toeplitz, toeplitz
from scipy.signal.windows import hann

from cxverb.metrics.framing import active_frames, check_pair, frame_signal

LPC_ORDER = 10
CD_CLIP = (0.0, 10.0)
LLR_CLIP = (0.0, 2.0)
LLR_KEEP = 0.95


def autocorrelation(frame: np.ndarray, order: int = LPC_ORDER) -> np.ndarray:
    full = np.correlate(frame, frame, mode='full')
    mid = len(frame) - 1
    return full[mid:mid + order + 1]


def lpc(frame: np.ndarray, order: int = LPC_ORDER) -> Optional[np.ndarray]:
    """
    Prediction-error filter A = [1, a_1, ..., a_p] by the autocorrelation method, or None for a frame whose
    autocorrelation matrix is singular.
    """
    r = autocorrelation(frame, order)
    if r[0] <= 0:
        return None
    try:
        predictor = solve_toeplitz((r[:order], r[:order]), r[1:order + 1])
    except LinAlgError:
        return None
    if not np.all(np.isfinite(predictor)):
        return None
    return np.concatenate([[1.0], -predictor])


def lpc_cepstrum(a: np.ndarray, n_coeffs: int = LPC_ORDER) -> np.ndarray:
    """Cepstral coefficients c_1..c_n of the all-pole model 1 / A(z); c_0 (gain) is excluded."""
    p = len(a) - 1
    c = np.zeros(n_coeffs + 1)
    for n in range(1, n_coeffs + 1):
        acc = -a[n] if n <= p else 0.0
        for k in range(max(1, n - p), n):
            acc -= (k / n) * c[k] * a[n - k]
        c[n] = acc
    return c[1:]


def _frame_models(ref: np.ndarray, deg: np.ndarray, rate: int):
    check_pair(ref, deg, rate)
    ref_frames = frame_signal(ref, rate)
    deg_frames = frame_signal(deg, rate)
    window = hann(ref_frames.shape[1], sym=False)
    keep = active_frames(ref_frames)
    return ref_frames[keep] * window, deg_frames[keep] * window


def cepstral_distance_frames(ref: np.ndarray, deg: np.ndarray, rate: int = 16000) -> Tuple[np.ndarray, int]:
    """Per-frame cepstral distance over active frames, plus the number of frames skipped as singular."""
    ref_frames, deg_frames = _frame_models(ref, deg, rate)
    values, skipped = [], 0
    for rf, df in zip(ref_frames, deg_frames):
        a_ref, a_deg = lpc(rf), lpc(df)
        if a_ref is None or a_deg is None:
            skipped += 1
            continue
        diff = lpc_cepstrum(a_ref) - lpc_cepstrum(a_deg)
        values.append((10.0 / np.log(10.0)) * np.sqrt(2.0 * np.sum(diff ** 2)))
    return np.clip(np.asarray(values), *CD_CLIP), skipped


def cepstral_distance(ref: np.ndarray, deg: np.ndarray, rate: int = 16000) -> float:
    """
    Mean LPC-cepstrum distance in dB, frames clipped to [0, 10].

    :param ref: Reference waveform.
    :param deg: Degraded waveform of the same length.
    :raises DataError: for mismatched lengths, fewer than 10 frames or a silent reference.
    """
    values, skipped = cepstral_distance_frames(ref, deg, rate)
    if skipped:
        logging.getLogger(__name__).warning("Cepstral distance skipped %d singular frames", skipped)
    return float(values.mean()) if len(values) else 0.0


def llr_frames(ref: np.ndarray, deg: np.ndarray, rate: int = 16000) -> Tuple[np.ndarray, int]:
    """Per-frame log-likelihood ratios ln(a_deg R a_deg' / a_ref R a_ref') with R from the reference frame."""
    ref_frames, deg_frames = _frame_models(ref, deg, rate)
    values, skipped = [], 0
    for rf, df in zip(ref_frames, deg_frames):
        a_ref, a_deg = lpc(rf), lpc(df)
        if a_ref is None or a_deg is None:
            skipped += 1
            continue
        r = toeplitz(autocorrelation(rf))
        denominator = a_ref @ r @ a_ref
        if denominator <= 0:
            skipped += 1
            continue
        values.append(np.log((a_deg @ r @ a_deg) / denominator))
    return np.clip(np.asarray(values), *LLR_CLIP), skipped


def llr(ref: np.ndarray, deg: np.ndarray, rate: int = 16000) -> float:
    """Mean of the smallest 95% of frame LLR values (each clipped to [0, 2])."""
    values, skipped = llr_frames(ref, deg, rate)
    if skipped:
        logging.getLogger(__name__).warning("LLR skipped %d singular frames", skipped)
    if not len(values):
        return 0.0
    keep = max(1, int(np.floor(LLR_KEEP * len(values))))
    return float(np.sort(values)[:keep].mean())
