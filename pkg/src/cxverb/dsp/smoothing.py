"""
Optimal recursive smoothing of the short-time power spectrum.

Per frame t and bin f:

    alpha(t,f) = alpha_max / (1 + (P(t-1,f) / floor(t,f) - 1)^2)
    P(t,f)     = alpha(t,f) P(t-1,f) + (1 - alpha(t,f)) |Y(t,f)|^2

floor(t,f) is the minimum of P over the previous `window` frames.  With alpha_max = 1 a bin whose P sits on its own
minimum would never update again; alpha_max < 1 prevents that.
"""
from dataclasses import dataclass
import logging
from typing import Optional, Tuple

import numpy as np

from cxverb.config.config import StftConfig
from cxverb.cxcore.tensor import CxTensor
from cxverb.errors import ArgumentError, ShapeError


@dataclass
class SmootherState:
    """
    Settings and results of one smoothing pass.  power, noise_floor and alpha are (T, F) maps filled by
    optimal_smoothing.
    """
    window: int = 120
    floor_db: float = -120.0
    alpha_max: float = 0.96
    power: Optional[np.ndarray] = None
    noise_floor: Optional[np.ndarray] = None
    alpha: Optional[np.ndarray] = None

    @classmethod
    def from_config(cls, cfg: StftConfig) -> 'SmootherState':
        return cls(window=cfg.smoothing_window, floor_db=cfg.floor_db, alpha_max=cfg.smoothing_alpha_max)


def optimal_alpha(prev_power: np.ndarray, noise_floor: np.ndarray) -> np.ndarray:
    """1 / (1 + (P(t-1) / floor - 1)^2); equals 1 when the previous power sits on the floor."""
    ratio = np.asarray(prev_power, dtype=np.float64) / np.asarray(noise_floor, dtype=np.float64)
    return 1.0 / (1.0 + (ratio - 1.0) ** 2)


def _spectrum(y) -> np.ndarray:
    spec = y.to_complex() if isinstance(y, CxTensor) else np.asarray(y)
    if spec.ndim == 4:
        if spec.shape[:2] != (1, 1):
            raise ShapeError(f"expected a single-channel spectrogram, got {spec.shape}")
        spec = spec[0, 0]
    if spec.ndim != 2:
        raise ShapeError(f"expected a (T, F) spectrogram, got {spec.shape}")
    return spec


def optimal_smoothing(y, state: Optional[SmootherState] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Smooth the power spectrum of a full-utterance spectrogram.

    :param y: Complex spectrogram, CxTensor (1, 1, T, F) or array (T, F).
    :param state: Settings; the computed maps are stored on it.
    :return: (P, alpha), both (T, F).
    """
    state = state or SmootherState()
    if state.window < 1 or not 0.0 < state.alpha_max <= 1.0:
        raise ArgumentError(f"invalid smoother settings: window {state.window}, alpha_max {state.alpha_max}")
    periodogram = np.abs(_spectrum(y)) ** 2
    n_t, n_f = periodogram.shape
    power = np.zeros((n_t, n_f))
    noise_floor = np.zeros((n_t, n_f))
    alpha = np.ones((n_t, n_f))

    peak = float(periodogram.max()) if periodogram.size else 0.0
    if peak == 0.0:
        state.power, state.noise_floor, state.alpha = power, noise_floor, alpha
        return power, alpha
    floor = peak * 10.0 ** (state.floor_db / 10.0)
    periodogram = np.maximum(periodogram, floor)

    # ring buffer of the last `window` P values, seeded with P(-1) = |Y(0)|^2
    history = np.full((state.window, n_f), np.inf)
    prev = periodogram[0].copy()
    history[0] = prev
    for t in range(n_t):
        noise_floor[t] = history.min(axis=0)
        alpha[t] = state.alpha_max * optimal_alpha(prev, noise_floor[t])
        prev = np.maximum(alpha[t] * prev + (1.0 - alpha[t]) * periodogram[t], floor)
        power[t] = prev
        history[(t + 1) % state.window] = prev
    state.power, state.noise_floor, state.alpha = power, noise_floor, alpha
    logging.getLogger(__name__).debug("Smoothed %d frames x %d bins, mean alpha %.3f", n_t, n_f, alpha.mean())
    return power, alpha


def smoothed_input(y: CxTensor, power: np.ndarray) -> CxTensor:
    """
    Network input sqrt(P) * exp(j angle(Y)): the smoothed magnitude with the original phase.  Cells with |Y| = 0
    take zero phase.
    """
    spec = y.to_complex()
    power = np.asarray(power, dtype=np.float64)
    if power.shape != spec.shape[-2:] and power.shape != spec.shape:
        raise ShapeError(f"power map {power.shape} does not match spectrogram {spec.shape}")
    magnitude = np.abs(spec)
    phase = np.where(magnitude > 0, spec / np.where(magnitude > 0, magnitude, 1.0), 1.0)
    return CxTensor.from_complex(np.sqrt(power) * phase, dtype=y.dtype)
