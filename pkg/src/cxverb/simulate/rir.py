"""
Statistical room impulse responses: a unit direct tap at index 0 followed by Gaussian noise under an exponential
envelope that decays 60 dB in t60 seconds, and Schroeder backward integration for measuring the result.
"""
import logging
from typing import Optional

import numpy as np

from cxverb.config.config import SimConfig
from cxverb.errors import ConfigError, DataError

_RANGE_TOLERANCE = 1e-9


def drr_for(cfg: SimConfig, t60: float) -> float:
    """
    Direct-to-reverberant ratio in dB.  Without a fixed cfg.drr_db the reverberant energy grows in proportion to
    t60, anchored at (reference_t60, reference_drr_db).
    """
    if cfg.drr_db is not None:
        return cfg.drr_db
    return cfg.reference_drr_db - 10.0 * np.log10(t60 / cfg.reference_t60)


def generate_rir(cfg: SimConfig, t60: float, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    :param cfg: Simulator settings (length, rate, direct gain, DRR).
    :param t60: Reverberation time in seconds, inside [cfg.t60_min, cfg.t60_max].
    :param rng: Source of the tail noise.
    :raises ConfigError: if t60 is outside the configured range.
    """
    if not cfg.t60_min - _RANGE_TOLERANCE <= t60 <= cfg.t60_max + _RANGE_TOLERANCE:
        raise ConfigError(f"t60 {t60} s outside the configured range [{cfg.t60_min}, {cfg.t60_max}]")
    rng = rng or np.random.default_rng(cfg.seed)
    length = int(round(cfg.rir_seconds * cfg.sample_rate))
    n = np.arange(1, length)
    envelope = np.exp(-n * 3.0 * np.log(10.0) / (t60 * cfg.sample_rate))
    tail = rng.standard_normal(length - 1) * envelope
    tail_energy = float(np.sum(tail ** 2))
    direct_energy = cfg.direct_gain ** 2
    tail *= np.sqrt(direct_energy / (tail_energy * 10.0 ** (drr_for(cfg, t60) / 10.0)))
    h = np.concatenate([[cfg.direct_gain], tail])
    logging.getLogger(__name__).debug("RIR: t60 %.3f s, %d taps, DRR %.2f dB", t60, length, drr_for(cfg, t60))
    return h


def energy_decay_curve(h: np.ndarray) -> np.ndarray:
    """Schroeder backward-integrated energy in dB, 0 dB at the first sample."""
    energy = np.cumsum(np.asarray(h, dtype=np.float64)[::-1] ** 2)[::-1]
    if energy[0] <= 0:
        raise DataError("impulse response has no energy")
    with np.errstate(divide='ignore'):
        return 10.0 * np.log10(energy / energy[0])


def measure_t60(h: np.ndarray, rate: int, start_db: float = -5.0, span_db: float = 30.0) -> float:
    """
    Reverberation time from a straight-line fit to the decay curve between start_db and start_db - span_db,
    extrapolated to 60 dB.
    """
    edc = energy_decay_curve(h)
    fit = np.flatnonzero((edc <= start_db) & (edc >= start_db - span_db))
    if len(fit) < 2:
        raise DataError(f"decay curve never spans {start_db} to {start_db - span_db} dB")
    slope, _ = np.polyfit(fit / rate, edc[fit], 1)
    if slope >= 0:
        raise DataError("impulse response does not decay")
    return -60.0 / slope
