from .dataset import (MANIFEST_NAME, UtteranceRecord, build_dataset, load_manifest, render_item, synthetic_sources,
                      write_manifest)
from .mix import NOISE_KINDS, convolve_fft, make_noise, measured_snr, reverberate_and_mix, scale_to_snr
from .rir import drr_for, energy_decay_curve, generate_rir, measure_t60
from .sources import synthetic_utterance

__all__ = ['MANIFEST_NAME', 'UtteranceRecord', 'build_dataset', 'load_manifest', 'render_item', 'synthetic_sources',
           'write_manifest', 'NOISE_KINDS', 'convolve_fft', 'make_noise', 'measured_snr', 'reverberate_and_mix',
           'scale_to_snr', 'drr_for', 'energy_decay_curve', 'generate_rir', 'measure_t60', 'synthetic_utterance']
