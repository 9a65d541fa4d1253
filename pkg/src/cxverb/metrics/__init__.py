from .fwsegsnr import fw_seg_snr, mel_filterbank
from .lpc import cepstral_distance, cepstral_distance_frames, llr, llr_frames, lpc, lpc_cepstrum
from .report import (EvaluationPair, MetricsReport, UtteranceMetrics, compute_metrics, evaluate_pairs,
                     write_report_csv)
from .srmr import modulation_energies, srmr_lite

__all__ = ['fw_seg_snr', 'mel_filterbank', 'cepstral_distance', 'cepstral_distance_frames', 'llr', 'llr_frames',
           'lpc', 'lpc_cepstrum', 'EvaluationPair', 'MetricsReport', 'UtteranceMetrics', 'compute_metrics',
           'evaluate_pairs', 'write_report_csv', 'modulation_energies', 'srmr_lite']
