from .chips import Chip, chip, dechip, stack_chips
from .export import magnitude_db, write_csv, write_pgm
from .masking import apply_crm, identity_mask, oracle_mask
from .smoothing import SmootherState, optimal_alpha, optimal_smoothing, smoothed_input
from .stft import de_emphasis, istft, istft_array, n_frames, pre_emphasis, stft, stft_array
from .wavio import wav_read, wav_write

__all__ = ['Chip', 'chip', 'dechip', 'stack_chips', 'magnitude_db', 'write_csv', 'write_pgm', 'apply_crm',
           'identity_mask', 'oracle_mask', 'SmootherState', 'optimal_alpha', 'optimal_smoothing', 'smoothed_input',
           'de_emphasis', 'istft', 'istft_array', 'n_frames', 'pre_emphasis', 'stft', 'stft_array', 'wav_read',
           'wav_write']
