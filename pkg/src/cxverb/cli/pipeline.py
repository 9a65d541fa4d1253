"""
Enhancement pipeline: pre-emphasis -> STFT -> optimal smoothing -> chips -> mask estimator -> CRM on the raw Y ->
dechip -> iSTFT -> de-emphasis.

A mask estimator maps a batch of chips to complex masks of the same shape.  The trained generator is the normal
estimator; the identity and oracle estimators exercise the surrounding signal path.
"""
from concurrent.futures import ThreadPoolExecutor
import logging
import os
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from cxverb.config import RunConfig, load_config
from cxverb.config.config import StftConfig
from cxverb.cxcore.tape import no_record
from cxverb.cxcore.tensor import CxTensor
from cxverb.dsp.chips import Chip, chip, dechip, stack_chips
from cxverb.dsp.masking import apply_crm, identity_mask, oracle_mask
from cxverb.dsp.stft import de_emphasis, istft, pre_emphasis, stft
from cxverb.dsp.wavio import wav_read, wav_write
from cxverb.errors import ArgumentError, DataError
from cxverb.gan.checkpoint import load_checkpoint
from cxverb.gan.data import frontend
from cxverb.gan.generator import Generator
from cxverb.result import ResultBase

MaskEstimator = Callable[[CxTensor, CxTensor, Sequence[Chip]], CxTensor]


def identity_estimator(inputs: CxTensor, mixture: CxTensor, chips: Sequence[Chip]) -> CxTensor:
    """M = 1 everywhere."""
    return identity_mask(mixture.shape)


class GeneratorEstimator:
    """Masks from a generator run in evaluation mode without recording."""

    def __init__(self, generator: Generator) -> None:
        self.generator = generator.eval()

    def __call__(self, inputs: CxTensor, mixture: CxTensor, chips: Sequence[Chip]) -> CxTensor:
        with no_record():
            return self.generator(inputs.astype(self.generator.parameters()[0].data.dtype)).astype(np.float64)


class OracleEstimator:
    """M = X / Y from the clean target, chipped like the mixture."""

    def __init__(self, target: np.ndarray, cfg: StftConfig, chip_frames: int) -> None:
        x = pre_emphasis(target, cfg.pre_emphasis) if cfg.use_pre_emphasis else target
        self.targets: Dict[int, Chip] = {c.offset: c for c in chip(stft(x, cfg), chip_frames)}

    def __call__(self, inputs: CxTensor, mixture: CxTensor, chips: Sequence[Chip]) -> CxTensor:
        target = stack_chips([self.targets[c.offset] for c in chips])
        if target.shape != mixture.shape:
            raise DataError(f"oracle target chips {target.shape} do not match mixture chips {mixture.shape}")
        return oracle_mask(target, mixture)


class EnhanceResult(ResultBase):
    """Written outputs of a batch of enhancement jobs, plus the jobs that failed."""

    def __init__(self, outputs: Dict[str, str], failures: Dict[str, str]) -> None:
        """
        :param outputs: Utterance id to enhanced WAV path.
        :param failures: Utterance id to error message.
        """
        message = f"{len(failures)} file(s) failed" if failures else ""
        super().__init__(bool(failures), message)
        self.outputs = outputs
        self.failures = failures


class Enhancer:
    """
    Dereverberate waveforms with a mask estimator.  The generator comes from an explicit object, a checkpoint, or
    is replaced by the identity mask for debugging.
    """

    def __init__(self,
                 config: Optional[RunConfig] = None,
                 config_file: Optional[str] = None,
                 generator: Optional[Generator] = None,
                 checkpoint: Optional[str] = None,
                 estimator: Optional[MaskEstimator] = None,
                 identity: bool = False) -> None:
        """
        :param config: Resolved configuration; loaded from config_file or the standard locations when omitted.
        :param config_file: Configuration file to load when config is omitted.
        :param generator: Trained generator.
        :param checkpoint: Checkpoint to restore a generator from when generator is omitted.
        :param estimator: Explicit mask estimator; takes precedence over generator and checkpoint.
        :param identity: Use M = 1 (debug path).
        """
        self.logger = logging.getLogger(__name__)
        self.config = config or load_config(config_file=config_file)
        self.stft_cfg = self.config.stft
        self.chip_frames = self.config.generator.chip_frames
        self.batch_size = self.config.train.batch_size

        if estimator is not None:
            self.estimator = estimator
        elif identity:
            self.logger.info("Using the identity mask")
            self.estimator = identity_estimator
        else:
            if generator is None:
                if checkpoint is None:
                    raise ArgumentError("Enhancer needs a generator, a checkpoint, an estimator or identity=True")
                generator = Generator(self.config.generator, seed=self.config.seed)
                load_checkpoint(checkpoint, generator)
                generator.astype(self.config.numpy_dtype)
                self.logger.info("Restored generator from %s", checkpoint)
            self.estimator = GeneratorEstimator(generator)

    def enhance_waveform(self, y: np.ndarray, estimator: Optional[MaskEstimator] = None,
                         utterance_id: str = "") -> np.ndarray:
        """Enhanced waveform with the length of y."""
        estimator = estimator or self.estimator
        inputs, mixture = frontend(y, self.stft_cfg)
        input_chips = chip(inputs, self.chip_frames, utterance_id)
        mixture_chips = chip(mixture, self.chip_frames, utterance_id)
        enhanced: List[Chip] = []
        for start in range(0, len(mixture_chips), self.batch_size):
            group = mixture_chips[start:start + self.batch_size]
            batch_y = stack_chips(group)
            mask = estimator(stack_chips(input_chips[start:start + self.batch_size]), batch_y, group)
            with no_record():
                x_hat = apply_crm(batch_y, mask)
            enhanced.extend(c.with_data(CxTensor(x_hat.re[i], x_hat.im[i])) for i, c in enumerate(group))
        waveform = istft(dechip(enhanced), self.stft_cfg, length=len(y))
        if self.stft_cfg.use_pre_emphasis:
            waveform = de_emphasis(waveform, self.stft_cfg.pre_emphasis)
        self.logger.debug("Enhanced %s: %d samples in %d chips", utterance_id or "waveform", len(y), len(enhanced))
        return waveform

    def enhance_file(self, in_path: str, out_path: str, estimator: Optional[MaskEstimator] = None) -> str:
        """Read, enhance and write one file; the input is never modified."""
        if os.path.abspath(in_path) == os.path.abspath(out_path):
            raise ArgumentError(f"refusing to overwrite input {in_path}")
        y, rate = wav_read(in_path, self.stft_cfg.sample_rate)
        utterance_id = os.path.splitext(os.path.basename(in_path))[0]
        return wav_write(out_path, self.enhance_waveform(y, estimator, utterance_id), rate)

    def enhance_files(self, jobs: Sequence[Tuple[str, str, str]], workers: Optional[int] = None,
                      estimators: Optional[Dict[str, MaskEstimator]] = None) -> EnhanceResult:
        """
        Enhance many files in parallel.

        :param jobs: (utterance id, input WAV, output WAV) triples.
        :param workers: Thread pool size; None uses the executor default.
        :param estimators: Per-utterance estimator overrides (oracle masks).
        """
        estimators = estimators or {}

        def run(job):
            utterance_id, in_path, out_path = job
            try:
                return utterance_id, self.enhance_file(in_path, out_path, estimators.get(utterance_id)), None
            except (DataError, OSError) as e:
                self.logger.error("Enhancement of %s failed: %s", in_path, e)
                return utterance_id, None, str(e)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
        outputs = {uid: path for uid, path, err in results if err is None}
        failures = {uid: err for uid, _, err in results if err is not None}
        self.logger.info("Enhanced %d of %d files", len(outputs), len(jobs))
        return EnhanceResult(outputs, failures)


def oracle_estimators(records, cfg: RunConfig) -> Dict[str, MaskEstimator]:
    """Oracle estimator per manifest row, keyed by utterance id."""
    return {r.id: OracleEstimator(wav_read(r.target_path, cfg.stft.sample_rate)[0], cfg.stft,
                                  cfg.generator.chip_frames) for r in records}
