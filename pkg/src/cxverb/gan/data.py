"""
Training examples and batching.

Every utterance pair goes through the frontend (optional pre-emphasis, STFT, optimal smoothing) and is cut into
chips.  A training chip carries three aligned blocks: the smoothed network input, the raw reverberant spectrogram Y
that the mask multiplies, and the target X.

BatchLoader assembles batches on a single producer thread feeding a bounded queue; with one producer and a seeded
per-epoch shuffle the batch sequence is reproducible.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
import queue
import threading
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from cxverb.config.config import StftConfig
from cxverb.cxcore.tensor import CxTensor
from cxverb.dsp.chips import Chip, chip, stack_chips
from cxverb.dsp.smoothing import SmootherState, optimal_smoothing, smoothed_input
from cxverb.dsp.stft import pre_emphasis, stft
from cxverb.dsp.wavio import wav_read
from cxverb.errors import ArgumentError, DataError
from cxverb.simulate.dataset import UtteranceRecord

MIN_BATCH = 2


@dataclass(frozen=True)
class TrainingChip:
    inputs: Chip
    mixture: Chip
    target: Chip

    @property
    def utterance_id(self) -> str:
        return self.inputs.utterance_id


@dataclass(frozen=True)
class Batch:
    """(B, 1, T, F) tensors: smoothed network input, raw mixture Y and target X."""
    inputs: CxTensor
    mixture: CxTensor
    target: CxTensor

    @property
    def size(self) -> int:
        return self.inputs.shape[0]


def frontend(y: np.ndarray, cfg: StftConfig) -> Tuple[CxTensor, CxTensor]:
    """(smoothed network input, raw spectrogram Y) for a reverberant waveform."""
    if cfg.use_pre_emphasis:
        y = pre_emphasis(y, cfg.pre_emphasis)
    spec = stft(y, cfg)
    power, _ = optimal_smoothing(spec, SmootherState.from_config(cfg))
    return smoothed_input(spec, power), spec


def prepare_utterance(reverb: np.ndarray, target: np.ndarray, cfg: StftConfig, chip_frames: int,
                      utterance_id: str = "") -> List[TrainingChip]:
    if len(reverb) != len(target):
        raise DataError(f"{utterance_id}: reverberant ({len(reverb)}) and target ({len(target)}) lengths differ")
    inputs, mixture = frontend(reverb, cfg)
    x = pre_emphasis(target, cfg.pre_emphasis) if cfg.use_pre_emphasis else target
    clean = stft(x, cfg)
    return [TrainingChip(*parts) for parts in zip(chip(inputs, chip_frames, utterance_id),
                                                 chip(mixture, chip_frames, utterance_id),
                                                 chip(clean, chip_frames, utterance_id))]


class ChipDataset:
    """Ordered collection of training chips from one or more utterances."""

    def __init__(self, chips: Sequence[TrainingChip]) -> None:
        self.chips = list(chips)
        self.logger = logging.getLogger(__name__)

    def __len__(self) -> int:
        return len(self.chips)

    @property
    def utterance_ids(self) -> List[str]:
        return list(dict.fromkeys(c.utterance_id for c in self.chips))

    @classmethod
    def from_records(cls, records: Sequence[UtteranceRecord], cfg: StftConfig, chip_frames: int,
                     workers: Optional[int] = None) -> 'ChipDataset':
        """
        Load and chip every manifest row.

        :raises DataError: when no records are given.
        """
        if not records:
            raise DataError("dataset has no utterances")

        def load(record: UtteranceRecord) -> List[TrainingChip]:
            reverb, _ = wav_read(record.reverb_path, cfg.sample_rate)
            target, _ = wav_read(record.target_path, cfg.sample_rate)
            return prepare_utterance(reverb, target, cfg, chip_frames, record.id)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            chips = [c for per_utterance in pool.map(load, records) for c in per_utterance]
        logging.getLogger(__name__).info("Loaded %d chips from %d utterances", len(chips), len(records))
        return cls(chips)

    def split(self, fraction: float, seed: int = 0) -> Tuple['ChipDataset', 'ChipDataset']:
        """
        Hold out floor(fraction * n_utterances) whole utterances, chosen by seed.

        :return: (training set, validation set); the validation set may be empty.
        """
        if not 0.0 <= fraction < 1.0:
            raise ArgumentError(f"validation fraction must lie in [0, 1), got {fraction}")
        ids = self.utterance_ids
        n_val = int(np.floor(fraction * len(ids)))
        order = np.random.default_rng(seed).permutation(len(ids))
        held_out = {ids[i] for i in order[:n_val]}
        train = ChipDataset([c for c in self.chips if c.utterance_id not in held_out])
        val = ChipDataset([c for c in self.chips if c.utterance_id in held_out])
        self.logger.info("Split %d utterances into %d training / %d validation", len(ids), len(ids) - n_val, n_val)
        return train, val


def make_batch(chips: Sequence[TrainingChip], dtype=np.float64) -> Batch:
    return Batch(stack_chips([c.inputs for c in chips]).astype(dtype),
                 stack_chips([c.mixture for c in chips]).astype(dtype),
                 stack_chips([c.target for c in chips]).astype(dtype))


_END = object()


class BatchLoader:
    """Seeded, shuffled batches of a ChipDataset, produced ahead of the consumer through a bounded queue."""

    def __init__(self, dataset: ChipDataset, batch_size: int, seed: int = 0, prefetch: int = 2,
                 shuffle: bool = True, dtype=np.float64) -> None:
        """
        :param batch_size: Chips per batch; a trailing batch smaller than 2 is dropped.
        :param seed: Base seed of the per-epoch shuffles.
        :param prefetch: Queue capacity in batches.
        :raises DataError: for an empty dataset.
        """
        if len(dataset) == 0:
            raise DataError("cannot batch an empty dataset")
        if batch_size < MIN_BATCH:
            raise ArgumentError(f"batch size must be at least {MIN_BATCH}, got {batch_size}")
        self.dataset = dataset
        self.batch_size = batch_size
        self.seed = seed
        self.prefetch = prefetch
        self.shuffle = shuffle
        self.dtype = dtype
        self.logger = logging.getLogger(__name__)

    def order(self, epoch: int) -> List[List[int]]:
        """Chip indices of every batch in an epoch."""
        n = len(self.dataset)
        if self.shuffle:
            indices = np.random.default_rng(np.random.SeedSequence([self.seed, epoch])).permutation(n)
        else:
            indices = np.arange(n)
        groups = [indices[i:i + self.batch_size].tolist() for i in range(0, n, self.batch_size)]
        if groups and len(groups[-1]) < MIN_BATCH:
            self.logger.debug("Dropping trailing batch of %d chip(s) in epoch %d", len(groups[-1]), epoch)
            groups.pop()
        return groups

    def __len__(self) -> int:
        return len(self.order(0))

    def epoch(self, epoch: int) -> Iterator[Batch]:
        groups = self.order(epoch)
        if not groups:
            raise DataError(f"dataset of {len(self.dataset)} chip(s) cannot fill a batch of {MIN_BATCH}")
        slots: queue.Queue = queue.Queue(maxsize=self.prefetch)
        stop = threading.Event()

        def produce() -> None:
            try:
                for group in groups:
                    if stop.is_set():
                        return
                    slots.put(make_batch([self.dataset.chips[i] for i in group], self.dtype))
                slots.put(_END)
            except Exception as e:  # surfaced to the consumer
                slots.put(e)

        producer = threading.Thread(target=produce, name=f"batch-producer-{epoch}", daemon=True)
        producer.start()
        try:
            while True:
                item = slots.get()
                if item is _END:
                    return
                if isinstance(item, Exception):
                    raise item
                yield item
        finally:
            stop.set()
            while producer.is_alive():
                try:
                    slots.get_nowait()
                except queue.Empty:
                    producer.join(timeout=0.01)
