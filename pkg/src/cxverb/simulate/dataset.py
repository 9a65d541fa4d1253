"""
Simulated reverberant datasets.  Each (source, condition) item gets its own seed derived from the run seed and the
item index, so items can be rendered in any order or in parallel and still reproduce bit for bit.

Manifest: JSON lines, one UtteranceRecord per line, with WAV paths relative to the manifest's directory.
"""
from concurrent.futures import ThreadPoolExecutor
import logging
import os
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from cxverb.config.config import SimConfig
from cxverb.dsp.wavio import wav_read, wav_write
from cxverb.errors import DataError
from cxverb.simulate.mix import reverberate_and_mix
from cxverb.simulate.rir import generate_rir
from cxverb.simulate.sources import synthetic_utterance

MANIFEST_NAME = "manifest.jsonl"
HEADROOM = 0.9
_SOURCE_STREAM = 1
_ITEM_STREAM = 2


class UtteranceRecord(BaseModel):
    """One manifest row."""
    id: str
    reverb_path: str
    target_path: str
    t60_s: float
    snr_db: Optional[float]
    noise_kind: str
    seed: int


def item_seed(run_seed: int, stream: int, index: int) -> int:
    return int(np.random.SeedSequence([run_seed, stream, index]).generate_state(1)[0])


def synthetic_sources(cfg: SimConfig, count: int) -> List[Tuple[str, np.ndarray]]:
    """count speech-like utterances of cfg.utterance_seconds each, named syn0000, syn0001, ..."""
    return [(f"syn{i:04d}", synthetic_utterance(cfg.utterance_seconds, cfg.sample_rate,
                                                np.random.default_rng(item_seed(cfg.seed, _SOURCE_STREAM, i))))
            for i in range(count)]


def load_sources(paths: Sequence[str], rate: int) -> List[Tuple[str, np.ndarray]]:
    return [(os.path.splitext(os.path.basename(p))[0], wav_read(p, rate)[0]) for p in paths]


def render_item(cfg: SimConfig, out_dir: str, index: int, source_id: str, source: np.ndarray,
                condition: int) -> UtteranceRecord:
    """Simulate one condition of one source and write its reverberant and target WAVs under out_dir."""
    seed = item_seed(cfg.seed, _ITEM_STREAM, index)
    rng = np.random.default_rng(seed)
    t60 = float(rng.uniform(cfg.t60_min, cfg.t60_max))
    noise_kind = cfg.noise_kinds[int(rng.integers(len(cfg.noise_kinds)))]
    h = generate_rir(cfg, t60, rng)
    early = int(round(cfg.early_ms * cfg.sample_rate / 1000.0)) if cfg.early_target else 0
    y, x = reverberate_and_mix(source, h, noise_kind, cfg.snr_db, rng, cfg.sample_rate, cfg.lowfreq_cutoff, early)

    peak = max(np.max(np.abs(y)), np.max(np.abs(x)))
    gain = min(1.0, HEADROOM / peak)
    utterance_id = f"{source_id}_c{condition:02d}"
    reverb_path = os.path.join(out_dir, 'reverb', f"{utterance_id}.wav")
    target_path = os.path.join(out_dir, 'clean', f"{utterance_id}.wav")
    wav_write(reverb_path, y * gain, cfg.sample_rate)
    wav_write(target_path, x * gain, cfg.sample_rate)
    snr_db = None if noise_kind == 'none' else cfg.snr_db
    return UtteranceRecord(id=utterance_id, reverb_path=reverb_path, target_path=target_path, t60_s=t60,
                           snr_db=snr_db, noise_kind=noise_kind, seed=seed)


def build_dataset(source_wavs: Optional[Sequence[str]], cfg: SimConfig, out_dir: str,
                  n_conditions: Optional[int] = None, n_synthetic: int = 0,
                  workers: Optional[int] = None) -> List[UtteranceRecord]:
    """
    Simulate every source under n_conditions sampled conditions and write the manifest.

    :param source_wavs: Dry 16 kHz mono sources; may be empty when n_synthetic > 0.
    :param cfg: Simulator settings, including the run seed.
    :param out_dir: Output directory for WAVs and manifest.jsonl.
    :param n_conditions: Conditions per source; defaults to cfg.conditions.
    :param n_synthetic: Speech-like sources to synthesize in addition to source_wavs.
    :param workers: Thread pool size; None uses the executor default.
    :raises DataError: when there is nothing to simulate.
    """
    logger = logging.getLogger(__name__)
    sources = load_sources(source_wavs or [], cfg.sample_rate) + synthetic_sources(cfg, n_synthetic)
    if not sources:
        logger.error("No sources given and no synthetic sources requested")
        raise DataError("build_dataset needs at least one source")
    n_conditions = n_conditions or cfg.conditions
    jobs = [(i * n_conditions + k, sid, wave, k) for i, (sid, wave) in enumerate(sources) for k in range(n_conditions)]
    logger.info("Simulating %d items (%d sources x %d conditions) into %s", len(jobs), len(sources), n_conditions,
                out_dir)
    os.makedirs(out_dir, exist_ok=True)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(lambda job: render_item(cfg, out_dir, *job), jobs))
    write_manifest(os.path.join(out_dir, MANIFEST_NAME), records)
    return records


def write_manifest(path: str, records: Sequence[UtteranceRecord]) -> str:
    base = os.path.dirname(os.path.abspath(path))
    with open(path, 'w') as f:
        for record in records:
            relative = record.model_copy(update={
                'reverb_path': os.path.relpath(os.path.abspath(record.reverb_path), base),
                'target_path': os.path.relpath(os.path.abspath(record.target_path), base),
            })
            f.write(relative.model_dump_json() + "\n")
    logging.getLogger(__name__).info("Wrote manifest %s with %d rows", path, len(records))
    return path


def load_manifest(path: str) -> List[UtteranceRecord]:
    """Manifest rows with WAV paths resolved against the manifest's directory."""
    base = os.path.dirname(os.path.abspath(path))
    records = []
    with open(path, 'r') as f:
        for line in f:
            if not line.strip():
                continue
            record = UtteranceRecord.model_validate_json(line)
            records.append(record.model_copy(update={
                'reverb_path': os.path.normpath(os.path.join(base, record.reverb_path)),
                'target_path': os.path.normpath(os.path.join(base, record.target_path)),
            }))
    if not records:
        raise DataError(f"manifest {path} has no rows")
    return records
