"""Per-utterance metric reports over a set of (reference, degraded) WAV pairs."""
from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import asdict, dataclass
import logging
import os
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from cxverb.dsp.wavio import wav_read
from cxverb.errors import DataError
from cxverb.metrics.fwsegsnr import fw_seg_snr
from cxverb.metrics.lpc import cepstral_distance, llr
from cxverb.metrics.srmr import srmr_lite
from cxverb.result import ResultBase

METRIC_FIELDS = ('fwsegsnr_db', 'cd', 'llr', 'srmr')


class EvaluationPair(NamedTuple):
    utterance_id: str
    signal: str
    reference_path: str
    degraded_path: str


@dataclass
class UtteranceMetrics:
    utterance_id: str
    signal: str
    fwsegsnr_db: float
    cd: float
    llr: float
    srmr: float


def compute_metrics(ref: np.ndarray, deg: np.ndarray, rate: int = 16000, utterance_id: str = "",
                    signal: str = "") -> UtteranceMetrics:
    return UtteranceMetrics(utterance_id, signal, fw_seg_snr(ref, deg, rate), cepstral_distance(ref, deg, rate),
                            llr(ref, deg, rate), srmr_lite(deg, rate))


class MetricsReport(ResultBase):
    """
    Metrics for every evaluated pair plus the pairs that failed.  The report is an error when nothing could be
    evaluated.
    """

    def __init__(self, rows: List[UtteranceMetrics], failures: Dict[str, str]) -> None:
        """
        :param rows: One entry per successfully evaluated pair.
        :param failures: Pair label to error message.
        """
        is_error = not rows
        message = "" if rows else f"no pair could be evaluated ({len(failures)} failures)"
        super().__init__(is_error, message)
        self.rows = rows
        self.failures = failures

    @property
    def signals(self) -> List[str]:
        return sorted({row.signal for row in self.rows})

    def means(self) -> Dict[str, Dict[str, float]]:
        """Aggregate mean of each metric per signal label."""
        out = {}
        for signal in self.signals:
            selected = [row for row in self.rows if row.signal == signal]
            out[signal] = {name: float(np.mean([getattr(r, name) for r in selected])) for name in METRIC_FIELDS}
            out[signal]['count'] = len(selected)
        return out

    def format_table(self) -> str:
        header = f"{'signal':<12}{'count':>7}{'fwSegSNR':>11}{'CD':>9}{'LLR':>9}{'SRMR-lite':>11}"
        lines = [header, '-' * len(header)]
        for signal, m in self.means().items():
            lines.append(f"{signal:<12}{m['count']:>7d}{m['fwsegsnr_db']:>11.3f}{m['cd']:>9.3f}{m['llr']:>9.3f}"
                         f"{m['srmr']:>11.3f}")
        if self.failures:
            lines.append(f"{len(self.failures)} pair(s) failed")
        return "\n".join(lines)


def evaluate_pairs(pairs: Sequence[EvaluationPair], rate: int = 16000,
                   workers: Optional[int] = None) -> MetricsReport:
    """
    Compute all metrics for each pair in parallel.  Unreadable or unusable pairs are reported, not raised.

    :param pairs: (id, signal label, reference WAV, degraded WAV) tuples.
    :param workers: Thread pool size; None uses the executor default.
    """
    logger = logging.getLogger(__name__)

    def evaluate(pair: EvaluationPair):
        try:
            ref, _ = wav_read(pair.reference_path, rate)
            deg, _ = wav_read(pair.degraded_path, rate)
            n = min(len(ref), len(deg))
            return compute_metrics(ref[:n], deg[:n], rate, pair.utterance_id, pair.signal)
        except (DataError, OSError) as e:
            logger.warning("Could not evaluate %s/%s: %s", pair.utterance_id, pair.signal, e)
            return f"{pair.utterance_id}/{pair.signal}", str(e)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(evaluate, pairs))
    rows = [r for r in results if isinstance(r, UtteranceMetrics)]
    failures = dict(r for r in results if not isinstance(r, UtteranceMetrics))
    logger.info("Evaluated %d of %d pairs", len(rows), len(pairs))
    return MetricsReport(rows, failures)


def write_report_csv(path: str, report: MetricsReport) -> str:
    """One row per utterance and signal, then one 'mean' row per signal."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    columns = ['utterance_id', 'signal', *METRIC_FIELDS]
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in report.rows:
            values = asdict(row)
            writer.writerow([values[c] if c in ('utterance_id', 'signal') else f"{values[c]:.6f}" for c in columns])
        for signal, m in report.means().items():
            writer.writerow(['mean', signal, *(f"{m[name]:.6f}" for name in METRIC_FIELDS)])
    logging.getLogger(__name__).info("Wrote metrics report %s", path)
    return path
