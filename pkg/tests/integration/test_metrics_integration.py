import unittest
import logging
import os
import sys

import numpy as np

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../src'))

from cxverb.config import SimConfig
from cxverb.metrics import compute_metrics
from cxverb.simulate import generate_rir, reverberate_and_mix, synthetic_utterance

T60_LEVELS = (0.2, 0.35, 0.5, 0.65, 0.8)
N_UTTERANCES = 10
# Allowed backslide between neighbouring levels for the LPC and modulation measures, relative to the level mean
SLACK = 0.02


class TestMetricSweepIntegration(unittest.TestCase):
    """
    Metric behaviour over a reverberation-time sweep on a fixed suite of ten speech-like utterances.  Each level
    reuses the same tail noise so only the decay rate and the direct-to-reverberant ratio change.

    To run these tests:
        python -m unittest tests.integration.test_metrics_integration -v
    """

    @classmethod
    def setUpClass(cls):
        logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
        cls.logger = logging.getLogger(__name__)
        sim = SimConfig(t60_min=0.2, t60_max=0.8, rir_seconds=1.0)
        sources = [synthetic_utterance(1.5, 16000, np.random.default_rng(100 + i)) for i in range(N_UTTERANCES)]
        cls.means = {}
        cls.reflexive = [compute_metrics(s, s) for s in sources]
        for t60 in T60_LEVELS:
            rows = []
            for i, s in enumerate(sources):
                h = generate_rir(sim, t60, np.random.default_rng(200 + i))
                y, x = reverberate_and_mix(s, h, 'none')
                rows.append(compute_metrics(x, y))
            cls.means[t60] = {name: float(np.mean([getattr(r, name) for r in rows]))
                              for name in ('fwsegsnr_db', 'cd', 'llr', 'srmr')}
            cls.logger.info("T60 %.2f s: %s", t60, cls.means[t60])

    def _series(self, name):
        return [self.means[t60][name] for t60 in T60_LEVELS]

    def test_fwsegsnr_non_increasing(self):
        """Test that fwSegSNR falls with every T60 step."""
        series = self._series('fwsegsnr_db')

        self.assertTrue(all(b <= a for a, b in zip(series, series[1:])), series)

    def test_lpc_measures_non_decreasing(self):
        """Test that cepstral distance and LLR grow with T60."""
        for name in ('cd', 'llr'):
            series = self._series(name)
            self.assertTrue(all(b >= a - SLACK * abs(a) for a, b in zip(series, series[1:])), (name, series))
            self.assertGreater(series[-1], series[0], name)

    def test_srmr_non_increasing(self):
        """Test that SRMR-lite falls with T60."""
        series = self._series('srmr')

        self.assertTrue(all(b <= a + SLACK * abs(a) for a, b in zip(series, series[1:])), series)
        self.assertLess(series[-1], series[0])

    def test_reflexive_ideals(self):
        """Test exact ideal values for identical pairs."""
        for row in self.reflexive:
            self.assertEqual((row.fwsegsnr_db, row.cd, row.llr), (35.0, 0.0, 0.0))


if __name__ == '__main__':
    unittest.main()
