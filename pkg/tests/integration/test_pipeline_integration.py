import unittest
from unittest.mock import patch
import io
import logging
import os
import sys
import tempfile

import numpy as np

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../src'))

from cxverb.cli.main import EXIT_OK, run
from cxverb.cli.pipeline import Enhancer, OracleEstimator
from cxverb.config import RunConfig, SimConfig
from cxverb.dsp import wav_read
from cxverb.simulate import build_dataset


def snr_db(reference, estimate):
    return 10 * np.log10(np.sum(reference ** 2) / np.sum((reference - estimate) ** 2))


class TestOraclePipelineIntegration(unittest.TestCase):
    """
    End-to-end signal path with oracle masks on simulated utterances.

    To run these tests:
        python -m unittest tests.integration.test_pipeline_integration -v
    """

    @classmethod
    def setUpClass(cls):
        logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
        cls.tmp = tempfile.TemporaryDirectory()
        cls.config = RunConfig(sim=SimConfig(t60_min=0.3, t60_max=0.8, utterance_seconds=1.5, seed=5))
        cls.records = build_dataset([], cls.config.sim, os.path.join(cls.tmp.name, 'data'), n_synthetic=5)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_oracle_mask_reconstructs_five_utterances(self):
        """Test that M = X / Y through chips, CRM, dechip and iSTFT recovers every target at >= 40 dB."""
        enhancer = Enhancer(config=self.config, identity=True)
        for record in self.records:
            y, _ = wav_read(record.reverb_path)
            x, _ = wav_read(record.target_path)
            oracle = OracleEstimator(x, self.config.stft, self.config.generator.chip_frames)
            x_hat = enhancer.enhance_waveform(y, oracle, record.id)

            self.assertGreaterEqual(snr_db(x, x_hat), 40.0, record.id)

    def test_identity_mask_is_transparent(self):
        """Test that the identity mask returns each reverberant input at >= 60 dB."""
        enhancer = Enhancer(config=self.config, identity=True)
        for record in self.records:
            y, _ = wav_read(record.reverb_path)

            self.assertGreaterEqual(snr_db(y, enhancer.enhance_waveform(y)), 60.0, record.id)


class TestDeterminismIntegration(unittest.TestCase):
    """
    Two complete command-line pipelines (simulate, pretrain, train, enhance, evaluate) with the same seed must
    produce identical manifests, loss logs, enhanced audio and metric reports.
    """

    SETTINGS = ['stft.n_fft=64', 'stft.win_length=64', 'stft.hop=16', 'generator.n_bins=33',
                'generator.chip_frames=16', 'train.batch_size=2', 'train.pretrain_steps=2', 'train.gan_steps=2',
                'train.validation_fraction=0.0', 'sim.utterance_seconds=1.0']

    @classmethod
    def setUpClass(cls):
        logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
        cls.tmp = tempfile.TemporaryDirectory()
        cls.config = os.path.join(cls.tmp.name, 'pipeline.cfg')
        with open(cls.config, 'w') as f:
            f.write("preset = toy\nseed = 3\n")
        cls.codes = {name: cls._pipeline(name) for name in ('a', 'b')}

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    @classmethod
    def _pipeline(cls, name):
        out = os.path.join(cls.tmp.name, name)
        common = ['--config', cls.config, '--out', out]
        for setting in cls.SETTINGS:
            common += ['--set', setting]
        steps = [['simulate', '--n', '2'], ['pretrain'], ['train'], ['enhance'], ['evaluate']]
        codes = []
        with patch('sys.stdout', new_callable=io.StringIO):
            for step in steps:
                codes.append(run(step + common))
        return codes

    def _read(self, name, *parts):
        with open(os.path.join(self.tmp.name, name, *parts), 'rb') as f:
            return f.read()

    def test_every_stage_succeeds(self):
        """Test exit code 0 for every stage of both runs."""
        for name, codes in self.codes.items():
            self.assertEqual(codes, [EXIT_OK] * 5, name)

    def test_outputs_are_identical(self):
        """Test bitwise-identical manifests, loss logs, checkpoints, enhanced WAVs and metric reports."""
        files = [('data', 'manifest.jsonl'), ('pretrain', 'pretrain-loss.csv'), ('gan', 'gan-loss.csv'),
                 ('gan', 'gan.ckpt'), ('metrics.csv',)]
        for parts in files:
            self.assertEqual(self._read('a', *parts), self._read('b', *parts), os.path.join(*parts))

        enhanced = sorted(os.listdir(os.path.join(self.tmp.name, 'a', 'enhanced')))
        self.assertEqual(len(enhanced), 2)
        self.assertEqual(enhanced, sorted(os.listdir(os.path.join(self.tmp.name, 'b', 'enhanced'))))
        for name in enhanced:
            self.assertEqual(self._read('a', 'enhanced', name), self._read('b', 'enhanced', name), name)


if __name__ == '__main__':
    unittest.main()
