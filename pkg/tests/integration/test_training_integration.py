import unittest
import logging
import os
import sys
import tempfile

import numpy as np

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../src'))

from cxverb.cli.pipeline import Enhancer
from cxverb.config import DiscriminatorConfig, GeneratorConfig, RunConfig, SimConfig, StftConfig, TrainConfig
from cxverb.dsp import wav_read
from cxverb.gan import (ChipDataset, Discriminator, Generator, generator_step, make_batch, pretrain_generator,
                        train_gan)
from cxverb.gan.optim import Adam
from cxverb.metrics import fw_seg_snr
from cxverb.simulate import build_dataset

ACCEPTANCE = os.getenv('CXVERB_ACCEPTANCE') == '1'


def state_arrays(module):
    return {name: (t.re.copy(), t.im.copy()) for name, t in module.state_dict().items()}


class TestPretrainSmokeIntegration(unittest.TestCase):
    """
    Short pretraining run on a small frontend: the reconstruction loss must fall when the generator sees the
    same two chips repeatedly.
    """

    @classmethod
    def setUpClass(cls):
        logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
        cls.tmp = tempfile.TemporaryDirectory()
        cls.stft = StftConfig(n_fft=64, win_length=64, hop=16)
        sim = SimConfig(t60_min=0.3, t60_max=0.6, utterance_seconds=0.5, seed=8)
        records = build_dataset([], sim, os.path.join(cls.tmp.name, 'data'), n_synthetic=1)
        chips = ChipDataset.from_records(records, cls.stft, 16).chips
        # two chips with speech in them
        energy = [float(np.sum(c.target.data.re ** 2 + c.target.data.im ** 2)) for c in chips]
        cls.dataset = ChipDataset([chips[i] for i in np.argsort(energy)[-2:]])

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_loss_falls(self):
        """Test that 25 epochs on one batch bring the loss below 80% of its first value."""
        cfg = TrainConfig(batch_size=2, pretrain_epochs=25, pretrain_lr=5e-3, validation_fraction=0.0)
        net = Generator(GeneratorConfig(chip_frames=16, n_bins=33), seed=0)
        result = pretrain_generator(net, self.dataset, cfg, self.tmp.name)
        losses = [row['train_loss'] for row in result.history]

        self.assertEqual(result.steps, 25)
        self.assertTrue(all(np.isfinite(losses)))
        self.assertLess(min(losses[-5:]), 0.8 * losses[0])


@unittest.skipUnless(ACCEPTANCE, "set CXVERB_ACCEPTANCE=1 to run the toy-preset training acceptance runs")
class TestToyTrainingAcceptance(unittest.TestCase):
    """
    Toy-preset acceptance runs on eight simulated utterances (T60 0.3-0.6 s, SNR 20 dB): 300 pretraining steps
    at batch 4, then 200 adversarial steps from the pretrained checkpoint.  CPU runtime is tens of minutes.

    To run these tests:
        CXVERB_ACCEPTANCE=1 python -m unittest tests.integration.test_training_integration -v
    """

    @classmethod
    def setUpClass(cls):
        logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
        cls.logger = logging.getLogger(__name__)
        cls.tmp = tempfile.TemporaryDirectory()
        cls.config = RunConfig(preset='toy', seed=0, out_dir=cls.tmp.name,
                               sim=SimConfig(t60_min=0.3, t60_max=0.6, snr_db=20.0, utterance_seconds=2.0),
                               train=TrainConfig.toy().model_copy(update={'validation_fraction': 0.0}))
        cls.records = build_dataset([], cls.config.sim, os.path.join(cls.tmp.name, 'data'), n_synthetic=8)
        cls.dataset = ChipDataset.from_records(cls.records, cls.config.stft, cls.config.generator.chip_frames)
        cls.generator = Generator(cls.config.generator, seed=cls.config.seed)
        cls.pretrain = pretrain_generator(cls.generator, cls.dataset, cls.config.train,
                                          os.path.join(cls.tmp.name, 'pretrain'))
        cls.logger.info("Pretraining finished after %d steps", cls.pretrain.steps)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_01_pretraining_overfits(self):
        """Test that the loss falls to 30% of its initial value and fwSegSNR improves by at least 2 dB."""
        losses = [row['train_loss'] for row in self.pretrain.history]
        self.assertEqual(self.pretrain.steps, 300)
        self.assertLessEqual(losses[-1], 0.3 * losses[0])

        enhancer = Enhancer(config=self.config, generator=self.generator)
        before, after = [], []
        for record in self.records:
            y, _ = wav_read(record.reverb_path)
            x, _ = wav_read(record.target_path)
            before.append(fw_seg_snr(x, y))
            after.append(fw_seg_snr(x, enhancer.enhance_waveform(y, utterance_id=record.id)))
        self.generator.train()
        self.logger.info("fwSegSNR reverberant %.3f dB, enhanced %.3f dB", np.mean(before), np.mean(after))
        self.assertGreaterEqual(np.mean(after) - np.mean(before), 2.0)

    def test_02_gan_smoke(self):
        """Test 200 adversarial steps: finite losses, a bitwise frozen discriminator and a stable patch accuracy."""
        disc = Discriminator(DiscriminatorConfig.toy(), seed=self.config.seed + 1)
        result = train_gan(self.generator, disc, self.dataset, self.config.train, os.path.join(self.tmp.name, 'gan'))

        self.assertEqual(result.steps, 200)
        for row in result.history:
            self.assertTrue(all(np.isfinite(row[k]) for k in ('L_D', 'L_G', 'L_rimag', 'L_feat')), row)
        accuracy = float(np.mean([row['patch_accuracy'] for row in result.history[-50:]]))
        self.assertTrue(0.55 < accuracy < 0.95, accuracy)

        before = state_arrays(disc)
        batch = make_batch(self.dataset.chips[:self.config.train.batch_size])
        generator_step(self.generator, disc, batch, Adam(self.generator.parameters(), 1e-4), self.config.train)
        for name, (re, im) in state_arrays(disc).items():
            np.testing.assert_array_equal(re, before[name][0])
            np.testing.assert_array_equal(im, before[name][1])


if __name__ == '__main__':
    unittest.main()
