import unittest
import csv
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../src'))

from cxverb.config import DiscriminatorConfig, GeneratorConfig, SimConfig, StftConfig, TrainConfig
from cxverb.cxcore import CxTensor
from cxverb.errors import ArgumentError, DataError, NonFiniteLossError
from cxverb.gan import (BatchLoader, ChipDataset, Discriminator, Generator, discriminator_step, evaluate_loss,
                        generator_step, make_batch, prepare_utterance, pretrain_generator, train_gan)
from cxverb.gan.optim import Adam
from cxverb.gan.training import GAN_COLUMNS, PRETRAIN_COLUMNS
from cxverb.simulate import generate_rir, reverberate_and_mix, synthetic_utterance

# Small frontend so that 33 bins and 16-frame chips keep every network tiny
STFT = StftConfig(n_fft=64, win_length=64, hop=16)
CHIP_FRAMES = 16
GENERATOR = GeneratorConfig(chip_frames=CHIP_FRAMES, n_bins=33)


def make_dataset(n_utterances=2, seconds=0.1, seed=40):
    sim = SimConfig(t60_min=0.2, t60_max=0.4, rir_seconds=0.4)
    chips = []
    for i in range(n_utterances):
        rng = np.random.default_rng(seed + i)
        source = synthetic_utterance(seconds, 16000, rng)
        y, x = reverberate_and_mix(source, generate_rir(sim, 0.3, rng), 'white', 20.0, rng)
        chips.extend(prepare_utterance(y, x, STFT, CHIP_FRAMES, f"u{i}"))
    return ChipDataset(chips)


def state_arrays(module):
    return {name: (t.re.copy(), t.im.copy()) for name, t in module.state_dict().items()}


class TestChipDataset(unittest.TestCase):

    def test_prepare_utterance(self):
        """Test that the three blocks of every chip line up."""
        dataset = make_dataset(1)

        # 0.1 s at hop 16 gives 101 frames: 7 chips of 16
        self.assertEqual(len(dataset), 7)
        self.assertEqual(dataset.utterance_ids, ['u0'])
        for c in dataset.chips:
            self.assertEqual(c.inputs.data.shape, (1, CHIP_FRAMES, 33))
            self.assertEqual(c.inputs.offset, c.target.offset)
            self.assertEqual(c.mixture.valid_frames, c.target.valid_frames)

    def test_length_mismatch(self):
        """Test that reverberant and target waveforms must have equal length."""
        with self.assertRaises(DataError):
            prepare_utterance(np.ones(1000), np.ones(999), STFT, CHIP_FRAMES)

    def test_split_by_utterance(self):
        """Test that the split holds out whole utterances, floor(fraction * n) of them, deterministically."""
        dataset = make_dataset(4, seconds=0.05)
        train, val = dataset.split(0.5, seed=3)
        train2, val2 = dataset.split(0.5, seed=3)

        self.assertEqual(len(val.utterance_ids), 2)
        self.assertFalse(set(train.utterance_ids) & set(val.utterance_ids))
        self.assertEqual(len(train) + len(val), len(dataset))
        self.assertEqual(val.utterance_ids, val2.utterance_ids)
        self.assertEqual(len(dataset.split(0.2)[1]), 0)
        with self.assertRaises(ArgumentError):
            dataset.split(1.0)


class TestBatchLoader(unittest.TestCase):

    def setUp(self):
        self.dataset = ChipDataset(make_dataset(1).chips[:5])

    def test_trailing_batch_dropped(self):
        """Test that five chips in batches of two give two batches."""
        loader = BatchLoader(self.dataset, 2, seed=1)
        batches = list(loader.epoch(0))

        self.assertEqual(len(loader), 2)
        self.assertEqual(len(batches), 2)
        self.assertEqual(batches[0].inputs.shape, (2, 1, CHIP_FRAMES, 33))
        self.assertEqual(batches[0].size, 2)

    def test_seeded_order(self):
        """Test that the per-epoch order depends only on seed and epoch."""
        a = BatchLoader(self.dataset, 2, seed=5)
        b = BatchLoader(self.dataset, 2, seed=5)

        self.assertEqual(a.order(3), b.order(3))
        for x, y in zip(a.epoch(1), b.epoch(1)):
            np.testing.assert_array_equal(x.target.re, y.target.re)

    def test_unshuffled_order(self):
        """Test sequential batches without shuffling."""
        loader = BatchLoader(self.dataset, 2, shuffle=False)

        self.assertEqual(loader.order(0), [[0, 1], [2, 3]])

    def test_early_exit(self):
        """Test that abandoning an epoch part-way does not hang the producer."""
        loader = BatchLoader(ChipDataset(make_dataset(1).chips), 2, prefetch=1)
        for _ in loader.epoch(0):
            break

    def test_invalid_loaders(self):
        """Test empty datasets, batch size 1 and datasets too small for a batch."""
        with self.assertRaises(DataError):
            BatchLoader(ChipDataset([]), 2)
        with self.assertRaises(ArgumentError):
            BatchLoader(self.dataset, 1)
        with self.assertRaises(DataError):
            list(BatchLoader(ChipDataset(self.dataset.chips[:1]), 2).epoch(0))

    def test_make_batch_dtype(self):
        """Test batch assembly in single precision."""
        batch = make_batch(self.dataset.chips[:3], dtype=np.float32)

        self.assertEqual(batch.mixture.shape, (3, 1, CHIP_FRAMES, 33))
        self.assertEqual(batch.mixture.dtype, np.float32)


class TestPretraining(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dataset = make_dataset(2)
        self.cfg = TrainConfig(batch_size=2, pretrain_steps=3, validation_fraction=0.5, checkpoint_every=2)

    def tearDown(self):
        self.tmp.cleanup()

    def test_short_run(self):
        """Test step count, loss log, checkpoints and the trained-steps buffer."""
        net = Generator(GENERATOR, seed=1)
        result = pretrain_generator(net, self.dataset, self.cfg, self.tmp.name)

        self.assertFalse(result.result_status.is_error)
        self.assertEqual(result.steps, 3)
        self.assertEqual(float(net.trained_steps[0]), 3.0)
        self.assertTrue(os.path.exists(result.checkpoint_path))
        self.assertTrue(os.path.exists(os.path.join(self.tmp.name, 'checkpoints', 'pretrain-step000002.ckpt')))
        with open(result.log_path, newline='') as f:
            rows = list(csv.reader(f))
        self.assertEqual(tuple(rows[0]), PRETRAIN_COLUMNS)
        self.assertEqual(len(rows) - 1, len(result.history))
        self.assertTrue(all(np.isfinite(r['train_loss']) for r in result.history))
        self.assertTrue(np.isfinite(result.history[0]['val_loss']))
        self.assertTrue(net.training)

    def test_without_validation_split(self):
        """Test that an empty validation split logs NaN validation loss."""
        cfg = self.cfg.model_copy(update={'validation_fraction': 0.0, 'pretrain_steps': 2})
        result = pretrain_generator(Generator(GENERATOR, seed=2), self.dataset, cfg, self.tmp.name)

        self.assertTrue(np.isnan(result.history[-1]['val_loss']))

    def test_evaluate_loss(self):
        """Test the evaluation loss and its behaviour on a dataset too small for a batch."""
        net = Generator(GENERATOR, seed=3)

        self.assertGreater(evaluate_loss(net, self.dataset, self.cfg), 0.0)
        self.assertIsNone(evaluate_loss(net, ChipDataset(self.dataset.chips[:1]), self.cfg))
        self.assertTrue(net.training)

    def test_non_finite_loss(self):
        """Test that a NaN target aborts with NonFiniteLossError at the first step."""
        chips = []
        for c in self.dataset.chips:
            nan = CxTensor(np.full(c.target.data.shape, np.nan))
            chips.append(replace(c, target=c.target.with_data(nan)))
        cfg = self.cfg.model_copy(update={'validation_fraction': 0.0})

        with self.assertRaises(NonFiniteLossError) as context:
            pretrain_generator(Generator(GENERATOR, seed=4), ChipDataset(chips), cfg, self.tmp.name)
        self.assertEqual(context.exception.step, 0)
        self.assertIn('L_rimag', context.exception.losses)

    def test_empty_dataset(self):
        """Test that pretraining on nothing raises DataError."""
        with self.assertRaises(DataError):
            pretrain_generator(Generator(GENERATOR), ChipDataset([]), self.cfg, self.tmp.name)


class TestAdversarialTraining(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dataset = make_dataset(1)
        self.cfg = TrainConfig(batch_size=2, gan_steps=2, checkpoint_every=100)
        self.batch = make_batch(self.dataset.chips[:2])

    def tearDown(self):
        self.tmp.cleanup()

    def test_discriminator_step_leaves_generator(self):
        """Test that a D step changes the discriminator but not the generator."""
        gen = Generator(GENERATOR, seed=1)
        disc = Discriminator(DiscriminatorConfig.toy(), seed=2)
        gen_before, disc_before = state_arrays(gen), state_arrays(disc)
        stats = discriminator_step(gen, disc, self.batch, Adam(disc.parameters(), 1e-3))

        for name, (re, im) in state_arrays(gen).items():
            np.testing.assert_array_equal(re, gen_before[name][0])
            np.testing.assert_array_equal(im, gen_before[name][1])
        self.assertTrue(any(not np.array_equal(re, disc_before[name][0])
                            for name, (re, _) in state_arrays(disc).items()))
        self.assertTrue(0.0 <= stats['patch_accuracy'] <= 1.0)

    def test_generator_step_leaves_discriminator(self):
        """Test that a G step leaves every discriminator parameter and buffer bitwise unchanged."""
        gen = Generator(GENERATOR, seed=1)
        disc = Discriminator(DiscriminatorConfig.toy(), seed=2)
        before = state_arrays(disc)
        stats = generator_step(gen, disc, self.batch, Adam(gen.parameters(), 1e-3), self.cfg)

        for name, (re, im) in state_arrays(disc).items():
            np.testing.assert_array_equal(re, before[name][0])
            np.testing.assert_array_equal(im, before[name][1])
        self.assertTrue(disc.training)
        self.assertGreaterEqual(stats['L_feat'], 0.0)
        self.assertAlmostEqual(stats['L_Gen'], 0.4 * stats['L_G'] + 0.3 * stats['L_rimag'] + 0.3 * stats['L_feat'])

    def test_short_run(self):
        """Test the GAN loss log, final checkpoint and recorded steps."""
        gen = Generator(GENERATOR, seed=1)
        disc = Discriminator(DiscriminatorConfig.toy(), seed=2)
        with self.assertLogs('cxverb.gan.training', level='WARNING'):
            result = train_gan(gen, disc, self.dataset, self.cfg, self.tmp.name)

        self.assertEqual(result.steps, 2)
        self.assertEqual(float(gen.trained_steps[0]), 2.0)
        self.assertTrue(os.path.exists(result.checkpoint_path))
        with open(result.log_path, newline='') as f:
            rows = list(csv.reader(f))
        self.assertEqual(tuple(rows[0]), GAN_COLUMNS)
        self.assertEqual(len(rows), 3)
        for row in result.history:
            self.assertTrue(all(np.isfinite(row[k]) for k in GAN_COLUMNS[1:]))

    def test_without_feature_loss(self):
        """Test that disabling the feature term logs zero feature loss."""
        cfg = self.cfg.model_copy(update={'use_feature_loss': False, 'alpha': 0.5, 'beta': 0.0, 'gan_steps': 1})
        gen = Generator(GENERATOR, seed=1)
        gen.trained_steps = np.array([10.0])
        result = train_gan(gen, Discriminator(DiscriminatorConfig.toy(), seed=2), self.dataset, cfg, self.tmp.name)

        self.assertEqual(result.history[0]['L_feat'], 0.0)


if __name__ == '__main__':
    unittest.main()
