import unittest
import os
import struct
import sys
import tempfile

import numpy as np

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../src'))

from cxverb.config import DiscriminatorConfig, GeneratorConfig
from cxverb.cxcore import CxTensor, Tape, cx_magnitude, sum_all
from cxverb.cxlayers import Parameter
from cxverb.errors import ArgumentError, FormatError, ShapeError
from cxverb.gan import (MAGIC, Adam, AdamState, Discriminator, Generator, PlateauScheduler, adam_step,
                        load_checkpoint, load_tensors, save_checkpoint, save_tensors)

SMALL_GENERATOR = GeneratorConfig(chip_frames=8, n_bins=33)


class TestAdam(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(14)
        self.param = Parameter(CxTensor(rng.standard_normal((3, 2)), rng.standard_normal((3, 2))))
        self.state = AdamState.zeros_like([self.param])

    def test_zero_gradient_leaves_parameters(self):
        """Test that a zero gradient without weight decay changes nothing."""
        before = self.param.data.to_complex()
        adam_step([self.param], [CxTensor.zeros((3, 2))], self.state, lr=1e-3)

        np.testing.assert_array_equal(self.param.data.to_complex(), before)
        self.assertEqual(self.state.step, 1)

    def test_first_step_moves_by_learning_rate(self):
        """Test that the bias-corrected first step moves every entry by about lr against the gradient sign."""
        before = self.param.data.to_complex()
        grad = CxTensor(np.full((3, 2), 0.3), np.full((3, 2), -2.0))
        adam_step([self.param], [grad], self.state, lr=1e-2)
        delta = self.param.data.to_complex() - before

        np.testing.assert_allclose(delta.real, -1e-2, rtol=1e-6)
        np.testing.assert_allclose(delta.imag, 1e-2, rtol=1e-6)

    def test_decoupled_weight_decay(self):
        """Test that weight decay shrinks parameters even with a zero gradient."""
        before = self.param.data.to_complex()
        adam_step([self.param], [CxTensor.zeros((3, 2))], self.state, lr=0.1, weight_decay=0.5)

        np.testing.assert_allclose(self.param.data.to_complex(), 0.95 * before)

    def test_shape_mismatch(self):
        """Test that a gradient of the wrong shape raises ShapeError."""
        with self.assertRaises(ShapeError):
            adam_step([self.param], [CxTensor.zeros((2, 3))], self.state, lr=1e-3)

    def test_step_counter_increments(self):
        """Test the shared step counter."""
        for _ in range(3):
            adam_step([self.param], [CxTensor.ones((3, 2))], self.state, lr=1e-3)

        self.assertEqual(self.state.step, 3)

    def test_optimizer_reduces_loss(self):
        """Test that Adam steps on tape gradients reduce a simple loss."""
        optimizer = Adam([self.param], lr=0.05)
        losses = []
        for _ in range(20):
            tape = Tape()
            with tape:
                loss = sum_all(cx_magnitude(self.param.data))
            losses.append(loss.item())
            optimizer.step(tape.backward(loss))

        self.assertLess(losses[-1], losses[0])


class TestPlateauScheduler(unittest.TestCase):

    def setUp(self):
        self.optimizer = Adam([Parameter(CxTensor.ones((2,)))], lr=1e-3)

    def test_reduces_after_two_stagnant_epochs(self):
        """Test that the rate is divided by 10 after two epochs without improvement."""
        scheduler = PlateauScheduler(self.optimizer, patience=2, factor=0.1)

        self.assertFalse(scheduler.step(1.0))
        self.assertFalse(scheduler.step(1.0))
        self.assertTrue(scheduler.step(1.2))
        self.assertAlmostEqual(self.optimizer.lr, 1e-4)

    def test_improvement_resets(self):
        """Test that a new best loss resets the stagnation count."""
        scheduler = PlateauScheduler(self.optimizer, patience=2, factor=0.1)
        for loss in (1.0, 1.1, 0.9, 1.0, 0.8):
            self.assertFalse(scheduler.step(loss))

        self.assertAlmostEqual(self.optimizer.lr, 1e-3)
        self.assertEqual(scheduler.reductions, 0)


class TestCheckpoint(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, 'ckpt', 'net.ckpt')

    def tearDown(self):
        self.tmp.cleanup()

    def test_tensor_file_layout(self):
        """Test the magic, record header and plane order of a single record."""
        tensor = CxTensor(np.array([[1.0, 2.0]], dtype=np.float32), np.array([[3.0, 4.0]], dtype=np.float32))
        save_tensors(self.path, {'w': tensor})
        with open(self.path, 'rb') as f:
            data = f.read()

        self.assertEqual(data[:8], MAGIC)
        self.assertEqual(struct.unpack('<I', data[8:12])[0], 1)
        self.assertEqual(data[12:13], b'w')
        self.assertEqual(struct.unpack('<IIII', data[13:29]), (0, 2, 1, 2))
        np.testing.assert_array_equal(np.frombuffer(data[29:], dtype='<f4'), [1.0, 2.0, 3.0, 4.0])

    def test_tensors_round_trip(self):
        """Test that names, dtypes and values survive a save and load."""
        tensors = {'a': CxTensor.from_complex(np.array([1 + 2j, -3j])),
                   'b.c': CxTensor(np.ones((2, 1, 3), dtype=np.float32)),
                   'scalar': CxTensor.real(4.0)}
        loaded = load_tensors(save_tensors(self.path, tensors))

        self.assertEqual(sorted(loaded), sorted(tensors))
        self.assertEqual(loaded['b.c'].dtype, np.float32)
        np.testing.assert_array_equal(loaded['a'].to_complex(), tensors['a'].to_complex())
        self.assertEqual(loaded['scalar'].item(), 4.0)

    def test_bad_magic(self):
        """Test that a file without the magic raises FormatError."""
        os.makedirs(os.path.dirname(self.path))
        with open(self.path, 'wb') as f:
            f.write(b'NOTACKPT' + b'\x00' * 16)

        with self.assertRaises(FormatError):
            load_tensors(self.path)

    def test_truncated_record(self):
        """Test that a truncated record raises FormatError."""
        save_tensors(self.path, {'w': CxTensor.ones((4, 4))})
        with open(self.path, 'rb') as f:
            data = f.read()
        with open(self.path, 'wb') as f:
            f.write(data[:-10])

        with self.assertRaises(FormatError):
            load_tensors(self.path)

    def test_networks_round_trip(self):
        """Test that generator and discriminator parameters and buffers are restored exactly."""
        gen = Generator(SMALL_GENERATOR, seed=1)
        disc = Discriminator(DiscriminatorConfig.toy(), seed=2)
        gen.trained_steps = np.array([42.0])
        save_checkpoint(self.path, gen, disc)

        gen2 = Generator(SMALL_GENERATOR, seed=7)
        disc2 = Discriminator(DiscriminatorConfig.toy(), seed=8)
        load_checkpoint(self.path, gen2, disc2)

        for net, restored in ((gen, gen2), (disc, disc2)):
            state, state2 = net.state_dict(), restored.state_dict()
            for name in state:
                np.testing.assert_array_equal(state[name].re, state2[name].re)
                np.testing.assert_array_equal(state[name].im, state2[name].im)
        self.assertEqual(float(gen2.trained_steps[0]), 42.0)

    def test_generator_only_checkpoint(self):
        """Test that a generator-only checkpoint leaves the discriminator untouched."""
        gen = Generator(SMALL_GENERATOR, seed=1)
        save_checkpoint(self.path, gen)
        disc = Discriminator(DiscriminatorConfig.toy(), seed=2)
        before = disc.convs[0].weight.data.re.copy()

        load_checkpoint(self.path, Generator(SMALL_GENERATOR, seed=3), disc)
        np.testing.assert_array_equal(disc.convs[0].weight.data.re, before)

    def test_mismatched_architecture(self):
        """Test that loading into a different architecture fails."""
        save_checkpoint(self.path, Generator(SMALL_GENERATOR, seed=1))

        with self.assertRaises(ArgumentError):
            load_checkpoint(self.path, Generator(GeneratorConfig(chip_frames=8, n_bins=33, sb_counts=(1, 1))))


if __name__ == '__main__':
    unittest.main()
