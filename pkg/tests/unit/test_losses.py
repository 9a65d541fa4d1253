import unittest
import os
import sys

import numpy as np

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../src'))

from cxverb.cxcore import CxTensor
from cxverb.errors import ArgumentError, ConfigError, ShapeError
from cxverb.gan.losses import (check_weights, loss_feature, loss_generator_total, loss_lsgan, loss_mag, loss_ri,
                               loss_ri_mag, patch_accuracy)


class TestReconstructionLosses(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(11)
        self.x = CxTensor(rng.uniform(0.5, 2.0, (2, 1, 4, 6)), np.zeros((2, 1, 4, 6)))

    def test_identical_inputs(self):
        """Test that identical spectrograms give zero loss."""
        self.assertEqual(loss_ri_mag(self.x, self.x).item(), 0.0)

    def test_constant_offset(self):
        """Test a 1+0j offset on a real positive target: L_RI = 1, L_Mag = 1, blend = 1."""
        x_hat = CxTensor(self.x.re + 1.0, self.x.im)

        self.assertAlmostEqual(loss_ri(x_hat, self.x).item(), 1.0, places=12)
        self.assertAlmostEqual(loss_mag(x_hat, self.x).item(), 1.0, places=12)
        self.assertAlmostEqual(loss_ri_mag(x_hat, self.x, 0.3).item(), 1.0, places=12)

    def test_ri_counts_both_planes(self):
        """Test that L_RI sums the mean absolute error of each plane."""
        x_hat = CxTensor(self.x.re + 0.5, self.x.im - 0.25)

        self.assertAlmostEqual(loss_ri(x_hat, self.x).item(), 0.75, places=12)

    def test_magnitude_ignores_phase(self):
        """Test that a pure phase rotation costs nothing in L_Mag."""
        z = self.x.to_complex() * np.exp(1j * 0.7)

        self.assertAlmostEqual(loss_mag(CxTensor.from_complex(z), self.x).item(), 0.0, places=12)

    def test_shape_mismatch(self):
        """Test that mismatched shapes raise ShapeError."""
        with self.assertRaises(ShapeError):
            loss_ri_mag(self.x, CxTensor.zeros((2, 1, 4, 5)))

    def test_lambda_range(self):
        """Test that lambda outside [0, 1] is rejected."""
        with self.assertRaises(ArgumentError):
            loss_ri_mag(self.x, self.x, 1.5)


class TestAdversarialLosses(unittest.TestCase):

    def _scores(self, value, shape=(2, 1, 4, 4)):
        return CxTensor.real(np.full(shape, value))

    def test_half_scores(self):
        """Test that all scores 0.5 give L_D = 0.25 and L_G = 0.125."""
        half = self._scores(0.5)

        self.assertAlmostEqual(loss_lsgan(half, half, 'D').item(), 0.25)
        self.assertAlmostEqual(loss_lsgan(None, half, 'G').item(), 0.125)

    def test_perfect_discriminator(self):
        """Test L_D = 0 for real scores 1 and fake scores 0, and L_G = 0 for fake scores 1."""
        self.assertEqual(loss_lsgan(self._scores(1.0), self._scores(0.0), 'D').item(), 0.0)
        self.assertEqual(loss_lsgan(None, self._scores(1.0), 'G').item(), 0.0)

    def test_losses_non_negative(self):
        """Test that L_D and L_G are non-negative for random scores."""
        rng = np.random.default_rng(12)
        for _ in range(10):
            real = CxTensor.real(rng.uniform(0, 1, (2, 1, 3, 3)))
            fake = CxTensor.real(rng.uniform(0, 1, (2, 1, 3, 3)))
            self.assertGreaterEqual(loss_lsgan(real, fake, 'D').item(), 0.0)
            self.assertGreaterEqual(loss_lsgan(real, fake, 'G').item(), 0.0)

    def test_discriminator_side_needs_real_scores(self):
        """Test that the D side requires real scores and the side name is checked."""
        with self.assertRaises(ArgumentError):
            loss_lsgan(None, self._scores(0.5), 'D')
        with self.assertRaises(ArgumentError):
            loss_lsgan(None, self._scores(0.5), 'X')

    def test_feature_loss_identical(self):
        """Test that identical feature lists give zero."""
        features = [CxTensor.ones((2, 3, 4, 4)) for _ in range(6)]

        self.assertEqual(loss_feature(features, features).item(), 0.0)

    def test_feature_loss_single_layer_offset(self):
        """Test a unit offset in the re plane of one of six layers against a scalar oracle."""
        rng = np.random.default_rng(13)
        real = [CxTensor(rng.standard_normal((2, 2, 3, 3)), rng.standard_normal((2, 2, 3, 3))) for _ in range(6)]
        fake = list(real)
        fake[2] = CxTensor(real[2].re + 1.0, real[2].im)

        # re and im entries averaged jointly: (1 + 0) / 2 per entry, over 6 layers
        self.assertAlmostEqual(loss_feature(real, fake).item(), 1.0 / 12.0, places=12)

    def test_feature_loss_length_mismatch(self):
        """Test that feature lists of different lengths raise ShapeError."""
        with self.assertRaises(ShapeError):
            loss_feature([CxTensor.ones((1, 1, 2, 2))], [])

    def test_patch_accuracy(self):
        """Test the fraction of patches on the correct side of 0.5."""
        real = CxTensor.real(np.array([0.9, 0.8, 0.2, 0.6]))
        fake = CxTensor.real(np.array([0.1, 0.7, 0.3, 0.4]))

        self.assertAlmostEqual(patch_accuracy(real, fake), 6.0 / 8.0)


class TestGeneratorTotal(unittest.TestCase):

    def test_unit_components(self):
        """Test that unit components give 1 with the default weights."""
        self.assertAlmostEqual(loss_generator_total(1.0, 1.0, 1.0).item(), 1.0)

    def test_adversarial_only(self):
        """Test (0.125, 0, 0) with the default weights."""
        self.assertAlmostEqual(loss_generator_total(0.125, 0.0, 0.0).item(), 0.05)

    def test_without_feature_loss(self):
        """Test that disabling the feature loss gives alpha L_G + (1 - alpha) L_RI+Mag."""
        total = loss_generator_total(0.5, 2.0, None, alpha=0.4, beta=0.3, use_feature_loss=False)

        self.assertAlmostEqual(total.item(), 0.4 * 0.5 + 0.6 * 2.0)

    def test_feature_loss_required_when_enabled(self):
        """Test that an enabled feature term needs a value."""
        with self.assertRaises(ArgumentError):
            loss_generator_total(0.5, 2.0, None)

    def test_weight_violation(self):
        """Test that alpha + beta above 1 or negative weights raise ConfigError."""
        with self.assertRaises(ConfigError):
            loss_generator_total(1.0, 1.0, 1.0, alpha=0.8, beta=0.3)
        with self.assertRaises(ConfigError):
            check_weights(-0.1, 0.5)

    def test_zero_only_when_components_zero(self):
        """Test that the convex combination is zero for zero components and positive otherwise."""
        self.assertEqual(loss_generator_total(0.0, 0.0, 0.0).item(), 0.0)
        self.assertGreater(loss_generator_total(0.0, 0.0, 0.1).item(), 0.0)


if __name__ == '__main__':
    unittest.main()
