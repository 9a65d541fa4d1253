import unittest
import os
import sys
import tempfile

import numpy as np

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../src'))

from cxverb.config import SimConfig
from cxverb.dsp import wav_read
from cxverb.errors import ArgumentError, ConfigError, DataError
from cxverb.simulate import (MANIFEST_NAME, build_dataset, drr_for, energy_decay_curve, generate_rir, load_manifest,
                             make_noise, measure_t60, measured_snr, reverberate_and_mix, scale_to_snr,
                             synthetic_utterance)


class TestRir(unittest.TestCase):

    def setUp(self):
        self.cfg = SimConfig(t60_min=0.2, t60_max=0.8, rir_seconds=1.0)

    def test_measured_t60_within_ten_percent(self):
        """Test that Schroeder integration recovers the requested T60 within 10%."""
        for t60 in (0.2, 0.35, 0.5, 0.65, 0.8):
            h = generate_rir(self.cfg, t60, np.random.default_rng(int(t60 * 100)))
            measured = measure_t60(h, self.cfg.sample_rate)

            self.assertLess(abs(measured - t60) / t60, 0.10, f"t60 {t60}: measured {measured:.3f}")

    def test_direct_tap_and_drr(self):
        """Test the unit direct tap and the direct-to-reverberant energy ratio."""
        h = generate_rir(self.cfg, 0.5, np.random.default_rng(1))
        drr = 10 * np.log10(h[0] ** 2 / np.sum(h[1:] ** 2))

        self.assertEqual(h[0], 1.0)
        self.assertEqual(len(h), 16000)
        self.assertAlmostEqual(drr, drr_for(self.cfg, 0.5), places=9)

    def test_drr_falls_with_t60(self):
        """Test that the default DRR drops by 10 log10 of the T60 ratio and a fixed DRR is used as given."""
        self.assertAlmostEqual(drr_for(self.cfg, 0.5), 0.0)
        self.assertAlmostEqual(drr_for(self.cfg, 1.0), -10 * np.log10(2.0))
        self.assertEqual(drr_for(SimConfig(drr_db=6.0), 0.3), 6.0)

    def test_t60_out_of_range(self):
        """Test that a T60 outside the configured range raises ConfigError."""
        with self.assertRaises(ConfigError):
            generate_rir(self.cfg, 1.2)

    def test_decay_curve(self):
        """Test that the decay curve starts at 0 dB and never rises."""
        edc = energy_decay_curve(generate_rir(self.cfg, 0.4, np.random.default_rng(2)))

        self.assertEqual(edc[0], 0.0)
        self.assertTrue(np.all(np.diff(edc) <= 1e-12))

    def test_silent_response(self):
        """Test that an all-zero response raises DataError."""
        with self.assertRaises(DataError):
            measure_t60(np.zeros(100), 16000)


class TestMix(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(23)
        self.s = synthetic_utterance(1.0, 16000, np.random.default_rng(24))

    def test_delta_rir_is_identity(self):
        """Test that a unit impulse without noise returns the source as mixture and target."""
        y, x = reverberate_and_mix(self.s, np.array([1.0]), 'none')

        np.testing.assert_array_equal(y, self.s)
        np.testing.assert_array_equal(x, self.s)

    def test_snr_matches_request(self):
        """Test that the measured SNR against the reverberant signal matches the request within 0.01 dB."""
        h = generate_rir(SimConfig(), 0.4, np.random.default_rng(25))
        reverberant, _ = reverberate_and_mix(self.s, h, 'none')
        for kind in ('white', 'pink', 'lowfreq'):
            for snr in (-5.0, 0.0, 20.0):
                y, _ = reverberate_and_mix(self.s, h, kind, snr, np.random.default_rng(26))
                self.assertAlmostEqual(measured_snr(reverberant, y), snr, delta=0.01)

    def test_target_is_direct_path(self):
        """Test that the target is the direct path only, or direct plus early reflections when requested."""
        h = np.zeros(800)
        h[0], h[100], h[700] = 0.8, 0.5, 0.25
        _, direct = reverberate_and_mix(self.s, h, 'none')
        _, early = reverberate_and_mix(self.s, h, 'none', early_samples=400)

        np.testing.assert_allclose(direct, 0.8 * self.s)
        expected = 0.8 * self.s
        expected[100:] += 0.5 * self.s[:-100]
        np.testing.assert_allclose(early, expected, atol=1e-12)

    def test_outputs_have_source_length(self):
        """Test that mixture and target keep the source length."""
        y, x = reverberate_and_mix(self.s, generate_rir(SimConfig(), 0.8, self.rng), 'pink', 5.0, self.rng)

        self.assertEqual(len(y), len(self.s))
        self.assertEqual(len(x), len(self.s))

    def test_noise_colours(self):
        """Test that pink and low-frequency noise put more power below 1 kHz than above 4 kHz."""
        n = 32000
        for kind in ('pink', 'lowfreq'):
            spectrum = np.abs(np.fft.rfft(make_noise(kind, n, np.random.default_rng(27)))) ** 2
            freqs = np.fft.rfftfreq(n, 1 / 16000)
            low = spectrum[(freqs > 50) & (freqs < 1000)].mean()
            high = spectrum[freqs > 4000].mean()
            self.assertGreater(low, 10 * high, kind)

    def test_invalid_inputs(self):
        """Test unknown noise kinds, non-finite SNRs and silent sources."""
        with self.assertRaises(ArgumentError):
            make_noise('brown', 10, self.rng)
        with self.assertRaises(ArgumentError):
            scale_to_snr(np.ones(4), np.ones(4), float('inf'))
        with self.assertRaises(DataError):
            scale_to_snr(np.ones(4), np.zeros(4), 10.0)
        with self.assertRaises(DataError):
            reverberate_and_mix(np.zeros(100), np.array([1.0]))

    def test_synthetic_utterance(self):
        """Test length, peak level and seed determinism of the synthetic source."""
        a = synthetic_utterance(0.5, 16000, np.random.default_rng(3))
        b = synthetic_utterance(0.5, 16000, np.random.default_rng(3))

        self.assertEqual(len(a), 8000)
        self.assertAlmostEqual(float(np.abs(a).max()), 0.5)
        np.testing.assert_array_equal(a, b)


class TestDataset(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.cfg = SimConfig(utterance_seconds=0.5, t60_min=0.2, t60_max=0.6, rir_seconds=0.6, seed=11)

    def tearDown(self):
        self.tmp.cleanup()

    def _build(self, name, workers=None):
        out = os.path.join(self.tmp.name, name)
        return out, build_dataset([], self.cfg, out, n_conditions=3, n_synthetic=2, workers=workers)

    def test_manifest_rows(self):
        """Test two sources under three conditions give six rows with readable WAVs."""
        out, records = self._build('a')
        loaded = load_manifest(os.path.join(out, MANIFEST_NAME))

        self.assertEqual(len(records), 6)
        self.assertEqual([r.id for r in loaded], [r.id for r in records])
        self.assertEqual(loaded[0].id, 'syn0000_c00')
        for record in loaded:
            self.assertTrue(self.cfg.t60_min <= record.t60_s <= self.cfg.t60_max)
            y, _ = wav_read(record.reverb_path)
            x, _ = wav_read(record.target_path)
            self.assertEqual(len(y), 8000)
            self.assertEqual(len(x), 8000)

    def test_manifest_paths_are_relative(self):
        """Test that stored WAV paths are relative to the manifest directory."""
        out, _ = self._build('a')
        with open(os.path.join(out, MANIFEST_NAME)) as f:
            first = f.readline()

        self.assertIn('"reverb_path":"reverb/syn0000_c00.wav"', first)

    def test_rebuild_is_identical(self):
        """Test that the same seed reproduces every WAV bit for bit, regardless of worker count."""
        out_a, records_a = self._build('a', workers=1)
        out_b, records_b = self._build('b', workers=4)

        for a, b in zip(records_a, records_b):
            self.assertEqual(a.seed, b.seed)
            self.assertEqual(a.t60_s, b.t60_s)
            with open(a.reverb_path, 'rb') as fa, open(b.reverb_path, 'rb') as fb:
                self.assertEqual(fa.read(), fb.read())
        with open(os.path.join(out_a, MANIFEST_NAME)) as fa, open(os.path.join(out_b, MANIFEST_NAME)) as fb:
            self.assertEqual(fa.read(), fb.read())

    def test_no_sources(self):
        """Test that an empty source list without synthetic sources raises DataError."""
        with self.assertRaises(DataError):
            build_dataset([], self.cfg, self.tmp.name)

    def test_empty_manifest(self):
        """Test that a manifest without rows raises DataError."""
        path = os.path.join(self.tmp.name, MANIFEST_NAME)
        open(path, 'w').close()

        with self.assertRaises(DataError):
            load_manifest(path)


if __name__ == '__main__':
    unittest.main()
