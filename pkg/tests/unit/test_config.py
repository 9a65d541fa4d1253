import unittest
from unittest.mock import patch
import tempfile
import os
import sys
from pathlib import Path

import yaml
from pydantic import ValidationError

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../src'))

from cxverb.config import GeneratorConfig, RunConfig, StftConfig, TrainConfig, load_config, write_resolved_config
from cxverb.config.loader import RESOLVED_CONFIG_NAME, find_config_file, get_default_config
from cxverb.errors import ConfigError


class TestSectionConfigs(unittest.TestCase):

    def test_stft_defaults(self):
        """Test StftConfig defaults: 512-point window, 128-sample hop, 257 bins."""
        config = StftConfig()

        self.assertEqual(config.n_fft, 512)
        self.assertEqual(config.hop, 128)
        self.assertEqual(config.n_bins, 257)
        self.assertAlmostEqual(config.pre_emphasis, 0.97)

    def test_stft_rejects_hop_longer_than_window(self):
        """Test that a hop longer than the window is rejected."""
        with self.assertRaises(ValidationError):
            StftConfig(win_length=256, hop=300)

    def test_train_weights_validated(self):
        """Test that alpha + beta above 1 is rejected."""
        with self.assertRaises(ValidationError):
            TrainConfig(alpha=0.8, beta=0.3)

    def test_adam_defaults(self):
        """Test the Adam moment and epsilon defaults shared by both training phases."""
        config = TrainConfig()

        self.assertEqual((config.adam_beta1, config.adam_beta2, config.adam_eps), (0.9, 0.999, 1e-8))

    def test_full_scale_generator_preset(self):
        """Test the full-scale generator ladder."""
        config = GeneratorConfig.paper()

        self.assertEqual(config.depth, 7)
        self.assertEqual(config.channels, (1, 16, 32, 64, 128, 256, 512, 512))
        self.assertEqual(config.sb_counts, (8, 4, 4, 2, 2, 1))
        self.assertEqual(config.tfsa_positions, (1, 3, 5))
        self.assertEqual(config.chip_frames, 257)

    def test_unknown_section_key_rejected(self):
        """Test that unknown keys inside a section are rejected."""
        with self.assertRaises(ValidationError):
            StftConfig(n_fft=512, bogus=1)


class TestRunConfig(unittest.TestCase):

    def test_toy_preset_defaults(self):
        """Test that the toy preset fills generator and schedule sections."""
        config = RunConfig()

        self.assertEqual(config.preset, 'toy')
        self.assertEqual(config.generator.channels, (1, 8, 16, 32))
        self.assertEqual(config.train.batch_size, 4)
        self.assertEqual(config.train.pretrain_steps, 300)
        self.assertEqual(config.train.gan_steps, 200)

    def test_full_scale_preset(self):
        """Test that preset='paper' switches every preset section."""
        config = RunConfig(preset='paper')

        self.assertEqual(config.generator.depth, 7)
        self.assertEqual(config.train.batch_size, 16)
        self.assertIsNone(config.train.pretrain_steps)

    def test_explicit_section_values_win_over_preset(self):
        """Test that explicit section values are applied on top of the preset."""
        config = RunConfig(preset='paper', train={'batch_size': 8})

        self.assertEqual(config.train.batch_size, 8)
        self.assertEqual(config.train.pretrain_epochs, 20)

    def test_seed_propagates_to_sections(self):
        """Test that the run seed reaches the simulator and the schedule."""
        config = RunConfig(seed=7)

        self.assertEqual(config.sim.seed, 7)
        self.assertEqual(config.train.seed, 7)

    def test_unknown_top_level_key_rejected(self):
        """Test that unknown top-level keys are rejected."""
        with self.assertRaises(ValidationError):
            RunConfig(not_a_key=1)

    @patch.dict(os.environ, {'CXVERB_SEED': '11', 'CXVERB_STFT__HOP': '64'})
    def test_environment_variable_override(self):
        """Test that environment variables override defaults, including nested sections."""
        config = RunConfig()

        self.assertEqual(config.seed, 11)
        self.assertEqual(config.stft.hop, 64)

    def test_numpy_dtype(self):
        """Test the dtype switch."""
        import numpy as np

        self.assertIs(RunConfig().numpy_dtype, np.float64)
        self.assertIs(RunConfig(dtype='float32').numpy_dtype, np.float32)

    def test_from_yaml_file(self):
        """Test loading a nested YAML configuration file."""
        content = "seed: 3\nstft:\n  hop: 64\ntrain:\n  alpha: 0.5\n  beta: 0.2\n"
        with tempfile.NamedTemporaryFile(mode='w', suffix='.yaml', delete=False) as f:
            f.write(content)
        try:
            config = RunConfig.from_file(f.name)

            self.assertEqual(config.seed, 3)
            self.assertEqual(config.stft.hop, 64)
            self.assertAlmostEqual(config.train.alpha, 0.5)
            self.assertAlmostEqual(config.train.beta, 0.2)
        finally:
            os.unlink(f.name)

    def test_from_key_value_file(self):
        """Test loading a plain-text key=value configuration file with dotted keys."""
        content = "# run settings\npreset = toy\ntrain.alpha = 0.3\nsim.noise_kinds = [white, none]\n"
        with tempfile.NamedTemporaryFile(mode='w', suffix='.conf', delete=False) as f:
            f.write(content)
        try:
            config = RunConfig.from_file(f.name)

            self.assertAlmostEqual(config.train.alpha, 0.3)
            self.assertEqual(config.sim.noise_kinds, ['white', 'none'])
        finally:
            os.unlink(f.name)

    def test_key_value_file_syntax_error(self):
        """Test that a line without '=' is a configuration error."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.conf', delete=False) as f:
            f.write("train.alpha 0.3\n")
        try:
            with self.assertRaises(ConfigError):
                RunConfig.from_file(f.name)
        finally:
            os.unlink(f.name)

    def test_from_file_invalid_yaml(self):
        """Test that malformed YAML is reported as a configuration error."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.yaml', delete=False) as f:
            f.write("invalid: yaml: content: [")
        try:
            with self.assertRaises(ConfigError) as context:
                RunConfig.from_file(f.name)
            self.assertIn("Error parsing configuration", str(context.exception))
        finally:
            os.unlink(f.name)

    def test_from_file_not_found_uses_defaults(self):
        """Test that a missing file falls back to defaults."""
        config = RunConfig.from_file('nonexistent-file.yaml')

        self.assertEqual(config.stft.n_fft, 512)

    def test_overrides_applied_after_file(self):
        """Test that dotted overrides take precedence over file values."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.yaml', delete=False) as f:
            f.write("train:\n  alpha: 0.5\n  beta: 0.2\n")
        try:
            config = RunConfig.from_file(f.name, {'train.alpha': 0.1})

            self.assertAlmostEqual(config.train.alpha, 0.1)
            self.assertAlmostEqual(config.train.beta, 0.2)
        finally:
            os.unlink(f.name)


class TestConfigLoader(unittest.TestCase):

    def test_find_config_file_explicit(self):
        """Test finding config file when explicitly provided."""
        with tempfile.NamedTemporaryFile(suffix='.yaml', delete=False) as f:
            try:
                result = find_config_file(f.name)
                self.assertEqual(result, f.name)
            finally:
                os.unlink(f.name)

    def test_find_config_file_explicit_not_found(self):
        """Test finding config file when explicit file doesn't exist."""
        with self.assertRaises(FileNotFoundError):
            find_config_file('nonexistent-file.yaml')

    def test_find_config_file_from_environment(self):
        """Test finding config file from CXVERB_CONFIG_FILE."""
        with tempfile.NamedTemporaryFile(suffix='.yaml', delete=False) as f:
            try:
                with patch.dict(os.environ, {'CXVERB_CONFIG_FILE': f.name}):
                    self.assertEqual(find_config_file(), f.name)
            finally:
                os.unlink(f.name)

    def test_find_config_file_none(self):
        """Test that no file is found in an empty directory without a project root."""
        with tempfile.TemporaryDirectory() as tmp:
            with patch('cxverb.config.loader.Path.cwd', return_value=Path(tmp)), patch.dict(os.environ, {}):
                os.environ.pop('CXVERB_CONFIG_FILE', None)
                self.assertIsNone(find_config_file())

    def test_load_config_without_search(self):
        """Test load_config with search disabled uses defaults plus overrides."""
        config = load_config(overrides={'seed': 5, 'stft.hop': 64}, search=False)

        self.assertEqual(config.seed, 5)
        self.assertEqual(config.stft.hop, 64)

    def test_load_config_explicit_file(self):
        """Test load_config with an explicit file."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.yaml', delete=False) as f:
            f.write("preset: paper\n")
        try:
            config = load_config(config_file=f.name)
            self.assertEqual(config.generator.depth, 7)
        finally:
            os.unlink(f.name)

    def test_write_resolved_config(self):
        """Test that the resolved configuration is written as YAML and reloads to the same values."""
        with tempfile.TemporaryDirectory() as tmp:
            config = RunConfig(seed=4, out_dir=tmp)
            path = write_resolved_config(config)

            self.assertEqual(os.path.basename(path), RESOLVED_CONFIG_NAME)
            with open(path) as f:
                data = yaml.safe_load(f)
            self.assertEqual(data['seed'], 4)
            self.assertEqual(RunConfig(**data).resolved(), config.resolved())

    def test_get_default_config(self):
        """Test getting default configuration."""
        config = get_default_config()

        self.assertIsInstance(config, RunConfig)
        self.assertEqual(config.stft.n_fft, 512)


if __name__ == '__main__':
    unittest.main()
