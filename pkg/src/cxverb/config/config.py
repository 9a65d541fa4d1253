from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Any, Dict, List, Literal, Optional, Tuple
import logging

import numpy as np
import yaml

from cxverb.errors import ConfigError


class SectionModel(BaseModel):
    """Base for configuration sections: unknown keys are rejected."""
    model_config = ConfigDict(extra='forbid')


class StftConfig(SectionModel):
    """Analysis/synthesis frontend settings (16 kHz, 32 ms window, 8 ms hop)."""
    n_fft: int = Field(512, gt=1)
    win_length: int = Field(512, gt=1)
    hop: int = Field(128, gt=0)
    window: str = "hann"
    sample_rate: int = Field(16000, gt=0)
    use_pre_emphasis: bool = True
    pre_emphasis: float = Field(0.97, ge=0.0, lt=1.0)
    smoothing_window: int = Field(120, gt=0)
    smoothing_alpha_max: float = Field(0.96, gt=0.0, le=1.0)
    floor_db: float = -120.0

    @model_validator(mode='after')
    def _check_window(self) -> 'StftConfig':
        if self.win_length > self.n_fft:
            raise ValueError(f"win_length {self.win_length} exceeds n_fft {self.n_fft}")
        if self.hop > self.win_length:
            raise ValueError(f"hop {self.hop} exceeds win_length {self.win_length}")
        return self

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1


class SimConfig(SectionModel):
    """Reverberant-speech simulator settings."""
    t60_min: float = Field(0.2, gt=0.0)
    t60_max: float = Field(0.8, gt=0.0)
    snr_db: Optional[float] = 20.0
    noise_kinds: List[Literal['white', 'pink', 'lowfreq', 'none']] = ['white', 'pink', 'lowfreq']
    rir_seconds: float = Field(1.0, gt=0.0)
    direct_gain: float = Field(1.0, gt=0.0)
    drr_db: Optional[float] = None
    reference_t60: float = Field(0.5, gt=0.0)
    reference_drr_db: float = 0.0
    early_ms: float = Field(50.0, ge=0.0)
    early_target: bool = False
    lowfreq_cutoff: float = Field(400.0, gt=0.0)
    utterance_seconds: float = Field(2.0, gt=0.0)
    conditions: int = Field(1, ge=1)
    sample_rate: int = Field(16000, gt=0)
    seed: int = 0

    @model_validator(mode='after')
    def _check_ranges(self) -> 'SimConfig':
        if self.t60_min > self.t60_max:
            raise ValueError(f"t60_min {self.t60_min} exceeds t60_max {self.t60_max}")
        if self.rir_seconds < self.t60_max:
            raise ValueError(f"rir_seconds {self.rir_seconds} shorter than t60_max {self.t60_max}")
        if not self.noise_kinds:
            raise ValueError("noise_kinds must not be empty")
        return self


class GeneratorConfig(SectionModel):
    """
    Generator topology.  channels holds depth+1 entries counting the input channel; sb_counts holds one entry per
    skip connection except the deepest; tfsa_positions are 0-based encoder indices after which a TF-SA module is
    inserted, mirrored on the decoder path.
    TF-SA projections are dense square maps over the flattened feature dimension ('full'); 'channel' restricts
    them to 1x1 convolutions over channels, which the full-scale preset uses to stay tractable.
    """
    depth: int = 3
    channels: Tuple[int, ...] = (1, 8, 16, 32)
    kernel: Tuple[int, int] = (5, 3)
    stride: Tuple[int, int] = (1, 2)
    sb_counts: Tuple[int, ...] = (2, 1)
    tfsa_positions: Tuple[int, ...] = (1,)
    leaky_slope: float = Field(0.2, gt=0.0, lt=1.0)
    tfsa_projection: Literal['channel', 'full'] = 'full'
    tfsa_scale: bool = False
    mask_head: Literal['linear', 'tanh'] = 'linear'
    mask_bound: float = Field(2.0, gt=0.0)
    batchnorm: Literal['split', 'whitening'] = 'split'
    chip_frames: int = Field(64, gt=0)
    n_bins: int = Field(257, gt=0)

    @classmethod
    def paper(cls) -> 'GeneratorConfig':
        return cls(depth=7, channels=(1, 16, 32, 64, 128, 256, 512, 512), sb_counts=(8, 4, 4, 2, 2, 1),
                   tfsa_positions=(1, 3, 5), chip_frames=257, tfsa_projection='channel')

    @classmethod
    def toy(cls) -> 'GeneratorConfig':
        return cls()


class DiscriminatorConfig(SectionModel):
    """Complex patch discriminator: six spectrally normalized encoder layers by default."""
    channels: Tuple[int, ...] = (1, 16, 32, 64, 128, 128, 1)
    kernels: Tuple[Tuple[int, int], ...] = ((4, 4), (4, 4), (4, 4), (4, 4), (3, 3), (1, 1))
    strides: Tuple[Tuple[int, int], ...] = ((2, 2), (2, 2), (2, 2), (2, 2), (1, 1), (1, 1))
    paddings: Tuple[Tuple[int, int], ...] = ((1, 1), (1, 1), (1, 1), (1, 1), (1, 1), (0, 0))
    leaky_slope: float = Field(0.2, gt=0.0, lt=1.0)
    batchnorm: bool = True
    sn_init_iterations: int = Field(5, ge=1)
    sn_step_iterations: int = Field(1, ge=1)

    @classmethod
    def paper(cls) -> 'DiscriminatorConfig':
        return cls()

    @classmethod
    def toy(cls) -> 'DiscriminatorConfig':
        return cls(channels=(1, 8, 16, 16, 32, 32, 1))


class TrainConfig(SectionModel):
    """Two-phase training schedule: generator pretraining, then adversarial training."""
    lambda_ri: float = Field(0.3, ge=0.0, le=1.0)
    alpha: float = Field(0.4, ge=0.0)
    beta: float = Field(0.3, ge=0.0)
    use_feature_loss: bool = True
    batch_size: int = Field(16, ge=2)
    pretrain_epochs: int = Field(20, ge=1)
    pretrain_steps: Optional[int] = Field(None, ge=1)
    pretrain_lr: float = Field(1e-3, gt=0.0)
    pretrain_weight_decay: float = Field(0.0, ge=0.0)
    plateau_patience: int = Field(2, ge=1)
    plateau_factor: float = Field(0.1, gt=0.0, lt=1.0)
    validation_fraction: float = Field(0.1, ge=0.0, lt=1.0)
    gan_epochs: int = Field(30, ge=1)
    gan_steps: Optional[int] = Field(None, ge=1)
    gan_lr_g: float = Field(1e-4, gt=0.0)
    gan_lr_d: float = Field(1e-4, gt=0.0)
    weight_decay_g: float = Field(1e-4, ge=0.0)
    weight_decay_d: float = Field(1e-3, ge=0.0)
    d_steps_per_g: int = Field(1, ge=1)
    adam_beta1: float = Field(0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(1e-8, gt=0.0)
    checkpoint_every: int = Field(100, ge=1)
    prefetch: int = Field(2, ge=1)
    seed: int = 0

    @model_validator(mode='after')
    def _check_weights(self) -> 'TrainConfig':
        if self.alpha + self.beta > 1.0 + 1e-12:
            raise ValueError(f"alpha + beta must not exceed 1 (got {self.alpha} + {self.beta})")
        return self

    @classmethod
    def paper(cls) -> 'TrainConfig':
        return cls()

    @classmethod
    def toy(cls) -> 'TrainConfig':
        return cls(batch_size=4, pretrain_steps=300, gan_steps=200, checkpoint_every=50)


PRESETS: Dict[str, Dict[str, Any]] = {
    'paper': {
        'generator': GeneratorConfig.paper().model_dump(),
        'discriminator': DiscriminatorConfig.paper().model_dump(),
        'train': TrainConfig.paper().model_dump(exclude={'seed'}),
    },
    'toy': {
        'generator': GeneratorConfig.toy().model_dump(),
        'discriminator': DiscriminatorConfig.toy().model_dump(),
        'train': TrainConfig.toy().model_dump(exclude={'seed'}),
    },
}


class RunConfig(BaseSettings):
    """Fully resolved configuration for one cxverb run, with environment variable support."""

    preset: Literal['paper', 'toy'] = 'toy'
    seed: int = 0
    out_dir: str = "runs/default"
    workers: Optional[int] = Field(None, ge=1)
    log: Literal['error', 'warning', 'info', 'debug'] = 'info'
    dtype: Literal['float64', 'float32'] = 'float64'

    stft: StftConfig = StftConfig()
    sim: SimConfig = SimConfig()
    generator: GeneratorConfig = GeneratorConfig.toy()
    discriminator: DiscriminatorConfig = DiscriminatorConfig.toy()
    train: TrainConfig = TrainConfig.toy()

    model_config = SettingsConfigDict(
        env_prefix='CXVERB_',
        env_nested_delimiter='__',
        case_sensitive=False,
        extra='forbid'
    )

    @model_validator(mode='before')
    @classmethod
    def _apply_preset(cls, data: Any) -> Any:
        """Fill generator/discriminator/train sections from the preset, then apply explicit values on top."""
        if not isinstance(data, dict):
            return data
        data = dict(data)
        preset = data.get('preset', 'toy')
        if preset not in PRESETS:
            return data
        for section, defaults in PRESETS[preset].items():
            given = data.get(section) or {}
            if isinstance(given, BaseModel):
                given = given.model_dump(exclude_unset=True)
            data[section] = {**defaults, **given}
        if 'seed' in data:
            for section in ('sim', 'train'):
                given = data.get(section) or {}
                if isinstance(given, BaseModel):
                    given = given.model_dump(exclude_unset=True)
                data[section] = {**given, 'seed': data['seed']}
        return data

    @property
    def numpy_dtype(self):
        return np.float32 if self.dtype == 'float32' else np.float64

    def resolved(self) -> Dict[str, Any]:
        """Plain nested dictionary of every resolved value."""
        return self.model_dump(mode='json')

    @classmethod
    def read_file(cls, config_file: str) -> Dict[str, Any]:
        """
        Read a configuration file into a nested dictionary.  YAML files (.yaml/.yml) are loaded as nested
        sections; any other file is treated as plain-text key=value lines with dotted section keys.
        """
        logger = logging.getLogger(__name__)
        logger.info("Reading configuration file: %s", config_file)
        with open(config_file, 'r') as f:
            text = f.read()

        if config_file.endswith(('.yaml', '.yml')):
            data = yaml.safe_load(text) or {}
            if not isinstance(data, dict):
                raise ConfigError(f"Configuration file {config_file} does not contain a mapping")
            return data

        data: Dict[str, Any] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f"{config_file}:{lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split('=', 1))
            set_dotted(data, key, yaml.safe_load(value) if value else None)
            logger.debug("Loaded %s = %s", key, value)
        return data

    @classmethod
    def from_file(cls, config_file: str, overrides: Optional[Dict[str, Any]] = None) -> 'RunConfig':
        """Load configuration from a YAML or key=value file, applying dotted-key overrides on top."""
        logger = logging.getLogger(__name__)

        try:
            data = cls.read_file(config_file)
        except FileNotFoundError:
            logger.warning("Configuration file not found: %s, using defaults", config_file)
            data = {}
        except yaml.YAMLError as e:
            logger.error("Error parsing configuration from %s: %s", config_file, e)
            raise ConfigError(f"Error parsing configuration from {config_file}: {e}")

        for key, value in (overrides or {}).items():
            set_dotted(data, key, value)

        logger.debug("Creating RunConfig from %d top-level entries", len(data))
        return cls(**data)


def set_dotted(data: Dict[str, Any], key: str, value: Any) -> None:
    """Assign value at a dotted key path ('train.alpha') inside a nested dictionary."""
    parts = key.split('.')
    node = data
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            child = {}
            node[part] = child
        node = child
    node[parts[-1]] = value
