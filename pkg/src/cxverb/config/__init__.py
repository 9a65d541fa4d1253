from .config import (DiscriminatorConfig, GeneratorConfig, PRESETS, RunConfig, SimConfig, StftConfig,
                     TrainConfig)
from .loader import load_config, write_resolved_config

__all__ = ['StftConfig', 'SimConfig', 'GeneratorConfig', 'DiscriminatorConfig', 'TrainConfig', 'RunConfig',
           'PRESETS', 'load_config', 'write_resolved_config']
