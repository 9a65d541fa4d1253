from .checkpoint import MAGIC, load_checkpoint, load_tensors, save_checkpoint, save_tensors
from .data import Batch, BatchLoader, ChipDataset, TrainingChip, frontend, make_batch, prepare_utterance
from .discriminator import Discriminator, build_discriminator, discriminator_forward
from .generator import Generator, GeneratorPlan, build_generator, count_parameters, generator_forward, plan_generator
from .losses import (check_weights, loss_feature, loss_generator_total, loss_lsgan, loss_mag, loss_ri, loss_ri_mag,
                     patch_accuracy)
from .optim import Adam, AdamState, PlateauScheduler, adam_step
from .training import (TrainResult, discriminator_step, evaluate_loss, generator_step, pretrain_generator,
                       train_gan)

__all__ = ['MAGIC', 'load_checkpoint', 'load_tensors', 'save_checkpoint', 'save_tensors', 'Batch', 'BatchLoader',
           'ChipDataset', 'TrainingChip', 'frontend', 'make_batch', 'prepare_utterance', 'Discriminator',
           'build_discriminator', 'discriminator_forward', 'Generator', 'GeneratorPlan', 'build_generator',
           'count_parameters', 'generator_forward', 'plan_generator', 'check_weights', 'loss_feature',
           'loss_generator_total', 'loss_lsgan', 'loss_mag', 'loss_ri', 'loss_ri_mag', 'patch_accuracy', 'Adam',
           'AdamState', 'PlateauScheduler', 'adam_step', 'TrainResult', 'discriminator_step', 'evaluate_loss',
           'generator_step', 'pretrain_generator', 'train_gan']
