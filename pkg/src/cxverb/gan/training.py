"""
Two-phase training: generator pretraining on the RI+Mag loss, then adversarial training.

Adversarial steps follow a freeze contract.  During a discriminator step the generator runs untaped and frozen.
During a generator step the discriminator is frozen: no running statistics or power iterations move and its
optimizer is not stepped, so its parameters stay bitwise unchanged.
"""
import csv
import logging
import math
import os
from typing import Dict, List, Optional

import numpy as np

from cxverb.config.config import TrainConfig
from cxverb.cxcore.tape import Tape, no_record
from cxverb.dsp.masking import apply_crm
from cxverb.errors import DataError, NonFiniteLossError
from cxverb.gan.checkpoint import save_checkpoint
from cxverb.gan.data import Batch, BatchLoader, ChipDataset
from cxverb.gan.discriminator import Discriminator
from cxverb.gan.generator import Generator
from cxverb.gan.losses import loss_feature, loss_generator_total, loss_lsgan, loss_ri_mag, patch_accuracy
from cxverb.gan.optim import Adam, PlateauScheduler
from cxverb.result import ResultBase

PRETRAIN_COLUMNS = ('epoch', 'step', 'train_loss', 'val_loss', 'lr')
GAN_COLUMNS = ('step', 'L_D', 'L_G', 'L_rimag', 'L_feat')


class TrainResult(ResultBase):
    """Outcome of a training phase: per-step or per-epoch history and the files written."""

    def __init__(self, is_error: bool, message: str, steps: int = 0, history: Optional[List[Dict]] = None,
                 checkpoint_path: Optional[str] = None, log_path: Optional[str] = None) -> None:
        """
        :param steps: Optimizer steps taken.
        :param history: Logged loss rows.
        :param checkpoint_path: Final checkpoint.
        :param log_path: Loss CSV.
        """
        super().__init__(is_error, message)
        self.steps = steps
        self.history = history or []
        self.checkpoint_path = checkpoint_path
        self.log_path = log_path


class LossLog:
    """CSV loss log flushed row by row, so a run aborted mid-way keeps what it logged."""

    def __init__(self, path: str, columns) -> None:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        self.path = path
        self.columns = tuple(columns)
        self._file = open(path, 'w', newline='')
        self._writer = csv.writer(self._file)
        self._writer.writerow(self.columns)

    def write(self, row: Dict) -> None:
        self._writer.writerow([_format(row[c]) for c in self.columns])
        self._file.flush()

    def close(self) -> None:
        self._file.close()

    def __enter__(self) -> 'LossLog':
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _check_finite(step: int, losses: Dict[str, float]) -> None:
    bad = {k: v for k, v in losses.items() if not math.isfinite(v)}
    if bad:
        logging.getLogger(__name__).error("Non-finite loss at step %d: %s (all losses %s)", step, bad, losses)
        raise NonFiniteLossError(f"non-finite loss at step {step}: {sorted(bad)}", step, losses)


def reconstruction_loss(net: Generator, batch: Batch, lam: float):
    x_hat = apply_crm(batch.mixture, net(batch.inputs))
    return loss_ri_mag(x_hat, batch.target, lam)


def evaluate_loss(net: Generator, dataset: ChipDataset, cfg: TrainConfig, dtype=np.float64) -> Optional[float]:
    """Mean RI+Mag loss over a dataset in evaluation mode, or None for a dataset that cannot fill a batch."""
    if len(dataset) < 2:
        return None
    loader = BatchLoader(dataset, cfg.batch_size, cfg.seed, cfg.prefetch, shuffle=False, dtype=dtype)
    losses = []
    net.eval()
    try:
        with no_record(), net.frozen():
            for batch in loader.epoch(0):
                losses.append(reconstruction_loss(net, batch, cfg.lambda_ri).item())
    finally:
        net.train()
    return float(np.mean(losses)) if losses else None


def _mark_trained(net: Generator, steps: int) -> None:
    net.set_buffer('trained_steps', np.array([float(net.trained_steps[0]) + steps]))


def pretrain_generator(net: Generator, dataset: ChipDataset, cfg: TrainConfig, out_dir: str,
                       dtype=np.float64) -> TrainResult:
    """
    Train the generator alone on lambda L_RI + (1 - lambda) L_Mag.

    The learning rate is divided by 1/plateau_factor after plateau_patience epochs without a new best validation
    loss (training loss when the validation split is empty).  Runs cfg.pretrain_steps steps when set, otherwise
    cfg.pretrain_epochs epochs.

    :param net: Generator to train in place.
    :param dataset: Training chips; a validation split is held out by cfg.validation_fraction.
    :param cfg: Schedule.
    :param out_dir: Receives pretrain-loss.csv and pretrain.ckpt.
    :raises DataError: for an empty dataset.
    :raises NonFiniteLossError: when a loss becomes NaN or infinite.
    """
    logger = logging.getLogger(__name__)
    if len(dataset) == 0:
        raise DataError("cannot pretrain on an empty dataset")
    train_set, val_set = dataset.split(cfg.validation_fraction, cfg.seed)
    loader = BatchLoader(train_set, cfg.batch_size, cfg.seed, cfg.prefetch, dtype=dtype)
    optimizer = Adam(net.parameters(), cfg.pretrain_lr, cfg.pretrain_weight_decay, (cfg.adam_beta1, cfg.adam_beta2),
                     cfg.adam_eps)
    scheduler = PlateauScheduler(optimizer, cfg.plateau_patience, cfg.plateau_factor)
    log_path = os.path.join(out_dir, 'pretrain-loss.csv')
    history: List[Dict] = []
    step = 0
    epoch = 0
    logger.info("Pretraining on %d chips (%d held out), batch %d", len(train_set), len(val_set), cfg.batch_size)
    net.train()

    with LossLog(log_path, PRETRAIN_COLUMNS) as log:
        while True:
            if cfg.pretrain_steps is None and epoch >= cfg.pretrain_epochs:
                break
            if cfg.pretrain_steps is not None and step >= cfg.pretrain_steps:
                break
            epoch_losses = []
            for batch in loader.epoch(epoch):
                with Tape() as tape:
                    loss = reconstruction_loss(net, batch, cfg.lambda_ri)
                value = loss.item()
                _check_finite(step, {'L_rimag': value})
                optimizer.step(tape.backward(loss))
                epoch_losses.append(value)
                step += 1
                logger.debug("Pretrain step %d: L_rimag %.6f", step, value)
                if step % cfg.checkpoint_every == 0:
                    save_checkpoint(os.path.join(out_dir, 'checkpoints', f"pretrain-step{step:06d}.ckpt"), net)
                if cfg.pretrain_steps is not None and step >= cfg.pretrain_steps:
                    break
            train_loss = float(np.mean(epoch_losses))
            val_loss = evaluate_loss(net, val_set, cfg, dtype)
            monitored = train_loss if val_loss is None else val_loss
            row = {'epoch': epoch, 'step': step, 'train_loss': train_loss,
                   'val_loss': float('nan') if val_loss is None else val_loss, 'lr': optimizer.lr}
            log.write(row)
            history.append(row)
            logger.info("Pretrain epoch %d (step %d): train %.6f, validation %s, lr %.2e", epoch, step, train_loss,
                        'n/a' if val_loss is None else f"{val_loss:.6f}", optimizer.lr)
            scheduler.step(monitored)
            epoch += 1

    _mark_trained(net, step)
    checkpoint = save_checkpoint(os.path.join(out_dir, 'pretrain.ckpt'), net)
    return TrainResult(False, "", step, history, checkpoint, log_path)


def discriminator_step(gen: Generator, disc: Discriminator, batch: Batch, optimizer: Adam) -> Dict[str, float]:
    """One L_D update on a batch; the generator runs untaped and frozen."""
    with no_record(), gen.frozen():
        x_hat = apply_crm(batch.mixture, gen(batch.inputs))
    disc.update_spectral_norms()
    with Tape() as tape:
        real_scores, _ = disc(batch.target)
        fake_scores, _ = disc(x_hat)
        l_d = loss_lsgan(real_scores, fake_scores, 'D')
    optimizer.step(tape.backward(l_d))
    return {'L_D': l_d.item(), 'patch_accuracy': patch_accuracy(real_scores, fake_scores)}


def generator_step(gen: Generator, disc: Discriminator, batch: Batch, optimizer: Adam,
                   cfg: TrainConfig) -> Dict[str, float]:
    """One L_Gen update on a batch with the discriminator frozen."""
    with disc.frozen():
        features_real = None
        if cfg.use_feature_loss:
            with no_record():
                _, features_real = disc(batch.target)
        with Tape() as tape:
            x_hat = apply_crm(batch.mixture, gen(batch.inputs))
            fake_scores, features_fake = disc(x_hat)
            l_g = loss_lsgan(None, fake_scores, 'G')
            l_rimag = loss_ri_mag(x_hat, batch.target, cfg.lambda_ri)
            l_feat = loss_feature(features_real, features_fake) if cfg.use_feature_loss else None
            total = loss_generator_total(l_g, l_rimag, l_feat, cfg.alpha, cfg.beta, cfg.use_feature_loss)
        optimizer.step(tape.backward(total))
    return {'L_G': l_g.item(), 'L_rimag': l_rimag.item(), 'L_feat': 0.0 if l_feat is None else l_feat.item(),
            'L_Gen': total.item()}


def train_gan(gen: Generator, disc: Discriminator, dataset: ChipDataset, cfg: TrainConfig, out_dir: str,
              dtype=np.float64) -> TrainResult:
    """
    Alternate cfg.d_steps_per_g discriminator updates with one generator update per batch.

    :param gen: Generator, normally pretrained; a warning is logged otherwise.
    :param disc: Discriminator.
    :param dataset: Training chips.
    :param cfg: Schedule; runs cfg.gan_steps generator steps when set, otherwise cfg.gan_epochs epochs.
    :param out_dir: Receives gan-loss.csv, periodic checkpoints and gan.ckpt.
    :raises DataError: for an empty dataset.
    :raises NonFiniteLossError: when a loss becomes NaN or infinite.
    """
    logger = logging.getLogger(__name__)
    if len(dataset) == 0:
        raise DataError("cannot train on an empty dataset")
    if float(gen.trained_steps[0]) == 0.0:
        logger.warning("Generator has no pretraining steps recorded; adversarial training may be unstable")
    loader = BatchLoader(dataset, cfg.batch_size, cfg.seed, cfg.prefetch, dtype=dtype)
    betas = (cfg.adam_beta1, cfg.adam_beta2)
    opt_g = Adam(gen.parameters(), cfg.gan_lr_g, cfg.weight_decay_g, betas, cfg.adam_eps)
    opt_d = Adam(disc.parameters(), cfg.gan_lr_d, cfg.weight_decay_d, betas, cfg.adam_eps)
    log_path = os.path.join(out_dir, 'gan-loss.csv')
    history: List[Dict] = []
    step = 0
    epoch = 0
    gen.train()
    disc.train()
    logger.info("Adversarial training on %d chips, %d D step(s) per G step", len(dataset), cfg.d_steps_per_g)

    with LossLog(log_path, GAN_COLUMNS) as log:
        while True:
            if cfg.gan_steps is None and epoch >= cfg.gan_epochs:
                break
            if cfg.gan_steps is not None and step >= cfg.gan_steps:
                break
            for batch in loader.epoch(epoch):
                for _ in range(cfg.d_steps_per_g):
                    d_stats = discriminator_step(gen, disc, batch, opt_d)
                    _check_finite(step, {'L_D': d_stats['L_D']})
                g_stats = generator_step(gen, disc, batch, opt_g, cfg)
                step += 1
                row = {'step': step, **d_stats, **g_stats}
                _check_finite(step, {k: row[k] for k in GAN_COLUMNS[1:]})
                log.write(row)
                history.append(row)
                logger.debug("GAN step %d: L_D %.5f L_G %.5f L_rimag %.5f L_feat %.5f acc %.3f", step, row['L_D'],
                             row['L_G'], row['L_rimag'], row['L_feat'], row['patch_accuracy'])
                if step % cfg.checkpoint_every == 0:
                    save_checkpoint(os.path.join(out_dir, 'checkpoints', f"gan-step{step:06d}.ckpt"), gen, disc)
                if cfg.gan_steps is not None and step >= cfg.gan_steps:
                    break
            epoch += 1
            logger.info("GAN epoch %d done at step %d", epoch, step)

    _mark_trained(gen, step)
    checkpoint = save_checkpoint(os.path.join(out_dir, 'gan.ckpt'), gen, disc)
    return TrainResult(False, "", step, history, checkpoint, log_path)
