"""
Training objectives: pretraining RI+Mag loss, LSGAN losses, discriminator feature loss and the combined generator
loss.  All losses are real scalars built from taped primitives.
"""
from typing import Literal, Optional, Sequence, Union

from cxverb.cxcore import ops
from cxverb.cxcore.tensor import CxTensor
from cxverb.errors import ArgumentError, ConfigError, ShapeError

Scalar = Union[CxTensor, float]


def _same_shape(a: CxTensor, b: CxTensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes {a.shape} and {b.shape} differ")


def _plane_l1(a: CxTensor, b: CxTensor) -> CxTensor:
    """mean |a_r - b_r| + mean |a_i - b_i|."""
    return ops.mean_all(ops.fold_planes(ops.plane_abs(ops.sub(a, b))))


def loss_ri(x_hat: CxTensor, x: CxTensor) -> CxTensor:
    _same_shape(x_hat, x, "loss_ri")
    return _plane_l1(x_hat, x)


def loss_mag(x_hat: CxTensor, x: CxTensor) -> CxTensor:
    _same_shape(x_hat, x, "loss_mag")
    return ops.mean_all(ops.plane_abs(ops.sub(ops.cx_magnitude(x_hat), ops.cx_magnitude(x))))


def loss_ri_mag(x_hat: CxTensor, x: CxTensor, lam: float = 0.3) -> CxTensor:
    """
    lam * L_RI + (1 - lam) * L_Mag.

    :param x_hat: Enhanced spectrogram.
    :param x: Target spectrogram.
    :param lam: Blend weight of the real/imaginary term.
    """
    if not 0.0 <= lam <= 1.0:
        raise ArgumentError(f"lambda must lie in [0, 1], got {lam}")
    return ops.add(ops.scale(loss_ri(x_hat, x), lam), ops.scale(loss_mag(x_hat, x), 1.0 - lam))


def _half_mean_square(scores: CxTensor, target: float) -> CxTensor:
    return ops.scale(ops.mean_all(ops.square_planes(ops.shift(scores, -target))), 0.5)


def loss_lsgan(d_real_scores: Optional[CxTensor], d_fake_scores: CxTensor, side: Literal['D', 'G']) -> CxTensor:
    """
    Least-squares GAN losses over all patches.

    L_D = 1/2 mean((D(X) - 1)^2) + 1/2 mean(D(G(Y))^2);  L_G = 1/2 mean((D(G(Y)) - 1)^2).
    """
    if side == 'D':
        if d_real_scores is None:
            raise ArgumentError("discriminator loss needs real scores")
        return ops.add(_half_mean_square(d_real_scores, 1.0), _half_mean_square(d_fake_scores, 0.0))
    if side == 'G':
        return _half_mean_square(d_fake_scores, 1.0)
    raise ArgumentError(f"side must be 'D' or 'G', got '{side}'")


def loss_feature(features_real: Sequence[CxTensor], features_fake: Sequence[CxTensor]) -> CxTensor:
    """(1/L) sum over layers of the mean L1 distance, with re and im entries averaged jointly."""
    if len(features_real) != len(features_fake) or not features_real:
        raise ShapeError(f"feature lists differ in length: {len(features_real)} vs {len(features_fake)}")
    total = None
    for real, fake in zip(features_real, features_fake):
        _same_shape(real, fake, "loss_feature")
        term = ops.scale(_plane_l1(fake, real), 0.5)
        total = term if total is None else ops.add(total, term)
    return ops.scale(total, 1.0 / len(features_real))


def check_weights(alpha: float, beta: float) -> None:
    if alpha < 0 or beta < 0 or alpha + beta > 1.0 + 1e-12:
        raise ConfigError(f"generator loss weights need alpha, beta >= 0 and alpha + beta <= 1 "
                          f"(got {alpha}, {beta})")


def _as_tensor(value: Scalar) -> CxTensor:
    return value if isinstance(value, CxTensor) else CxTensor.real(float(value))


def loss_generator_total(l_g: Scalar, l_rimag: Scalar, l_feat: Optional[Scalar], alpha: float = 0.4,
                         beta: float = 0.3, use_feature_loss: bool = True) -> CxTensor:
    """
    alpha L_G + beta L_RI+Mag + (1 - alpha - beta) L_feature.  Without the feature loss its weight moves to the
    reconstruction term: alpha L_G + (1 - alpha) L_RI+Mag.
    """
    check_weights(alpha, beta)
    l_g, l_rimag = _as_tensor(l_g), _as_tensor(l_rimag)
    if not use_feature_loss:
        return ops.add(ops.scale(l_g, alpha), ops.scale(l_rimag, 1.0 - alpha))
    if l_feat is None:
        raise ArgumentError("feature loss enabled but no feature loss given")
    total = ops.add(ops.scale(l_g, alpha), ops.scale(l_rimag, beta))
    return ops.add(total, ops.scale(_as_tensor(l_feat), 1.0 - alpha - beta))


def patch_accuracy(d_real_scores: CxTensor, d_fake_scores: CxTensor) -> float:
    """Fraction of patches classified correctly at threshold 0.5."""
    correct = float((d_real_scores.re > 0.5).sum() + (d_fake_scores.re < 0.5).sum())
    return correct / (d_real_scores.size + d_fake_scores.size)
