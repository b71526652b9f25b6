"""Frequency-alignment distillation losses with exact gradients.

Student and teacher feature maps are brought to a common channel count
by adaptive average pooling over channels, transformed with a 2-D real
FFT over space, split into stacked real/imaginary planes and compared
with a mean squared error. This is combined with the usual soft
knowledge-distillation loss on the logits.

All gradients are with respect to student quantities; teacher inputs
are constants.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, LabelOutOfRange, ShapeMismatch, SpatialMismatch
from .fft import rfft2, rfft2_adjoint
from .tensor import as_feature_map


@dataclass(frozen=True)
class DistillConfig:
    temperature: float = 1.0
    alpha: float = 0.9
    beta: float = 0.2

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.beta >= 0:
            raise ConfigError(f"beta must be non-negative, got {self.beta}")


@dataclass(frozen=True)
class LossBreakdown:
    l_ce: float
    l_kl: float
    l_kd: float
    l_fft: float
    l_total: float

    FIELDS = ("l_ce", "l_kl", "l_kd", "l_fft", "l_total")

    def as_row(self):
        return [self.l_ce, self.l_kl, self.l_kd, self.l_fft, self.l_total]


def pool_windows(c_in, c_out):
    """Adaptive pooling windows ``[floor(i*c_in/c_out), ceil((i+1)*c_in/c_out))``."""
    return [((i * c_in) // c_out, -((-(i + 1) * c_in) // c_out)) for i in range(c_out)]


def pool_channels(x, c_out):
    c_in = x.shape[1]
    if c_out == c_in:
        return x
    return np.stack([x[:, a:b].mean(axis=1) for a, b in pool_windows(c_in, c_out)], axis=1)


def pool_channels_adjoint(g, c_in):
    c_out = g.shape[1]
    if c_out == c_in:
        return g
    out = np.zeros(g.shape[:1] + (c_in,) + g.shape[2:])
    for i, (a, b) in enumerate(pool_windows(c_in, c_out)):
        out[:, a:b] += g[:, i:i + 1] / (b - a)
    return out


def _check_pair(s, t):
    s = as_feature_map(s, "student feature map")
    t = as_feature_map(t, "teacher feature map")
    if s.shape[2:] != t.shape[2:]:
        raise SpatialMismatch(f"spatial dims differ: student {s.shape[2:]}, teacher {t.shape[2:]}")
    if s.shape[0] != t.shape[0]:
        raise ShapeMismatch(f"batch sizes differ: {s.shape[0]} vs {t.shape[0]}")
    return s, t


def align_channels(s, t):
    """Pool whichever map has more channels down to the smaller count."""
    s, t = _check_pair(s, t)
    c = min(s.shape[1], t.shape[1])
    return pool_channels(s, c), pool_channels(t, c)


def spectrum_stack(x):
    """``(2, B, C, H, W//2+1)``: real part in slice 0, imaginary in slice 1."""
    f = rfft2(as_feature_map(x))
    return np.stack([f.real, f.imag])


def fft_loss(s, t):
    """MSE between stacked spatial spectra; returns ``(value, d value / d s)``."""
    s, t = _check_pair(s, t)
    s_al, t_al = align_channels(s, t)
    diff = spectrum_stack(s_al) - spectrum_stack(t_al)
    nel = diff.size
    value = float(np.sum(diff * diff) / nel)
    g = 2.0 * diff / nel
    H, W = s.shape[2:]
    grad = rfft2_adjoint(g[0] + 1j * g[1], H, W)
    return value, pool_channels_adjoint(grad, s.shape[1])


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))


def _check_logits(student_logits, teacher_logits, labels):
    zs = np.asarray(student_logits, dtype=np.float64)
    zt = np.asarray(teacher_logits, dtype=np.float64)
    y = np.asarray(labels)
    if zs.ndim != 2 or zs.shape != zt.shape or zs.shape[1] < 2:
        raise ShapeMismatch(f"logits must be (B, K>=2) and equal shape, got {zs.shape} and {zt.shape}")
    if y.shape != (zs.shape[0],):
        raise ShapeMismatch(f"labels shape {y.shape} does not match batch {zs.shape[0]}")
    if np.any(y < 0) or np.any(y >= zs.shape[1]):
        raise LabelOutOfRange(f"labels must lie in [0, {zs.shape[1]})")
    return zs, zt, y.astype(np.intp)


def kd_terms(student_logits, teacher_logits, labels, cfg):
    """Return ``(ce, kl, kd, grad)`` of the soft distillation loss."""
    zs, zt, y = _check_logits(student_logits, teacher_logits, labels)
    B, K = zs.shape
    T, a = cfg.temperature, cfg.alpha
    logp = _log_softmax(zs)
    ce = float(-np.mean(logp[np.arange(B), y]))
    logq_s = _log_softmax(zs / T)
    logq_t = _log_softmax(zt / T)
    q_t = np.exp(logq_t)
    kl = float(np.mean(np.sum(q_t * (logq_t - logq_s), axis=1)))
    kd = (1.0 - a) * ce + a * T * T * kl
    onehot = np.zeros_like(zs)
    onehot[np.arange(B), y] = 1.0
    grad = (1.0 - a) * (np.exp(logp) - onehot) / B + a * T * (np.exp(logq_s) - q_t) / B
    return ce, kl, kd, grad


def kd_loss(student_logits, teacher_logits, labels, cfg=DistillConfig()):
    """``(1-alpha) CE + alpha T^2 KL(p_teacher || p_student)``; returns ``(value, grad)``."""
    _, _, kd, grad = kd_terms(student_logits, teacher_logits, labels, cfg)
    return kd, grad


def total_loss(pairs, student_logits, teacher_logits, labels, cfg=DistillConfig()):
    """Soft KD plus ``beta`` times the mean frequency-alignment loss over pairs.

    Returns ``(LossBreakdown, logit_grad, feature_grads)`` where
    ``feature_grads[i]`` is the gradient for the student map of ``pairs[i]``.
    """
    ce, kl, kd, logit_grad = kd_terms(student_logits, teacher_logits, labels, cfg)
    pairs = list(pairs)
    values, feature_grads = [], []
    scale = cfg.beta / len(pairs) if pairs else 0.0
    for s, t in pairs:
        v, g = fft_loss(s, t)
        values.append(v)
        feature_grads.append(scale * g)
    l_fft = float(np.mean(values)) if values else 0.0
    return LossBreakdown(ce, kl, kd, l_fft, kd + cfg.beta * l_fft), logit_grad, feature_grads
