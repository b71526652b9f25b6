"""Teacher and student training loops."""

from dataclasses import dataclass, field

import numpy as np

from ..distill import DistillConfig, LossBreakdown, fft_loss, kd_terms, total_loss
from ..exceptions import NumericFailure, ShapeMismatch
from ..tensor import spatial_to_tokens, tokens_to_spatial
from .model import backward, forward
from .optim import AdamState, adamw_step
from .prng import permutation

_CE_ONLY = DistillConfig(temperature=1.0, alpha=0.0, beta=0.0)


@dataclass
class TrainRun:
    optimizer: AdamState = field(default_factory=AdamState)
    history: list = field(default_factory=list)
    prng_state: int = 0
    epochs: int = 0


def no_decay_names(params):
    """Biases, LayerNorm parameters and position embeddings are not decayed."""
    return frozenset(k for k, v in params.items() if v.ndim < 2 or k == "pos")


def feature_maps(cache, cfg):
    """Block outputs of a forward pass as ``(B, C, H, W)`` maps."""
    g = cfg.grid
    return [tokens_to_spatial(f, g, g) for f in cache["features"]]


def distill_step_terms(student, teacher, plan, images, labels, distill):
    """Loss breakdown and gradients for one batch.

    ``student`` and ``teacher`` are ``(params, cfg)`` pairs; ``teacher``
    may be ``None`` for plain cross-entropy training.
    """
    params, cfg = student
    logits, cache = forward(params, images, cfg)
    if teacher is None:
        ce, kl, kd, logit_grad = kd_terms(logits, logits, labels, _CE_ONLY)
        return LossBreakdown(ce, kl, kd, 0.0, kd), cache, logit_grad, {}
    t_params, t_cfg = teacher
    t_logits, t_cache = forward(t_params, images, t_cfg)
    s_maps, t_maps = feature_maps(cache, cfg), feature_maps(t_cache, t_cfg)
    pairs = [(s_maps[s - 1], t_maps[t - 1]) for t, s in plan.pairs] if plan else []
    breakdown, logit_grad, fgrads = total_loss(pairs, logits, t_logits, labels, distill)
    feature_grads = {}
    for (_, s), g in zip(plan.pairs if plan else [], fgrads):
        feature_grads[s] = feature_grads.get(s, 0.0) + spatial_to_tokens(g)
    return breakdown, cache, logit_grad, feature_grads


def train(params, cfg, images, labels, epochs, lr, batch_size=64, seed=0,
          teacher=None, plan=None, distill=None, weight_decay=0.05, run=None):
    """Minimize cross-entropy, or the distillation objective when ``teacher`` is given.

    ``teacher`` is a frozen ``(params, cfg)`` pair and ``plan`` a
    :class:`~specdistill.spectral.LayerSelection` pairing teacher layers
    with student layers. Returns ``(params, TrainRun)``; batches are drawn
    in an order fixed by ``seed``.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    if len(images) != len(labels):
        raise ShapeMismatch(f"{len(images)} images but {len(labels)} labels")
    if plan is not None and teacher is not None:
        for t, s in plan.pairs:
            if not (1 <= t <= teacher[1].depth and 1 <= s <= cfg.depth):
                raise ShapeMismatch(f"layer pair ({t}, {s}) outside teacher/student depth")
    distill = distill or DistillConfig()
    run = run or TrainRun(prng_state=seed)
    params = {k: v.copy() for k, v in params.items()}
    n = len(images)
    skip = no_decay_names(params)
    for _ in range(epochs):
        run.prng_state, order = permutation(run.prng_state, n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            breakdown, cache, logit_grad, fgrads = distill_step_terms(
                (params, cfg), teacher, plan, images[idx], labels[idx], distill)
            if not np.isfinite(breakdown.l_total):
                raise NumericFailure(f"non-finite loss at step {run.optimizer.step}")
            grads = backward(params, cache, logit_grad, cfg, fgrads)
            params, run.optimizer = adamw_step(params, grads, run.optimizer, lr,
                                               weight_decay=weight_decay, no_decay=skip)
            run.history.append(breakdown)
        run.epochs += 1
    return params, run


def alignment_loss(student, teacher, plan, images):
    """Mean frequency-alignment loss over the planned pairs on ``images``."""
    _, cache = forward(student[0], images, student[1])
    _, t_cache = forward(teacher[0], images, teacher[1])
    s_maps, t_maps = feature_maps(cache, student[1]), feature_maps(t_cache, teacher[1])
    return float(np.mean([fft_loss(s_maps[s - 1], t_maps[t - 1])[0] for t, s in plan.pairs]))
