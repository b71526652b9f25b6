"""Desk-scale vision transformer with manual backpropagation."""

from .checkpoint import load_checkpoint, save_checkpoint
from .data import synth_dataset
from .model import ModelConfig, backward, forward, init_params
from .optim import AdamState, adamw_step
from .prng import prng_next
from .train import TrainRun, alignment_loss, feature_maps, train

__all__ = [
    "AdamState", "ModelConfig", "TrainRun", "adamw_step", "alignment_loss", "backward",
    "feature_maps", "forward", "init_params", "load_checkpoint", "prng_next",
    "save_checkpoint", "synth_dataset", "train",
]
