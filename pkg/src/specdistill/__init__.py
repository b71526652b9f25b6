"""Spectral analysis of transformer feature maps and frequency-alignment distillation."""

from .distill import DistillConfig, LossBreakdown, align_channels, fft_loss, kd_loss, spectrum_stack, total_loss
from .estimators import SpectralLayerSelector, SpectralProfiler, TinyViTClassifier
from .spectral import (
    ChannelSpectrum,
    LayerSelection,
    ModelProfile,
    channel_spectrum,
    intensity_histogram,
    layer_intensity,
    magnitude,
    map_student_layers,
    model_profile,
    profile_distance,
    select_layers_topk,
)
from .tensor import load_npy, save_npy, tokens_to_spatial

__version__ = "0.1.0"
