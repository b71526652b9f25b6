"""Channel-wise spectral intensity analysis of feature maps.

A layer's feature map ``(B, C, H, W)`` is transformed with a 1-D FFT
along the channel axis at every ``(b, h, w)`` position. The magnitudes
averaged over batch and space give a per-frequency spectrum of length C;
its mean is the layer's scalar intensity, and the sequence of intensities
over depth is the model profile.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import BudgetExceeded, KOutOfRange, ShapeMismatch, ZeroProfile, warn_degenerate
from .fft import fft_channels
from .tensor import as_feature_map


@dataclass(frozen=True)
class ChannelSpectrum:
    values: np.ndarray
    layer_index: int = 1


@dataclass(frozen=True)
class ModelProfile:
    intensities: np.ndarray
    labels: tuple = None
    spectra: tuple = field(default=None, repr=False)

    @property
    def layer_count(self):
        return len(self.intensities)

    @property
    def indices(self):
        if self.spectra is not None:
            return tuple(s.layer_index for s in self.spectra)
        return tuple(range(1, self.layer_count + 1))


@dataclass(frozen=True)
class LayerSelection:
    teacher_layers: tuple
    student_layers: tuple

    @property
    def pairs(self):
        return tuple(zip(self.teacher_layers, self.student_layers))


def magnitude(f):
    f = np.asarray(f)
    return np.sqrt(f.real * f.real + f.imag * f.imag)


def channel_spectrum(x, layer_index=1):
    x = as_feature_map(x)
    amp = magnitude(fft_channels(x))
    return ChannelSpectrum(amp.mean(axis=(0, 2, 3)), int(layer_index))


def layer_intensity(s):
    values = s.values if isinstance(s, ChannelSpectrum) else np.asarray(s, dtype=np.float64)
    return float(np.mean(values))


def model_profile(layers, indices=None, labels=None):
    """Spectrum and intensity for each layer, in the given order."""
    layers = list(layers)
    if not layers:
        raise ShapeMismatch("a model profile needs at least one layer")
    if indices is None:
        indices = range(1, len(layers) + 1)
    spectra = tuple(channel_spectrum(x, k) for x, k in zip(layers, indices))
    return ModelProfile(
        np.array([layer_intensity(s) for s in spectra]),
        labels=tuple(labels) if labels is not None else None,
        spectra=spectra,
    )


def _intensities(p):
    if isinstance(p, ModelProfile):
        return np.asarray(p.intensities, dtype=np.float64)
    return np.asarray(p, dtype=np.float64).ravel()


def intensity_histogram(p, bins):
    """Uniform-width histogram over ``[min, max]`` of the intensities.

    Returns ``[(lower_edge, count), ...]``. The maximum lands in the last
    bin. A zero-width range yields one bin holding every layer.
    """
    if bins < 1:
        raise ValueError("bins must be at least 1")
    v = _intensities(p)
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        warn_degenerate(f"all {len(v)} intensities equal {lo}; using a single bin")
        return [(lo, len(v))]
    width = (hi - lo) / bins
    idx = np.minimum(((v - lo) / width).astype(int), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return [(lo + i * width, int(c)) for i, c in enumerate(counts)]


def select_layers_topk(p, k):
    """1-based indices of the ``k`` most intense layers, ascending.

    Ties go to the shallower layer.
    """
    v = _intensities(p)
    n = len(v)
    if not 1 <= k <= n:
        raise KOutOfRange(f"k={k} outside [1, {n}]")
    order = sorted(range(n), key=lambda i: (-v[i], i))
    return tuple(sorted(i + 1 for i in order[:k]))


def map_student_layers(teacher_sel, n_t, n_s):
    """Carry a teacher layer set over to a shallower (or deeper) student.

    Teacher layers in the first half of the teacher (``i <= n_t / 2``)
    map onto the first student layers; the rest map onto the last ones.
    """
    teacher = sorted(int(i) for i in teacher_sel)
    if len(set(teacher)) != len(teacher) or any(not 1 <= i <= n_t for i in teacher):
        raise KOutOfRange(f"teacher layers {teacher} must be distinct and within [1, {n_t}]")
    head = sum(1 for i in teacher if 2 * i <= n_t)
    tail = len(teacher) - head
    if head + tail > n_s:
        raise BudgetExceeded(f"{head + tail} teacher layers do not fit {n_s} student layers")
    student = list(range(1, head + 1)) + list(range(n_s - tail + 1, n_s + 1))
    return LayerSelection(tuple(teacher), tuple(student))


def profile_distance(teacher, student):
    """Mean absolute gap between max-normalized profiles.

    The shorter profile is linearly resampled onto the longer one's layer
    grid with both endpoints pinned, so profiles of different depth compare.
    """
    a, b = _intensities(teacher), _intensities(student)
    if a.size == 0 or b.size == 0:
        raise ZeroProfile("profiles must be non-empty")
    if a.max() <= 0 or b.max() <= 0:
        raise ZeroProfile("profile maximum must be positive")
    a, b = a / a.max(), b / b.max()
    if len(a) < len(b):
        a, b = b, a
    grid_long = np.linspace(0.0, 1.0, len(a)) if len(a) > 1 else np.zeros(1)
    grid_short = np.linspace(0.0, 1.0, len(b)) if len(b) > 1 else np.zeros(1)
    b_on_a = np.interp(grid_long, grid_short, b)
    return float(np.mean(np.abs(a - b_on_a)))


def profile_to_dict(p):
    spectra = p.spectra or tuple(ChannelSpectrum(np.array([]), k) for k in p.indices)
    layers = []
    for s, ell in zip(spectra, p.intensities):
        layers.append({"index": s.layer_index, "intensity": float(ell),
                       "spectrum": [float(v) for v in s.values]})
    return {"layers": layers}


def profile_from_dict(d):
    try:
        layers = d["layers"]
        spectra = tuple(ChannelSpectrum(np.asarray(e.get("spectrum", []), dtype=np.float64),
                                        int(e["index"])) for e in layers)
        intensities = np.array([float(e["intensity"]) for e in layers])
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeMismatch(f"malformed profile document: {exc}") from exc
    if not layers:
        raise ShapeMismatch("profile document lists no layers")
    return ModelProfile(intensities, spectra=spectra)


def load_profile(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ShapeMismatch(f"{path}: invalid JSON: {exc}") from exc
    return profile_from_dict(doc)
