"""Synthetic oriented-grating classification data."""

import numpy as np

from .prng import normals

IMAGE_SIZE = 16
N_CLASSES = 10
FREQUENCY = 3.0


def synth_dataset(seed, count, noise=0.1):
    """``count`` 16x16 gratings; class ``c`` is oriented at ``c * pi / 10``.

    Labels cycle 0, 1, ..., 9, 0, ... Returns ``(images, labels)`` with
    images of shape ``(count, 16, 16)``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    labels = np.arange(count) % N_CLASSES
    theta = labels * np.pi / N_CLASSES
    i = np.arange(IMAGE_SIZE).reshape(1, -1, 1)
    j = np.arange(IMAGE_SIZE).reshape(1, 1, -1)
    proj = i * np.cos(theta)[:, None, None] + j * np.sin(theta)[:, None, None]
    clean = np.sin(2.0 * np.pi * FREQUENCY * proj / IMAGE_SIZE)
    _, g = normals(seed, count * IMAGE_SIZE * IMAGE_SIZE)
    return clean + noise * g.reshape(clean.shape), labels
