"""Discrete Fourier transforms along the last axis, written out by hand.

Conventions: forward transforms are unnormalized, inverse transforms
carry ``1/n``. Complex data is held in ``complex128`` arrays; every
transform here is vectorized over all leading axes, and each fiber goes
through exactly the same arithmetic as it would on its own.
"""

import numpy as np

from .exceptions import ShapeMismatch


def dft_naive(v, inverse=False):
    """O(n^2) DFT used as a reference for the fast paths."""
    v = np.asarray(v, dtype=np.complex128)
    n = v.shape[-1]
    idx = np.arange(n)
    # integer phase mod n keeps the angle exact for any n
    phase = np.outer(idx, idx) % n
    sign = 1.0 if inverse else -1.0
    kernel = np.exp(sign * 2j * np.pi * phase / n)
    out = v @ kernel.T
    return out / n if inverse else out


def _bit_reverse(n):
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.intp)
    for i in range(n):
        r, x = 0, i
        for _ in range(bits):
            r = (r << 1) | (x & 1)
            x >>= 1
        rev[i] = r
    return rev


def _radix2(a, sign):
    """Unnormalized iterative Cooley-Tukey; ``a.shape[-1]`` must be a power of two."""
    n = a.shape[-1]
    lead = a.shape[:-1]
    a = a[..., _bit_reverse(n)]
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        blocks = a.reshape(lead + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * tw
        a = np.concatenate([even + odd, even - odd], axis=-1).reshape(lead + (n,))
        size *= 2
    return a


def _bluestein(a, sign):
    """Chirp-z evaluation of an arbitrary-length unnormalized DFT."""
    n = a.shape[-1]
    k = np.arange(n)
    # k^2 mod 2n: the chirp has period 2n, so this keeps angles small
    chirp = np.exp(sign * 1j * np.pi * ((k * k) % (2 * n)) / n)
    m = 1
    while m < 2 * n - 1:
        m *= 2
    x = np.zeros(a.shape[:-1] + (m,), dtype=np.complex128)
    x[..., :n] = a * chirp
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[m - n + 1:] = np.conj(chirp[1:])[::-1]
    conv = _radix2(_radix2(x, -1.0) * _radix2(b, -1.0), 1.0) / m
    return conv[..., :n] * chirp


def fft1d(v, inverse=False):
    """FFT along the last axis. Radix-2 for powers of two, Bluestein otherwise."""
    v = np.asarray(v, dtype=np.complex128)
    n = v.shape[-1]
    if n < 1:
        raise ShapeMismatch("transform length must be at least 1")
    sign = 1.0 if inverse else -1.0
    if n == 1:
        out = v.copy()
    elif n & (n - 1) == 0:
        out = _radix2(v, sign)
    else:
        out = _bluestein(v, sign)
    return out / n if inverse else out


def fft_channels(x):
    """1-D FFT of every channel fiber of a ``(B, C, H, W)`` map."""
    x = np.asarray(x, dtype=np.float64)
    return np.moveaxis(fft1d(np.moveaxis(x, 1, -1)), -1, 1)


def rfft2(x):
    """Real 2-D FFT over the last two axes, keeping ``W//2 + 1`` columns."""
    x = np.asarray(x, dtype=np.float64)
    W = x.shape[-1]
    rows = fft1d(x)[..., : W // 2 + 1]
    return np.swapaxes(fft1d(np.swapaxes(rows, -1, -2)), -1, -2)


def rfft2_adjoint(g, H, W):
    """Transpose of ``x -> (Re, Im) of rfft2(x)`` as a real-linear map.

    ``g`` is complex with shape ``(..., H, W//2 + 1)``; its real and
    imaginary planes are the cotangents of the real and imaginary outputs.
    """
    g = np.asarray(g, dtype=np.complex128)
    Wr = W // 2 + 1
    if g.shape[-2:] != (H, Wr):
        raise ShapeMismatch(f"cotangent shape {g.shape[-2:]} does not match ({H}, {Wr})")
    # conj-transposed DFT == unnormalized inverse
    cols = np.swapaxes(fft1d(np.swapaxes(g, -1, -2), inverse=True), -1, -2) * H
    full = np.zeros(g.shape[:-1] + (W,), dtype=np.complex128)
    full[..., :Wr] = cols
    return (fft1d(full, inverse=True) * W).real
