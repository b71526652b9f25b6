"""Feature-map containers and NPY v1.0 reading/writing.

Feature maps are plain float64 ``numpy.ndarray`` objects:

* rank 4, ``(batch, channel, height, width)`` for spatial maps;
* rank 3, ``(batch, tokens, channel)`` for transformer token dumps.

Arrays returned by :func:`load_npy` are read-only.
"""

import ast
import os
import re
import struct

import numpy as np

from .exceptions import (
    BadMagic,
    FortranOrderUnsupported,
    NonFiniteValue,
    ShapeMismatch,
    TruncatedPayload,
    UnsupportedDtype,
)

MAGIC = b"\x93NUMPY"
_ALIGN = 64
_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}
_LAYER_RE = re.compile(r"^layer_(\d+)\.npy$")


def _parse_header(raw, path):
    if raw[:6] != MAGIC:
        raise BadMagic(f"{path}: not an NPY file")
    if len(raw) < 10:
        raise TruncatedPayload(f"{path}: header preamble truncated")
    major, minor = raw[6], raw[7]
    if (major, minor) != (1, 0):
        raise BadMagic(f"{path}: NPY version {major}.{minor} unsupported, need 1.0")
    (hlen,) = struct.unpack("<H", raw[8:10])
    if len(raw) < 10 + hlen:
        raise TruncatedPayload(f"{path}: header truncated")
    try:
        header = ast.literal_eval(raw[10:10 + hlen].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise BadMagic(f"{path}: unparseable header") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise BadMagic(f"{path}: header must hold descr, fortran_order and shape")
    return header, 10 + hlen


def read_array(path, ranks=None):
    """Read an NPY v1.0 file holding little-endian f4/f8 data as float64.

    ``ranks`` restricts the accepted number of dimensions; ``None`` accepts any.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    header, offset = _parse_header(raw, path)
    descr = header["descr"]
    if descr not in _DTYPES:
        raise UnsupportedDtype(f"{path}: dtype {descr!r} unsupported, need '<f4' or '<f8'")
    if header["fortran_order"]:
        raise FortranOrderUnsupported(f"{path}: fortran_order=True is not supported")
    shape = tuple(header["shape"])
    if ranks is not None and len(shape) not in ranks:
        raise ShapeMismatch(f"{path}: rank {len(shape)} array, expected rank in {sorted(ranks)}")
    dtype = _DTYPES[descr]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    payload = raw[offset:]
    if len(payload) != expected:
        raise TruncatedPayload(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape).astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{path}: contains NaN or Inf")
    arr.flags.writeable = False
    return arr


def load_npy(path):
    """Load a rank-3 token map or rank-4 feature map from an NPY file."""
    return read_array(path, ranks=(3, 4))


def npy_header(shape):
    """Return the full NPY v1.0 header (preamble included) for a C-order f8 array."""
    shape = tuple(int(s) for s in shape)
    d = "{'descr': '<f8', 'fortran_order': False, 'shape': %r, }" % (shape,)
    pad = -(10 + len(d) + 1) % _ALIGN
    body = (d + " " * pad + "\n").encode("latin1")
    return MAGIC + bytes([1, 0]) + struct.pack("<H", len(body)) + body


def save_npy(t, path):
    arr = np.ascontiguousarray(t, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(npy_header(arr.shape))
        fh.write(arr.tobytes(order="C"))


def as_feature_map(x, name="feature map"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or min(x.shape) < 1:
        raise ShapeMismatch(f"{name} must have shape (B, C, H, W), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue(f"{name} contains NaN or Inf")
    return x


def tokens_to_spatial(t, H, W, drop_class=False):
    """Rearrange a ``(B, N, C)`` token map into a ``(B, C, H, W)`` feature map.

    Token ``n`` lands at row ``n // W``, column ``n % W``. With ``drop_class``
    the first token is discarded and ``N`` must be ``H*W + 1``.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3:
        raise ShapeMismatch(f"token map must have shape (B, N, C), got {t.shape}")
    B, N, C = t.shape
    want = H * W + (1 if drop_class else 0)
    if N != want:
        raise ShapeMismatch(
            f"{N} tokens cannot form a {H}x{W} grid"
            + (" plus class token" if drop_class else "")
        )
    if drop_class:
        t = t[:, 1:, :]
    return np.ascontiguousarray(t.transpose(0, 2, 1).reshape(B, C, H, W))


def spatial_to_tokens(x):
    """Inverse of :func:`tokens_to_spatial` without a class token."""
    x = np.asarray(x)
    B, C, H, W = x.shape
    return np.ascontiguousarray(x.reshape(B, C, H * W).transpose(0, 2, 1))


def parse_grid(spec):
    """Parse ``"HxW"`` into ``(H, W)``."""
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", spec)
    if not m or int(m.group(1)) < 1 or int(m.group(2)) < 1:
        raise ValueError(f"grid must look like HxW, got {spec!r}")
    return int(m.group(1)), int(m.group(2))


def layer_filename(k):
    return f"layer_{k:03d}.npy"


def list_layer_files(directory):
    """Return ``[(k, path), ...]`` for every ``layer_<k>.npy`` in ``directory``, sorted by k."""
    found = []
    for name in os.listdir(directory):
        m = _LAYER_RE.match(name)
        if m:
            found.append((int(m.group(1)), os.path.join(directory, name)))
    return sorted(found)
