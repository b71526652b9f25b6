"""A small pre-LN vision transformer with hand-written backpropagation.

Images are cut into square patches, linearly embedded, given learned
position embeddings and passed through ``depth`` blocks of

    h <- h + MHSA(LN(h));  h <- h + MLP(LN(h))

with a GELU MLP. There is no class token: the final LayerNorm output is
mean-pooled over tokens before the linear head, so every token keeps a
spatial position. The output of each block (after its second residual
add) is cached as that layer's feature map.
"""

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import erf

from ..exceptions import ConfigError, ShapeMismatch
from .prng import normals

LN_EPS = 1e-6
_SQRT1_2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 16
    patch_size: int = 4
    embed_dim: int = 16
    depth: int = 4
    heads: int = 2
    mlp_ratio: int = 4
    class_count: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.image_size % self.patch_size:
            raise ConfigError("image_size must be divisible by patch_size")
        if self.embed_dim % self.heads:
            raise ConfigError("embed_dim must be divisible by heads")
        if min(self.depth, self.heads, self.embed_dim, self.mlp_ratio, self.patch_size) < 1:
            raise ConfigError("depth, heads, embed_dim, mlp_ratio and patch_size must be >= 1")
        if self.class_count < 2:
            raise ConfigError("class_count must be at least 2")

    @property
    def grid(self):
        return self.image_size // self.patch_size

    @property
    def tokens(self):
        return self.grid * self.grid

    def to_dict(self):
        return asdict(self)


def param_shapes(cfg):
    """Ordered ``{name: shape}`` for every parameter tensor."""
    D, P = cfg.embed_dim, cfg.patch_size * cfg.patch_size
    Hd = cfg.mlp_ratio * D
    shapes = {"patch_w": (P, D), "patch_b": (D,), "pos": (cfg.tokens, D)}
    for l in range(cfg.depth):
        p = f"blocks.{l}."
        shapes.update({
            p + "ln1_g": (D,), p + "ln1_b": (D,),
            p + "qkv_w": (D, 3 * D), p + "qkv_b": (3 * D,),
            p + "proj_w": (D, D), p + "proj_b": (D,),
            p + "ln2_g": (D,), p + "ln2_b": (D,),
            p + "fc1_w": (D, Hd), p + "fc1_b": (Hd,),
            p + "fc2_w": (Hd, D), p + "fc2_b": (D,),
        })
    shapes.update({"ln_f_g": (D,), "ln_f_b": (D,),
                   "head_w": (D, cfg.class_count), "head_b": (cfg.class_count,)})
    return shapes


def init_params(cfg):
    """DeiT-style initialization, deterministic in ``cfg.seed``.

    Linear weights and position embeddings ~ N(0, 0.02^2) truncated at two
    standard deviations; the patch embedding keeps the convolution default
    scale (std ``1/sqrt(3 * fan_in)``). Biases zero, LayerNorm gains one.
    """
    state = cfg.seed
    params = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf.endswith("_g"):
            params[name] = np.ones(shape)
        elif leaf.endswith("_b"):
            params[name] = np.zeros(shape)
        else:
            state, g = normals(state, int(np.prod(shape)))
            std = 1.0 / np.sqrt(3.0 * shape[0]) if leaf == "patch_w" else 0.02
            params[name] = std * np.clip(g, -2.0, 2.0).reshape(shape)
    return params


def patchify(images, patch_size):
    """``(B, S, S)`` images to ``(B, N, p*p)`` patches in row-major patch order."""
    B, S, _ = images.shape
    g = S // patch_size
    x = images.reshape(B, g, patch_size, g, patch_size).transpose(0, 1, 3, 2, 4)
    return x.reshape(B, g * g, patch_size * patch_size)


def gelu(x):
    return 0.5 * x * (1.0 + erf(x * _SQRT1_2))


def _gelu_grad(x):
    return 0.5 * (1.0 + erf(x * _SQRT1_2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _ln_forward(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    rstd = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = xc * rstd
    return xhat * g + b, (xhat, rstd)


def _ln_backward(dy, g, cache):
    xhat, rstd = cache
    dg = np.sum(dy * xhat, axis=tuple(range(dy.ndim - 1)))
    db = np.sum(dy, axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    dx = rstd * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                 - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dg, db


def _split_heads(x, heads):
    B, N, D = x.shape
    return x.reshape(B, N, heads, D // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    B, Hh, N, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, N, Hh * dh)


def forward(params, images, cfg):
    """Return ``(logits, cache)``; ``cache["features"][l]`` is block ``l+1``'s output."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3 or images.shape[1:] != (cfg.image_size, cfg.image_size):
        raise ShapeMismatch(f"images must be (B, {cfg.image_size}, {cfg.image_size}), got {images.shape}")
    D, heads = cfg.embed_dim, cfg.heads
    scale = 1.0 / np.sqrt(D // heads)
    patches = patchify(images, cfg.patch_size)
    h = patches @ params["patch_w"] + params["patch_b"] + params["pos"]
    blocks, features = [], []
    for l in range(cfg.depth):
        p = f"blocks.{l}."
        c = {"h_in": h}
        a, c["ln1"] = _ln_forward(h, params[p + "ln1_g"], params[p + "ln1_b"])
        c["a"] = a
        qkv = a @ params[p + "qkv_w"] + params[p + "qkv_b"]
        q, k, v = (_split_heads(qkv[..., i * D:(i + 1) * D], heads) for i in range(3))
        s = (q @ k.transpose(0, 1, 3, 2)) * scale
        s = s - s.max(axis=-1, keepdims=True)
        e = np.exp(s)
        att = e / e.sum(axis=-1, keepdims=True)
        o = _merge_heads(att @ v)
        c.update(q=q, k=k, v=v, att=att, o=o)
        h1 = h + o @ params[p + "proj_w"] + params[p + "proj_b"]
        m, c["ln2"] = _ln_forward(h1, params[p + "ln2_g"], params[p + "ln2_b"])
        c["m"] = m
        u = m @ params[p + "fc1_w"] + params[p + "fc1_b"]
        gu = gelu(u)
        c.update(u=u, gu=gu)
        h = h1 + gu @ params[p + "fc2_w"] + params[p + "fc2_b"]
        blocks.append(c)
        features.append(h)
    f, ln_f = _ln_forward(h, params["ln_f_g"], params["ln_f_b"])
    pooled = f.mean(axis=1)
    logits = pooled @ params["head_w"] + params["head_b"]
    cache = {"patches": patches, "blocks": blocks, "features": features,
             "ln_f": ln_f, "pooled": pooled}
    return logits, cache


def backward(params, cache, logit_grad, cfg, feature_grads=None):
    """Reverse-mode gradients of a scalar loss.

    ``logit_grad`` is d loss / d logits. ``feature_grads`` maps a 1-based
    layer index to d loss / d (that block's output token map), added
    where the forward pass read the block output.
    """
    feature_grads = feature_grads or {}
    B, N = cache["patches"].shape[:2]
    D, heads = cfg.embed_dim, cfg.heads
    scale = 1.0 / np.sqrt(D // heads)
    logit_grad = np.asarray(logit_grad, dtype=np.float64)
    if logit_grad.shape != (B, cfg.class_count):
        raise ShapeMismatch(f"logit_grad must be ({B}, {cfg.class_count}), got {logit_grad.shape}")
    for k, g in feature_grads.items():
        if not 1 <= k <= cfg.depth or np.shape(g) != (B, N, D):
            raise ShapeMismatch(f"feature gradient for layer {k} has shape {np.shape(g)}, "
                                f"expected ({B}, {N}, {D}) at a layer in [1, {cfg.depth}]")
    grads = {}
    grads["head_w"] = cache["pooled"].T @ logit_grad
    grads["head_b"] = logit_grad.sum(axis=0)
    df = np.broadcast_to((logit_grad @ params["head_w"].T)[:, None, :] / N, (B, N, D))
    dh, grads["ln_f_g"], grads["ln_f_b"] = _ln_backward(df, params["ln_f_g"], cache["ln_f"])
    for l in reversed(range(cfg.depth)):
        if l + 1 in feature_grads:
            dh = dh + feature_grads[l + 1]
        p, c = f"blocks.{l}.", cache["blocks"][l]
        # MLP branch
        grads[p + "fc2_w"] = np.einsum("bni,bnj->ij", c["gu"], dh)
        grads[p + "fc2_b"] = dh.sum(axis=(0, 1))
        du = (dh @ params[p + "fc2_w"].T) * _gelu_grad(c["u"])
        grads[p + "fc1_w"] = np.einsum("bni,bnj->ij", c["m"], du)
        grads[p + "fc1_b"] = du.sum(axis=(0, 1))
        dm = du @ params[p + "fc1_w"].T
        dx, grads[p + "ln2_g"], grads[p + "ln2_b"] = _ln_backward(dm, params[p + "ln2_g"], c["ln2"])
        dh1 = dh + dx
        # attention branch
        grads[p + "proj_w"] = np.einsum("bni,bnj->ij", c["o"], dh1)
        grads[p + "proj_b"] = dh1.sum(axis=(0, 1))
        do = _split_heads(dh1 @ params[p + "proj_w"].T, heads)
        datt = do @ c["v"].transpose(0, 1, 3, 2)
        dv = c["att"].transpose(0, 1, 3, 2) @ do
        ds = c["att"] * (datt - np.sum(datt * c["att"], axis=-1, keepdims=True)) * scale
        dq = ds @ c["k"]
        dk = ds.transpose(0, 1, 3, 2) @ c["q"]
        dqkv = np.concatenate([_merge_heads(dq), _merge_heads(dk), _merge_heads(dv)], axis=-1)
        grads[p + "qkv_w"] = np.einsum("bni,bnj->ij", c["a"], dqkv)
        grads[p + "qkv_b"] = dqkv.sum(axis=(0, 1))
        da = dqkv @ params[p + "qkv_w"].T
        dx, grads[p + "ln1_g"], grads[p + "ln1_b"] = _ln_backward(da, params[p + "ln1_g"], c["ln1"])
        dh = dh1 + dx
    grads["pos"] = dh.sum(axis=0)
    grads["patch_b"] = dh.sum(axis=(0, 1))
    grads["patch_w"] = np.einsum("bni,bnj->ij", cache["patches"], dh)
    return {name: grads[name] for name in params}
