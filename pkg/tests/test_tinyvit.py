import math

import numpy as np
import pytest

from specdistill.distill import DistillConfig
from specdistill.exceptions import ConfigError, ShapeMismatch
from specdistill.spectral import LayerSelection
from specdistill.tinyvit.data import synth_dataset
from specdistill.tinyvit.model import ModelConfig, backward, forward, init_params, param_shapes
from specdistill.tinyvit.optim import AdamState, adamw_step
from specdistill.tinyvit.prng import normals, permutation, prng_next, uniforms
from specdistill.tinyvit.train import alignment_loss, train

SMALL = ModelConfig(embed_dim=4, depth=2, heads=2, class_count=5, seed=3)


# ---------------------------------------------------------------- prng

def test_splitmix_reference_value():
    assert prng_next(0)[1] == 0xE220A8397B1DCDAF


def test_vectorized_stream_matches_scalar():
    state, out = 12345, []
    for _ in range(10):
        state, z = prng_next(state)
        out.append(z)
    s2, u = uniforms(12345, 10)
    assert s2 == state
    assert [int(v * 2.0**53) for v in u] == [z >> 11 for z in out]


def test_distinct_seeds():
    assert prng_next(1)[1] != prng_next(2)[1]


def test_uniform_mean():
    _, u = uniforms(99, 100_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    # sd of the mean is 1/sqrt(12 * 1e5) ~ 9e-4, so 0.01 is > 10 sigma
    assert abs(u.mean() - 0.5) < 0.01


def test_normals_moments():
    _, g = normals(5, 50_000)
    assert abs(g.mean()) < 0.03 and abs(g.std() - 1.0) < 0.03


def test_permutation_is_permutation():
    _, p = permutation(7, 50)
    assert sorted(p.tolist()) == list(range(50))


# ---------------------------------------------------------------- data

def test_dataset_deterministic():
    a, la = synth_dataset(3, 40)
    b, lb = synth_dataset(3, 40)
    assert a.tobytes() == b.tobytes() and np.array_equal(la, lb)
    assert la.tolist()[:12] == [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 0, 1]


def test_class_zero_grating_is_constant_along_columns():
    x, _ = synth_dataset(0, 1, noise=0.0)
    assert np.all(x[0] == x[0][:, :1])
    expect = np.sin(2 * np.pi * 3 * np.arange(16) / 16)
    assert np.allclose(x[0][:, 0], expect, atol=1e-15)


def test_untrained_accuracy_near_chance():
    # One class is one orientation, so a single untrained net scores in
    # coarse ~10% steps; the chance level holds for the mean over inits.
    x, y = synth_dataset(21, 1000)
    accs = []
    for seed in range(20):
        cfg = ModelConfig(embed_dim=16, depth=4, heads=2, seed=seed)
        logits, _ = forward(init_params(cfg), x, cfg)
        accs.append(np.mean(logits.argmax(1) == y))
    assert abs(np.mean(accs) - 0.10) <= 0.03


# ---------------------------------------------------------------- model

def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(image_size=15)
    with pytest.raises(ConfigError):
        ModelConfig(embed_dim=10, heads=3)


def test_dead_network_outputs_head_bias():
    cfg = ModelConfig(embed_dim=8, depth=2, heads=2)
    params = {k: np.zeros(s) for k, s in param_shapes(cfg).items()}
    params["head_b"] = np.arange(10.0)
    x, _ = synth_dataset(1, 3)
    logits, _ = forward(params, x, cfg)
    assert np.array_equal(logits, np.tile(np.arange(10.0), (3, 1)))


def test_batch_permutation_equivariance():
    params = init_params(SMALL)
    x, _ = synth_dataset(2, 6)
    perm = [3, 0, 5, 1, 4, 2]
    a, _ = forward(params, x, SMALL)
    b, _ = forward(params, x[perm], SMALL)
    assert np.allclose(a[perm], b, rtol=0, atol=1e-13)


def _scalar_forward(params, image, cfg):
    """Straight-line recomputation with Python floats, one token at a time."""
    p, S = cfg.patch_size, cfg.image_size
    g = S // p
    D = cfg.embed_dim
    P = lambda name: params[name].tolist()

    def matvec(v, W, b):
        return [sum(v[i] * W[i][j] for i in range(len(v))) + b[j] for j in range(len(b))]

    def ln(v, gain, bias):
        mu = sum(v) / len(v)
        var = sum((x - mu) ** 2 for x in v) / len(v)
        return [(x - mu) / math.sqrt(var + 1e-6) * gain[i] + bias[i] for i, x in enumerate(v)]

    toks = []
    for r in range(g):
        for c in range(g):
            patch = [image[r * p + i][c * p + j] for i in range(p) for j in range(p)]
            e = matvec(patch, P("patch_w"), P("patch_b"))
            toks.append([e[d] + P("pos")[len(toks)][d] for d in range(D)])
    for l in range(cfg.depth):
        pre = f"blocks.{l}."
        a = [ln(t, P(pre + "ln1_g"), P(pre + "ln1_b")) for t in toks]
        qkv = [matvec(t, P(pre + "qkv_w"), P(pre + "qkv_b")) for t in a]
        dh = D // cfg.heads
        o = [[0.0] * D for _ in toks]
        for h in range(cfg.heads):
            sl = range(h * dh, (h + 1) * dh)
            for n in range(len(toks)):
                s = [sum(qkv[n][i] * qkv[m][D + i] for i in sl) / math.sqrt(dh) for m in range(len(toks))]
                mx = max(s)
                w = [math.exp(v - mx) for v in s]
                z = sum(w)
                for i in sl:
                    o[n][i] = sum(w[m] / z * qkv[m][2 * D + i] for m in range(len(toks)))
        proj = [matvec(v, P(pre + "proj_w"), P(pre + "proj_b")) for v in o]
        toks = [[t[d] + pr[d] for d in range(D)] for t, pr in zip(toks, proj)]
        m = [ln(t, P(pre + "ln2_g"), P(pre + "ln2_b")) for t in toks]
        hid = [[0.5 * u * (1 + math.erf(u / math.sqrt(2))) for u in matvec(v, P(pre + "fc1_w"), P(pre + "fc1_b"))]
               for v in m]
        out = [matvec(v, P(pre + "fc2_w"), P(pre + "fc2_b")) for v in hid]
        toks = [[t[d] + ou[d] for d in range(D)] for t, ou in zip(toks, out)]
    f = [ln(t, P("ln_f_g"), P("ln_f_b")) for t in toks]
    pooled = [sum(t[d] for t in f) / len(f) for d in range(D)]
    return matvec(pooled, P("head_w"), P("head_b"))


def test_forward_matches_straight_line_oracle():
    cfg = ModelConfig(image_size=4, patch_size=2, embed_dim=2, depth=1, heads=1, class_count=3, seed=4)
    params = init_params(cfg)
    rng = np.random.default_rng(0)
    params = {k: v + 0.3 * rng.normal(size=v.shape) for k, v in params.items()}
    img = rng.normal(size=(1, 4, 4))
    logits, _ = forward(params, img, cfg)
    ref = _scalar_forward(params, img[0].tolist(), cfg)
    assert np.max(np.abs(logits[0] - ref)) <= 1e-12


def _perturbed(cfg, seed):
    rng = np.random.default_rng(seed)
    return {k: v + 0.1 * rng.normal(size=v.shape) for k, v in init_params(cfg).items()}


def _fd_check(params, loss, grads, rng, per_tensor=10):
    worst, checked = 0.0, 0
    for name, p in params.items():
        scale = max(1e-2 * np.max(np.abs(grads[name])), 1e-9)
        for _ in range(per_tensor):
            i = tuple(int(rng.integers(0, s)) for s in p.shape)
            x = p[i]
            h = 1e-6 * max(1.0, abs(x))
            p[i] = x + h
            fp = loss(params)
            p[i] = x - h
            fm = loss(params)
            p[i] = x
            n = (fp - fm) / (2 * h)
            a = grads[name][i]
            worst = max(worst, abs(a - n) / max(abs(a), abs(n), scale))
            checked += 1
    return worst, checked


def test_backward_zero_cotangents():
    params = init_params(SMALL)
    x, _ = synth_dataset(0, 2)
    _, cache = forward(params, x, SMALL)
    grads = backward(params, cache, np.zeros((2, 5)), SMALL, {1: np.zeros((2, 16, 4))})
    assert all(np.all(g == 0) for g in grads.values())


def test_backward_layer_locality():
    params = _perturbed(SMALL, 1)
    x, _ = synth_dataset(0, 3)
    _, cache = forward(params, x, SMALL)
    fg = {1: np.random.default_rng(2).normal(size=(3, 16, 4))}
    grads = backward(params, cache, np.zeros((3, 5)), SMALL, fg)
    for name, g in grads.items():
        above = name.startswith("blocks.1.") or name.startswith(("ln_f", "head"))
        if above:
            assert np.all(g == 0), name
    assert np.any(grads["blocks.0.fc2_w"] != 0)


def test_backward_shape_checks():
    params = init_params(SMALL)
    x, _ = synth_dataset(0, 2)
    _, cache = forward(params, x, SMALL)
    with pytest.raises(ShapeMismatch):
        backward(params, cache, np.zeros((2, 4)), SMALL)
    with pytest.raises(ShapeMismatch):
        backward(params, cache, np.zeros((2, 5)), SMALL, {3: np.zeros((2, 16, 4))})


@pytest.mark.parametrize("with_features", [False, True])
def test_backward_finite_differences(with_features):
    params = _perturbed(SMALL, 5)
    rng = np.random.default_rng(6)
    x = rng.normal(size=(3, 16, 16))
    wl = rng.normal(size=(3, 5))
    fg = {1: rng.normal(size=(3, 16, 4)), 2: rng.normal(size=(3, 16, 4))} if with_features else {}

    def loss(p):
        logits, cache = forward(p, x, SMALL)
        return np.sum(wl * logits) + sum(np.sum(g * cache["features"][k - 1]) for k, g in fg.items())

    _, cache = forward(params, x, SMALL)
    grads = backward(params, cache, wl, SMALL, fg)
    worst, checked = _fd_check(params, loss, grads, rng)
    assert checked >= 200
    assert worst <= 1e-5


# ---------------------------------------------------------------- optimizer

def test_adamw_zero_grad_no_decay_is_identity():
    p = {"w": np.array([1.0, -2.0])}
    out, st = adamw_step(p, {"w": np.zeros(2)}, AdamState(), 0.1, weight_decay=0.0)
    assert np.array_equal(out["w"], p["w"]) and st.step == 1


def test_adamw_first_step_is_signed_lr():
    p = {"w": np.array([0.5, 0.5, 0.5])}
    g = {"w": np.array([3.0, -0.2, 1e-3])}
    out, _ = adamw_step(p, g, AdamState(), 0.01, weight_decay=0.0)
    assert np.allclose(out["w"] - p["w"], -0.01 * np.sign(g["w"]), rtol=1e-4)


def test_adamw_no_decay_names():
    p = {"w": np.ones(2), "b": np.ones(2)}
    z = {"w": np.zeros(2), "b": np.zeros(2)}
    out, _ = adamw_step(p, z, AdamState(), 0.1, weight_decay=0.5, no_decay={"b"})
    assert np.allclose(out["w"], 0.95) and np.array_equal(out["b"], p["b"])


def test_adamw_converges_on_quadratic():
    A = np.diag([1.0, 10.0])
    target = np.array([1.0, -2.0])
    f = lambda w: 0.5 * (w - target) @ A @ (w - target)
    p, st = {"w": np.array([3.0, 3.0])}, AdamState()
    for i in range(100):
        lr = 0.2 * 0.98**i
        p, st = adamw_step(p, {"w": A @ (p["w"] - target)}, st, lr, weight_decay=0.0)
    assert f(p["w"]) < 1e-3


# ---------------------------------------------------------------- training

@pytest.fixture(scope="module")
def tiny_data():
    return synth_dataset(4, 96)


def test_zero_epochs_returns_initial(tiny_data):
    params = init_params(SMALL)
    out, run = train(params, SMALL, *tiny_data, epochs=0, lr=1e-3)
    assert all(np.array_equal(out[k], params[k]) for k in params)
    assert run.history == []


def test_training_is_deterministic(tiny_data):
    cfg = ModelConfig(embed_dim=8, depth=2, heads=2, seed=2)
    a, ra = train(init_params(cfg), cfg, *tiny_data, epochs=2, lr=1e-3, batch_size=32, seed=9)
    b, rb = train(init_params(cfg), cfg, *tiny_data, epochs=2, lr=1e-3, batch_size=32, seed=9)
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)
    assert ra.history == rb.history


def test_zero_alpha_beta_reduces_to_cross_entropy(tiny_data):
    t_cfg = ModelConfig(embed_dim=8, depth=4, heads=2, seed=1)
    s_cfg = ModelConfig(embed_dim=4, depth=2, heads=2, seed=2)
    teacher = (init_params(t_cfg), t_cfg)
    plan = LayerSelection((1, 4), (1, 2))
    kw = dict(epochs=2, lr=1e-3, batch_size=32, seed=5)
    plain, _ = train(init_params(s_cfg), s_cfg, *tiny_data, **kw)
    zero, _ = train(init_params(s_cfg), s_cfg, *tiny_data, teacher=teacher, plan=plan,
                    distill=DistillConfig(alpha=0.0, beta=0.0), **kw)
    assert all(np.array_equal(plain[k], zero[k]) for k in plain)


def test_distillation_reduces_alignment_loss(tiny_data):
    t_cfg = ModelConfig(embed_dim=8, depth=4, heads=2, seed=1)
    s_cfg = ModelConfig(embed_dim=4, depth=2, heads=2, seed=2)
    t_params, _ = train(init_params(t_cfg), t_cfg, *tiny_data, epochs=2, lr=3e-3, batch_size=32)
    plan = LayerSelection((1, 4), (1, 2))
    x = tiny_data[0][:32]
    s0 = init_params(s_cfg)
    before = alignment_loss((s0, s_cfg), (t_params, t_cfg), plan, x)
    s1, run = train(s0, s_cfg, *tiny_data, epochs=4, lr=3e-3, batch_size=32,
                    teacher=(t_params, t_cfg), plan=plan, distill=DistillConfig())
    after = alignment_loss((s1, s_cfg), (t_params, t_cfg), plan, x)
    assert after < before
    assert run.history[-1].l_fft < run.history[0].l_fft
