"""Convolutional classifier with explicit forward/backward passes.

Architecture: one convolution whose filters span all input rows and slide
along time, ReLU, average pooling along time, three fully connected ReLU
layers with batch normalization after the first, and a softmax output.
All arithmetic is double precision so gradients can be checked against
central finite differences. Training uses ADAM on the mean multiclass
cross-entropy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .domain import N_LINKS, N_SAMPLES

LOSS_CLAMP = 1e-12


@dataclass(frozen=True)
class NetworkSpec:
    n_classes: int
    input_height: int = N_LINKS
    input_width: int = N_SAMPLES
    n_filters: int = 16
    filter_width: int = 20
    conv_stride: int = 1
    pool_window: int = 10
    pool_stride: int = 10
    fc_widths: tuple = (128, 64, 32)
    batch_norm: bool = True
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.9

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        positive = (
            self.input_height,
            self.input_width,
            self.n_filters,
            self.filter_width,
            self.conv_stride,
            self.pool_window,
            self.pool_stride,
        )
        if any(v < 1 for v in positive):
            raise ValueError("all geometry parameters must be positive")
        if len(self.fc_widths) != 3 or any(w < 1 for w in self.fc_widths):
            raise ValueError("fc_widths must be three positive widths")
        if self.filter_width > self.input_width:
            raise ValueError("filter wider than the input")
        if self.pool_window > self.conv_out_width:
            raise ValueError("pool window wider than the conv output")

    @property
    def conv_out_width(self) -> int:
        return (self.input_width - self.filter_width) // self.conv_stride + 1

    @property
    def pool_out_width(self) -> int:
        return (self.conv_out_width - self.pool_window) // self.pool_stride + 1

    @property
    def flat_dim(self) -> int:
        return self.n_filters * self.pool_out_width


@dataclass
class NetworkParams:
    conv_w: np.ndarray  # (filters, height, filter_width)
    conv_b: np.ndarray
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    bn_scale: np.ndarray
    bn_shift: np.ndarray
    bn_mean: np.ndarray  # running statistics, not trained
    bn_var: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray
    fc3_w: np.ndarray
    fc3_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray


TRAINABLE_FIELDS = (
    "conv_w",
    "conv_b",
    "fc1_w",
    "fc1_b",
    "bn_scale",
    "bn_shift",
    "fc2_w",
    "fc2_b",
    "fc3_w",
    "fc3_b",
    "out_w",
    "out_b",
)


def init_params(spec: NetworkSpec, seed: int = 0) -> NetworkParams:
    """Uniform fan-in-scaled init, deterministic per seed."""
    rng = np.random.default_rng(seed)

    def uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    h1, h2, h3 = spec.fc_widths
    conv_fan = spec.input_height * spec.filter_width
    return NetworkParams(
        conv_w=uniform((spec.n_filters, spec.input_height, spec.filter_width), conv_fan),
        conv_b=np.zeros(spec.n_filters),
        fc1_w=uniform((h1, spec.flat_dim), spec.flat_dim),
        fc1_b=np.zeros(h1),
        bn_scale=np.ones(h1),
        bn_shift=np.zeros(h1),
        bn_mean=np.zeros(h1),
        bn_var=np.ones(h1),
        fc2_w=uniform((h2, h1), h1),
        fc2_b=np.zeros(h2),
        fc3_w=uniform((h3, h2), h2),
        fc3_b=np.zeros(h3),
        out_w=uniform((spec.n_classes, h3), h3),
        out_b=np.zeros(spec.n_classes),
    )


def _conv_windows(spec: NetworkSpec, x):
    """im2col matrix: one row per (batch, output position)."""
    view = np.lib.stride_tricks.sliding_window_view(x, spec.filter_width, axis=2)
    view = view[:, :, :: spec.conv_stride, :]  # (B, H, T, fw)
    b, h, t, fw = view.shape
    return np.ascontiguousarray(view.transpose(0, 2, 1, 3)).reshape(b * t, h * fw), t


def _forward_full(params: NetworkParams, spec: NetworkSpec, x, mode: str):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    b = x.shape[0]
    if x.shape[1:] != (spec.input_height, spec.input_width):
        raise ValueError(
            f"input shape {x.shape[1:]} does not match "
            f"({spec.input_height}, {spec.input_width})"
        )
    if b == 0:
        raise ValueError("batch is empty")
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "train" and spec.batch_norm and b < 2:
        raise ValueError("train mode needs a batch of at least 2 (batch norm)")

    cache = {}
    wmat, t_out = _conv_windows(spec, x)
    f = spec.n_filters
    conv_z = (wmat @ params.conv_w.reshape(f, -1).T).reshape(b, t_out, f)
    conv_z = conv_z.transpose(0, 2, 1) + params.conv_b[None, :, None]
    conv_a = np.maximum(conv_z, 0.0)

    pool_view = np.lib.stride_tricks.sliding_window_view(conv_a, spec.pool_window, axis=2)
    pooled = pool_view[:, :, :: spec.pool_stride, :].mean(axis=3)
    flat = pooled.reshape(b, -1)

    z1 = flat @ params.fc1_w.T + params.fc1_b
    if not spec.batch_norm:
        mu = np.zeros(z1.shape[1])
        var = np.ones(z1.shape[1]) - spec.bn_epsilon  # makes inv_std exactly 1
    elif mode == "train":
        mu = z1.mean(axis=0)
        var = z1.var(axis=0)
    else:
        mu = params.bn_mean
        var = params.bn_var
    inv_std = 1.0 / np.sqrt(var + spec.bn_epsilon)
    xhat = (z1 - mu) * inv_std
    bn_out = params.bn_scale * xhat + params.bn_shift
    a1 = np.maximum(bn_out, 0.0)

    z2 = a1 @ params.fc2_w.T + params.fc2_b
    a2 = np.maximum(z2, 0.0)
    z3 = a2 @ params.fc3_w.T + params.fc3_b
    a3 = np.maximum(z3, 0.0)
    logits = a3 @ params.out_w.T + params.out_b

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)

    cache.update(
        wmat=wmat,
        t_out=t_out,
        conv_z=conv_z,
        conv_a=conv_a,
        flat=flat,
        z1=z1,
        mu=mu,
        var=var,
        inv_std=inv_std,
        xhat=xhat,
        bn_out=bn_out,
        a1=a1,
        z2=z2,
        a2=a2,
        z3=z3,
        a3=a3,
        probs=probs,
        batch=b,
    )
    return probs, cache


def forward(params: NetworkParams, spec: NetworkSpec, x, mode: str = "eval") -> np.ndarray:
    """Class probability rows; train mode normalizes with batch statistics."""
    probs, _ = _forward_full(params, spec, x, mode)
    return probs


def conv_activations(params: NetworkParams, spec: NetworkSpec, x) -> np.ndarray:
    """Post-ReLU convolution maps, shape (batch, filters, time)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    wmat, t_out = _conv_windows(spec, x)
    f = spec.n_filters
    conv_z = (wmat @ params.conv_w.reshape(f, -1).T).reshape(x.shape[0], t_out, f)
    conv_z = conv_z.transpose(0, 2, 1) + params.conv_b[None, :, None]
    return np.maximum(conv_z, 0.0)


def loss(probs, labels) -> float:
    """Mean cross-entropy, probabilities clamped at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[0] != labels.shape[0]:
        raise ValueError("probs must be 2-D with one label per row")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise ValueError("labels out of range")
    picked = probs[np.arange(labels.shape[0]), labels]
    return float(-np.log(np.maximum(picked, LOSS_CLAMP)).mean())


def backward(params: NetworkParams, spec: NetworkSpec, x, labels):
    """Gradients of the mean cross-entropy w.r.t. every trainable tensor."""
    _, cache = _forward_full(params, spec, x, mode="train")
    return _backward_from_cache(params, spec, cache, labels)


def _backward_from_cache(params: NetworkParams, spec: NetworkSpec, cache, labels):
    labels = np.asarray(labels, dtype=np.int64)
    probs = cache["probs"]
    b = cache["batch"]
    if labels.shape[0] != b:
        raise ValueError("one label per batch row required")

    grads = {}
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b

    grads["out_w"] = dlogits.T @ cache["a3"]
    grads["out_b"] = dlogits.sum(axis=0)
    da3 = dlogits @ params.out_w
    dz3 = da3 * (cache["z3"] > 0)

    grads["fc3_w"] = dz3.T @ cache["a2"]
    grads["fc3_b"] = dz3.sum(axis=0)
    da2 = dz3 @ params.fc3_w
    dz2 = da2 * (cache["z2"] > 0)

    grads["fc2_w"] = dz2.T @ cache["a1"]
    grads["fc2_b"] = dz2.sum(axis=0)
    da1 = dz2 @ params.fc2_w
    dbn = da1 * (cache["bn_out"] > 0)

    xhat = cache["xhat"]
    inv_std = cache["inv_std"]
    grads["bn_scale"] = (dbn * xhat).sum(axis=0)
    grads["bn_shift"] = dbn.sum(axis=0)
    dxhat = dbn * params.bn_scale
    if spec.batch_norm:
        # batch-statistics backward: both mean and variance depend on z1
        dz1 = (
            dxhat - dxhat.mean(axis=0) - xhat * (dxhat * xhat).mean(axis=0)
        ) * inv_std
    else:
        dz1 = dxhat * inv_std

    grads["fc1_w"] = dz1.T @ cache["flat"]
    grads["fc1_b"] = dz1.sum(axis=0)
    dflat = dz1 @ params.fc1_w

    dpooled = dflat.reshape(b, spec.n_filters, spec.pool_out_width)
    dconv_a = np.zeros_like(cache["conv_a"])
    share = dpooled / spec.pool_window
    for k in range(spec.pool_window):
        # positions are distinct within one offset, so += accumulates correctly
        positions = k + spec.pool_stride * np.arange(spec.pool_out_width)
        dconv_a[:, :, positions] += share
    dconv_z = dconv_a * (cache["conv_z"] > 0)

    dzmat = dconv_z.transpose(0, 2, 1).reshape(b * cache["t_out"], spec.n_filters)
    grads["conv_w"] = (dzmat.T @ cache["wmat"]).reshape(params.conv_w.shape)
    grads["conv_b"] = dconv_z.sum(axis=(0, 2))
    return grads


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(state: AdamState, params: NetworkParams, grads: dict):
    """One bias-corrected ADAM update; returns (new_params, new_state)."""
    step = state.step + 1
    new_m, new_v, updates = {}, {}, {}
    for name in TRAINABLE_FIELDS:
        g = grads[name]
        p = getattr(params, name)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        m = state.beta1 * state.m.get(name, 0.0) + (1.0 - state.beta1) * g
        v = state.beta2 * state.v.get(name, 0.0) + (1.0 - state.beta2) * g**2
        m_hat = m / (1.0 - state.beta1**step)
        v_hat = v / (1.0 - state.beta2**step)
        updates[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name] = m
        new_v[name] = v
    new_params = replace(params, **updates)
    new_state = AdamState(
        m=new_m, v=new_v, step=step, lr=state.lr, beta1=state.beta1,
        beta2=state.beta2, eps=state.eps,
    )
    return new_params, new_state


def fit_link_scaler(X):
    """Per-link mean/std over a (records, links, time) training tensor."""
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=(0, 2))
    std = X.std(axis=(0, 2))
    std = np.where(std == 0.0, 1.0, std)
    return mean, std


def apply_link_scaler(scaler, X) -> np.ndarray:
    mean, std = scaler
    X = np.asarray(X, dtype=np.float64)
    return (X - mean[None, :, None]) / std[None, :, None]


def train_net(
    spec: NetworkSpec,
    X,
    labels,
    epochs: int = 20,
    batch_size: int = 32,
    seed: int = 0,
    lr: float = 1e-3,
):
    """Train on (records, height, width) inputs with 0-based class labels.

    Deterministic for a fixed seed: init, shuffling and batch order are all
    driven by one RNG. Returns (params, history) where history has one
    (epoch, mean loss, training accuracy) row per epoch.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("training data is empty")
    if len(np.unique(labels)) < 2:
        raise ValueError("training data must contain at least 2 classes")
    if n < 2:
        raise ValueError("need at least 2 records for batch norm")
    params = init_params(spec, seed=seed)
    state = AdamState(lr=lr)
    rng = np.random.default_rng(seed)
    history = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        losses = []
        correct = 0
        counted = 0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            if idx.size < 2:
                continue  # batch norm needs at least 2 rows
            xb, yb = X[idx], labels[idx]
            probs, cache = _forward_full(params, spec, xb, mode="train")
            losses.append(loss(probs, yb))
            correct += int((probs.argmax(axis=1) == yb).sum())
            counted += idx.size
            if spec.batch_norm:
                mom = spec.bn_momentum
                params.bn_mean = mom * params.bn_mean + (1.0 - mom) * cache["mu"]
                params.bn_var = mom * params.bn_var + (1.0 - mom) * cache["var"]
            grads = _backward_from_cache(params, spec, cache, yb)
            params, state = adam_step(state, params, grads)
        epoch_loss = float(np.mean(losses)) if losses else float("nan")
        if losses and not np.isfinite(epoch_loss):
            raise FloatingPointError(f"training loss diverged at epoch {epoch}")
        history.append(
            {
                "epoch": epoch,
                "loss": epoch_loss,
                "train_acc": correct / counted if counted else float("nan"),
            }
        )
    return params, history


def predict_net(params: NetworkParams, spec: NetworkSpec, X) -> np.ndarray:
    """0-based label predictions in eval mode."""
    probs = forward(params, spec, X, mode="eval")
    return probs.argmax(axis=1)


def save_params(params: NetworkParams, spec: NetworkSpec, path) -> None:
    spec_json = json.dumps(
        {f.name: getattr(spec, f.name) for f in fields(spec)}, default=list
    )
    arrays = {f.name: getattr(params, f.name) for f in fields(params)}
    np.savez(path, format_version=1, spec=spec_json, **arrays)


def load_params(path):
    data = np.load(path, allow_pickle=False)
    if int(data["format_version"]) != 1:
        raise ValueError(f"{path}: unsupported parameter dump version")
    spec_obj = json.loads(str(data["spec"]))
    spec_obj["fc_widths"] = tuple(spec_obj["fc_widths"])
    spec = NetworkSpec(**spec_obj)
    params = NetworkParams(**{f.name: data[f.name] for f in fields(NetworkParams)})
    return params, spec
