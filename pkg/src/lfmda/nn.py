"""A minimal numpy CNN with hand-written backward passes and the source-only training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .arch import ModelSpec
from .errors import DimensionError, TrainingError
from .filters import PaddingMode, pad_planes, output_size
from .lfm import lfm_backward, lfm_forward, rsl_block_backward, rsl_block_forward

log = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


def conv3x3_forward(x, w, b, stride=1):
    """3x3 cross-correlation with zero padding 1. Returns (out, cache)."""
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise DimensionError(f"conv3x3: input {x.shape} incompatible with weights {w.shape}")
    h, wd = x.shape[2:]
    xp = pad_planes(x, 1, PaddingMode.ZERO)
    out = _kernels.conv_forward(xp, w, b, stride, output_size(h, stride), output_size(wd, stride))
    return out, (xp, w, stride)


def conv3x3_backward(gout, cache):
    xp, w, stride = cache
    dxp, dw, db = _kernels.conv_backward(xp, w, gout, stride)
    return dxp[:, :, 1:-1, 1:-1], dw, db


def relu_forward(x):
    return np.maximum(x, 0), x > 0


def relu_backward(gout, mask):
    return gout * mask


def gap_forward(x):
    if x.ndim != 4:
        raise DimensionError(f"gap expects (N, C, H, W), got {x.shape}")
    return x.mean(axis=(2, 3)), x.shape


def gap_backward(gout, shape):
    n, c, h, w = shape
    return np.broadcast_to((gout / (h * w))[:, :, None, None], shape).copy()


def linear_forward(x, w, b):
    if x.ndim != 2 or x.shape[1] != w.shape[1]:
        raise DimensionError(f"linear: input {x.shape} incompatible with weights {w.shape}")
    return x @ w.T + b, x


def linear_backward(gout, x, w):
    return gout @ w, gout.T @ x, gout.sum(axis=0)


def softmax_ce_forward(logits, labels):
    """Mean cross-entropy over the batch. Returns (loss, probs)."""
    if logits.ndim != 2 or logits.shape[1] == 0:
        raise ValueError("softmax needs a non-empty class dimension")
    labels = np.asarray(labels)
    if labels.shape != (logits.shape[0],):
        raise DimensionError(f"labels shape {labels.shape} does not match batch {logits.shape[0]}")
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    logp = z - logsum[:, None]
    loss = -logp[np.arange(len(labels)), labels].mean()
    return float(loss), np.exp(logp)


def softmax_ce_backward(probs, labels):
    g = probs.copy()
    g[np.arange(len(labels)), labels] -= 1.0
    return g / len(labels)


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


class Model:
    """Parameters plus the ModelSpec that says how to run them."""

    def __init__(self, spec: ModelSpec, params: dict, rng_seed: int = 0):
        spec.validate()
        self.spec = spec
        self.rng_seed = int(rng_seed)
        self.params = {}
        for name, layer in spec.param_layers():
            for pname, shape in layer.param_shapes().items():
                key = f"{name}.{pname}"
                arr = np.asarray(params[key])
                if arr.shape != shape:
                    raise DimensionError(f"{key}: expected shape {shape}, got {arr.shape}")
                self.params[key] = arr
        extra = set(params) - set(self.params)
        if extra:
            raise DimensionError(f"unexpected parameters: {sorted(extra)}")

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def astype(self, dtype) -> "Model":
        return Model(self.spec, {k: v.astype(dtype) for k, v in self.params.items()}, self.rng_seed)

    def with_input_norm(self, mean: float, std: float) -> "Model":
        return Model(replace(self.spec, input_norm=(float(mean), float(std))), self.params, self.rng_seed)

    def copy(self) -> "Model":
        return Model(self.spec, {k: v.copy() for k, v in self.params.items()}, self.rng_seed)

    def _prep(self, x):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 3:
            x = x[:, None]
        if x.shape[1:] != tuple(self.spec.input_shape):
            raise DimensionError(f"input shape {x.shape[1:]} != spec input {tuple(self.spec.input_shape)}")
        mean, std = self.spec.input_norm
        if (mean, std) != (0.0, 1.0):
            x = (x - x.dtype.type(mean)) / x.dtype.type(std)
        return x

    def forward(self, x, upto_gap: bool = False, keep_cache: bool = False):
        """Logits for a batch (N, C, H, W) or (N, H, W); with ``upto_gap`` the pooled features."""
        h = self._prep(x)
        caches = []
        names = iter(self.spec.param_layers())
        cfg = self.spec.lfm_config
        for layer in self.spec.stages:
            if layer.kind == "conv3x3":
                name, _ = next(names)
                h, c = conv3x3_forward(h, self.params[f"{name}.weight"], self.params[f"{name}.bias"], layer.stride)
            elif layer.kind == "rsl_block":
                name, _ = next(names)
                c = (h, name)
                h = rsl_block_forward(h, self.params[f"{name}.weight"], cfg.with_stride(2),
                                      self.params[f"{name}.bias"])
            elif layer.kind == "relu":
                h, c = relu_forward(h)
            elif layer.kind == "lfm":
                c = h.shape
                h = lfm_forward(h, cfg.with_stride(layer.stride))
            elif layer.kind == "gap":
                h, c = gap_forward(h)
                if upto_gap:
                    return h
            else:  # linear
                name, _ = next(names)
                h, c = linear_forward(h, self.params[f"{name}.weight"], self.params[f"{name}.bias"])
            if keep_cache:
                caches.append(c)
        return (h, caches) if keep_cache else h

    def features(self, x):
        return self.forward(x, upto_gap=True)

    def loss_and_grads(self, x, labels):
        logits, caches = self.forward(x, keep_cache=True)
        loss, probs = softmax_ce_forward(logits, labels)
        g = softmax_ce_backward(probs, labels)
        grads = {}
        names = [n for n, _ in self.spec.param_layers()]
        cfg = self.spec.lfm_config
        for layer, c in zip(reversed(self.spec.stages), reversed(caches)):
            if layer.kind == "linear":
                name = names.pop()
                g, grads[f"{name}.weight"], grads[f"{name}.bias"] = linear_backward(g, c, self.params[f"{name}.weight"])
            elif layer.kind == "gap":
                g = gap_backward(g, c)
            elif layer.kind == "lfm":
                g = lfm_backward(g, cfg.with_stride(layer.stride), c)
            elif layer.kind == "relu":
                g = relu_backward(g, c)
            elif layer.kind == "rsl_block":
                name = names.pop()
                x_in, _ = c
                g, grads[f"{name}.weight"], grads[f"{name}.bias"] = rsl_block_backward(
                    g, x_in, self.params[f"{name}.weight"], cfg.with_stride(2))
            else:  # conv3x3
                name = names.pop()
                g, grads[f"{name}.weight"], grads[f"{name}.bias"] = conv3x3_backward(g, c)
        # chain through the input standardization so dx is w.r.t. the caller's x
        std = self.spec.input_norm[1]
        if std != 1.0:
            g = g / g.dtype.type(std)
        return loss, grads, g

    def predict(self, x, batch_size: int = 256):
        x = np.asarray(x)
        if x.ndim == 3:
            x = x[:, None]
        return np.concatenate([self.forward(x[i : i + batch_size]).argmax(axis=1)
                               for i in range(0, len(x), batch_size)])


def build_model(spec: ModelSpec, seed: int = 0, dtype=np.float64) -> Model:
    """He-normal weights (std sqrt(2/fan_in)), zero biases, drawn in layer order from ``seed``."""
    spec.validate()
    rng = np.random.default_rng(seed)
    params = {}
    for name, layer in spec.param_layers():
        shapes = layer.param_shapes()
        std = math.sqrt(2.0 / layer.fan_in())
        params[f"{name}.weight"] = (rng.standard_normal(shapes["weight"]) * std).astype(dtype)
        params[f"{name}.bias"] = np.zeros(shapes["bias"], dtype=dtype)
    return Model(spec, params, seed)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

PREPROCS = ("none", "lowpass", "highpass")


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 8
    learning_rate: float = 0.05
    momentum: float = 0.9
    seed: int = 1
    precision: str = "double"
    preproc: str = "none"
    m: int = 3
    standardize: bool = True

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.precision not in ("double", "single"):
            raise ValueError(f"precision must be 'double' or 'single', got {self.precision!r}")
        if self.preproc not in PREPROCS:
            raise ValueError(f"preproc must be one of {PREPROCS}, got {self.preproc!r}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")

    @property
    def dtype(self):
        return np.float64 if self.precision == "double" else np.float32


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    source_acc: float
    target_acc: float = float("nan")

    def to_line(self) -> str:
        return f"epoch={self.epoch} loss={self.loss!r} source_acc={self.source_acc!r} target_acc={self.target_acc!r}"


@dataclass
class TrainResult:
    model: Model
    log: list = field(default_factory=list)
    initial_loss: float = float("nan")


def preprocess(images, preproc: str = "none", m: int = 3) -> np.ndarray:
    """Apply the chosen Gaussian pre-filter to each image of an (N, H, W) stack (reflect padding)."""
    from .filters import highpass, lowpass

    x = np.asarray(images, dtype=np.float64)
    if preproc == "none":
        return x.copy()
    fn = {"lowpass": lowpass, "highpass": highpass}.get(preproc)
    if fn is None:
        raise ValueError(f"unknown preproc {preproc!r}")
    return np.stack([fn(im, m, PaddingMode.REFLECT) for im in x])


def dataset_loss(model: Model, x, labels, batch_size: int = 256) -> float:
    total = 0.0
    for i in range(0, len(x), batch_size):
        loss, _ = softmax_ce_forward(model.forward(x[i : i + batch_size]), labels[i : i + batch_size])
        total += loss * len(labels[i : i + batch_size])
    return total / len(x)


@dataclass
class EvalResult:
    accuracy: float
    per_class: dict


def evaluate(model: Model, images, labels, preproc: str = "none", m: int = 3, n_classes: int | None = None) -> EvalResult:
    """Top-1 accuracy, after applying ``preproc`` exactly as during training."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    pred = model.predict(preprocess(images, preproc, m).astype(model.dtype))
    k = n_classes or model.spec.n_classes
    per_class = {c: float((pred[labels == c] == c).mean()) for c in range(k) if np.any(labels == c)}
    return EvalResult(float((pred == labels).mean()), per_class)


def train_source(model: Model, images, labels, cfg: TrainConfig, target=None) -> TrainResult:
    """Mini-batch SGD with momentum on source cross-entropy.

    ``target`` is an optional (images, labels) pair used only for logging.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise ValueError("empty training set")
    if labels.min() < 0 or labels.max() >= model.spec.n_classes:
        raise ValueError("labels must lie in [0, n_classes)")
    dtype = cfg.dtype
    x64 = preprocess(images, cfg.preproc, cfg.m)
    model = model.astype(dtype)
    if cfg.standardize:
        std = float(x64.std())
        model = model.with_input_norm(float(x64.mean()), std if std > 0 else 1.0)
    x = x64.astype(dtype)
    tx = None
    if target is not None:
        tx = preprocess(target[0], cfg.preproc, cfg.m).astype(dtype)
        ty = np.asarray(target[1], dtype=np.int64)
    rng = np.random.default_rng(cfg.seed)
    velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    lr = dtype(cfg.learning_rate)
    mom = dtype(cfg.momentum)
    result = TrainResult(model=model, initial_loss=dataset_loss(model, x, labels))
    n = len(labels)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        running = 0.0
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            loss, grads, _ = model.loss_and_grads(x[idx], labels[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch}, batch {bi}")
            running += loss * len(idx)
            for k, p in model.params.items():
                v = velocity[k]
                v *= mom
                v += grads[k]
                p -= lr * v
        src = float((model.predict(x) == labels).mean())
        tgt = float((model.predict(tx) == ty).mean()) if tx is not None else float("nan")
        rec = EpochRecord(epoch, running / n, src, tgt)
        result.log.append(rec)
        log.debug(rec.to_line())
    return result
