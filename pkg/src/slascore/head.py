"""Toy-scale speech-grader head over precomputed frame features.

Pipeline: additive (tanh) attention pooling over T frame vectors, cosine
similarity against one learnable prototype per CEFR level, concatenation
[x; s], and a single-layer MLP emitting either a scalar score
(regression) or per-level logits (classification). All gradients are
analytic and finite-difference checked in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    EmptyDataset,
    NonFiniteLoss,
    OffGridTarget,
    ShapeMismatch,
    StaleCache,
    ValidationError,
    ZeroNormVector,
)
from .metrics import macro_f1

REGRESSION = "regression"
CLASSIFICATION = "classification"


@dataclass(frozen=True, slots=True)
class FrameSequence:
    """T x d matrix of frame-level features, optionally labeled."""

    frames: np.ndarray
    label: float | None = None

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        if f.ndim != 2 or f.shape[0] < 1:
            raise ValidationError(f"frames must be a T x d matrix with T >= 1, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValidationError("frames contain non-finite entries")
        object.__setattr__(self, "frames", f)


@dataclass(slots=True)
class HeadParameters:
    """Attention, prototype bank (one row per CEFR level), and MLP.

    ``version`` increments on every optimizer step so stale backward
    caches can be detected.
    """

    attn_W: np.ndarray  # d_a x d
    attn_b: np.ndarray  # d_a
    attn_u: np.ndarray  # d_a
    prototypes: np.ndarray  # N x d
    levels: np.ndarray  # N level values, ascending
    mlp_W: np.ndarray  # out x (d + N)
    mlp_b: np.ndarray  # out
    mode: str = REGRESSION
    version: int = 0

    @property
    def d(self) -> int:
        return self.attn_W.shape[1]

    @property
    def n_levels(self) -> int:
        return self.prototypes.shape[0]

    def check_shapes(self) -> None:
        d_a, d = self.attn_W.shape
        n = self.prototypes.shape[0]
        out = 1 if self.mode == REGRESSION else n
        expected = {
            "attn_b": (d_a,),
            "attn_u": (d_a,),
            "prototypes": (n, d),
            "levels": (n,),
            "mlp_W": (out, d + n),
            "mlp_b": (out,),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ShapeMismatch(f"{name}: expected {shape}, got {got}")

    def copy(self) -> "HeadParameters":
        return replace(
            self,
            attn_W=self.attn_W.copy(),
            attn_b=self.attn_b.copy(),
            attn_u=self.attn_u.copy(),
            prototypes=self.prototypes.copy(),
            levels=self.levels.copy(),
            mlp_W=self.mlp_W.copy(),
            mlp_b=self.mlp_b.copy(),
        )


@dataclass(slots=True)
class HeadGradients:
    attn_W: np.ndarray
    attn_b: np.ndarray
    attn_u: np.ndarray
    prototypes: np.ndarray
    mlp_W: np.ndarray
    mlp_b: np.ndarray

    @classmethod
    def zeros_like(cls, params: HeadParameters) -> "HeadGradients":
        return cls(
            attn_W=np.zeros_like(params.attn_W),
            attn_b=np.zeros_like(params.attn_b),
            attn_u=np.zeros_like(params.attn_u),
            prototypes=np.zeros_like(params.prototypes),
            mlp_W=np.zeros_like(params.mlp_W),
            mlp_b=np.zeros_like(params.mlp_b),
        )

    def add_(self, other: "HeadGradients", scale: float = 1.0) -> None:
        for name in ("attn_W", "attn_b", "attn_u", "prototypes", "mlp_W", "mlp_b"):
            getattr(self, name).__iadd__(scale * getattr(other, name))


@dataclass(slots=True)
class ForwardCache:
    params: HeadParameters
    version: int
    h: np.ndarray
    a: np.ndarray  # tanh activations, T x d_a
    alpha: np.ndarray  # attention weights, T
    x: np.ndarray  # pooled vector, d
    s: np.ndarray  # prototype similarities, N
    x_norm: float
    p_norms: np.ndarray
    v: np.ndarray  # MLP input [x; s]
    output: np.ndarray


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / np.sum(e)


def attn_pool(seq: FrameSequence, params: HeadParameters) -> np.ndarray:
    """Attention-pooled utterance vector x = sum_t alpha_t h_t."""
    return _pool(seq.frames, params)[2]


def _pool(h: np.ndarray, params: HeadParameters):
    if h.shape[1] != params.d:
        raise ShapeMismatch(f"frames have d={h.shape[1]}, parameters expect d={params.d}")
    a = np.tanh(h @ params.attn_W.T + params.attn_b)  # T x d_a
    e = a @ params.attn_u  # T
    alpha = _softmax(e)
    x = alpha @ h
    return a, alpha, x


def prototype_similarity(x: np.ndarray, prototypes: np.ndarray) -> np.ndarray:
    """Cosine similarity of x against each prototype row."""
    x_norm = np.linalg.norm(x)
    p_norms = np.linalg.norm(prototypes, axis=1)
    if x_norm == 0.0 or np.any(p_norms == 0.0):
        raise ZeroNormVector("cosine similarity undefined for zero-norm vectors")
    return (prototypes @ x) / (p_norms * x_norm)


def forward(seq: FrameSequence, params: HeadParameters):
    """Run the head; returns (prediction, cache).

    Regression mode yields a scalar, classification mode an array of
    per-level logits.
    """
    params.check_shapes()
    h = seq.frames
    a, alpha, x = _pool(h, params)
    x_norm = float(np.linalg.norm(x))
    p_norms = np.linalg.norm(params.prototypes, axis=1)
    s = prototype_similarity(x, params.prototypes)
    v = np.concatenate([x, s])
    output = params.mlp_W @ v + params.mlp_b
    cache = ForwardCache(
        params=params, version=params.version,
        h=h, a=a, alpha=alpha, x=x, s=s,
        x_norm=x_norm, p_norms=p_norms, v=v, output=output,
    )
    prediction = float(output[0]) if params.mode == REGRESSION else output
    return prediction, cache


def _target_index(target: float, levels: np.ndarray) -> int:
    hits = np.flatnonzero(np.abs(levels - target) <= 1e-9)
    if hits.size != 1:
        raise OffGridTarget(f"target {target} is not one of the trained levels {levels.tolist()}")
    return int(hits[0])


def loss(prediction, target: float, params: HeadParameters) -> float:
    """Squared error (regression) or cross-entropy (classification)."""
    if params.mode == REGRESSION:
        return float((prediction - target) ** 2)
    idx = _target_index(target, params.levels)
    logits = np.asarray(prediction, dtype=np.float64)
    logz = np.max(logits) + math.log(np.sum(np.exp(logits - np.max(logits))))
    return float(logz - logits[idx])


def loss_gradient(prediction, target: float, params: HeadParameters) -> np.ndarray:
    """d loss / d prediction, same shape as the forward output."""
    if params.mode == REGRESSION:
        return np.array([2.0 * (prediction - target)])
    idx = _target_index(target, params.levels)
    probs = _softmax(np.asarray(prediction, dtype=np.float64))
    g = probs.copy()
    g[idx] -= 1.0
    return g


def backward(cache: ForwardCache, upstream) -> HeadGradients:
    """Analytic gradients of (upstream . output) w.r.t. every parameter.

    ``upstream`` is d loss / d output: a scalar (or length-1 array) in
    regression mode, a logits-shaped array in classification mode.
    """
    params = cache.params
    if cache.version != params.version:
        raise StaleCache("parameters were updated after this forward pass")
    d_out = np.atleast_1d(np.asarray(upstream, dtype=np.float64))
    if d_out.shape != cache.output.shape:
        raise ShapeMismatch(f"upstream shape {d_out.shape} vs output {cache.output.shape}")

    g = HeadGradients.zeros_like(params)
    g.mlp_W[:] = np.outer(d_out, cache.v)
    g.mlp_b[:] = d_out
    d_v = params.mlp_W.T @ d_out

    d = params.d
    d_x = d_v[:d].copy()
    d_s = d_v[d:]

    # cosine: s_j = (x . p_j) / (|x| |p_j|)
    x, s = cache.x, cache.s
    xn, pn = cache.x_norm, cache.p_norms
    d_x += (params.prototypes.T @ (d_s / pn)) / xn - (d_s @ s) * x / (xn * xn)
    g.prototypes[:] = (d_s / pn)[:, None] * (
        x[None, :] / xn - s[:, None] * params.prototypes / pn[:, None]
    )

    # pooling: x = alpha @ h
    d_alpha = cache.h @ d_x
    d_e = cache.alpha * (d_alpha - float(cache.alpha @ d_alpha))
    d_a = np.outer(d_e, params.attn_u)
    g.attn_u[:] = cache.a.T @ d_e
    d_z = d_a * (1.0 - cache.a**2)
    g.attn_W[:] = d_z.T @ cache.h
    g.attn_b[:] = d_z.sum(axis=0)
    return g


def predict_score(seq: FrameSequence, params: HeadParameters) -> float:
    """Continuous score: the regression scalar, or the probability-
    weighted mean of level values in classification mode."""
    prediction, _ = forward(seq, params)
    if params.mode == REGRESSION:
        return float(prediction)
    return float(_softmax(prediction) @ params.levels)


@dataclass(slots=True)
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 1e-4
    warmup_steps: int = 600
    weight_decay: float = 0.01
    batch_size: int = 16
    seed: int = 0
    mode: str = CLASSIFICATION
    attn_dim: int | None = None


def init_parameters(
    train_data: list[FrameSequence],
    mode: str,
    seed: int = 0,
    attn_dim: int | None = None,
) -> HeadParameters:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights; prototypes start
    at per-level means of the initially pooled embeddings."""
    if not train_data:
        raise EmptyDataset("cannot initialize from an empty training set")
    labels = [s.label for s in train_data]
    if any(lbl is None for lbl in labels):
        raise ValidationError("all training sequences must carry labels")
    levels = np.unique(np.asarray(labels, dtype=np.float64))
    d = train_data[0].frames.shape[1]
    d_a = attn_dim or d
    n = levels.size
    out = 1 if mode == REGRESSION else n

    rng = np.random.default_rng(seed)
    lim_attn = 1.0 / math.sqrt(d)
    lim_mlp = 1.0 / math.sqrt(d + n)
    params = HeadParameters(
        attn_W=rng.uniform(-lim_attn, lim_attn, size=(d_a, d)),
        attn_b=rng.uniform(-lim_attn, lim_attn, size=d_a),
        attn_u=rng.uniform(-lim_attn, lim_attn, size=d_a),
        prototypes=np.zeros((n, d)),
        levels=levels,
        mlp_W=rng.uniform(-lim_mlp, lim_mlp, size=(out, d + n)),
        mlp_b=np.zeros(out),
        mode=mode,
    )
    sums = np.zeros((n, d))
    counts = np.zeros(n)
    for seq in train_data:
        k = _target_index(seq.label, levels)
        sums[k] += attn_pool(seq, params)
        counts[k] += 1
    params.prototypes = sums / counts[:, None]
    params.check_shapes()
    return params


_DECAYED = ("attn_W", "attn_u", "prototypes", "mlp_W")
_PARAM_FIELDS = ("attn_W", "attn_b", "attn_u", "prototypes", "mlp_W", "mlp_b")


def train(
    train_data: list[FrameSequence],
    dev_data: list[FrameSequence],
    config: TrainConfig | None = None,
) -> tuple[HeadParameters, list[dict]]:
    """Minibatch AdamW with linear warm-up; best epoch by dev macro F1.

    Deterministic under a fixed seed: data order, init, and update order
    are all driven by one seeded generator.
    """
    config = config or TrainConfig()
    if not train_data or not dev_data:
        raise EmptyDataset("train and dev sets must be nonempty")
    for seq in train_data + dev_data:
        if seq.label is None:
            raise ValidationError("training and dev sequences must carry labels")

    params = init_parameters(train_data, config.mode, config.seed, config.attn_dim)
    rng = np.random.default_rng(config.seed + 1)
    m = HeadGradients.zeros_like(params)
    v = HeadGradients.zeros_like(params)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    best_params = params.copy()
    best_f1 = -1.0
    history: list[dict] = []

    dev_refs = [seq.label for seq in dev_data]
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_data))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [train_data[i] for i in order[start : start + config.batch_size]]
            grad = HeadGradients.zeros_like(params)
            batch_loss = 0.0
            for seq in batch:
                pred, cache = forward(seq, params)
                batch_loss += loss(pred, seq.label, params)
                grad.add_(backward(cache, loss_gradient(pred, seq.label, params)),
                          scale=1.0 / len(batch))
            batch_loss /= len(batch)
            if not math.isfinite(batch_loss):
                raise NonFiniteLoss(f"loss diverged at epoch {epoch}")
            epoch_loss += batch_loss * len(batch)

            step += 1
            lr = config.learning_rate
            if config.warmup_steps > 0:
                lr *= min(1.0, step / config.warmup_steps)
            for name in _PARAM_FIELDS:
                p = getattr(params, name)
                gr = getattr(grad, name)
                mn, vn = getattr(m, name), getattr(v, name)
                mn *= beta1
                mn += (1 - beta1) * gr
                vn *= beta2
                vn += (1 - beta2) * gr * gr
                m_hat = mn / (1 - beta1**step)
                v_hat = vn / (1 - beta2**step)
                p -= lr * (m_hat / (np.sqrt(v_hat) + eps))
                if name in _DECAYED:
                    p -= lr * config.weight_decay * p
            params.version += 1

        dev_preds = [predict_score(seq, params) for seq in dev_data]
        dev_f1 = macro_f1(dev_preds, dev_refs)
        history.append({
            "epoch": epoch,
            "train_loss": epoch_loss / len(train_data),
            "dev_macro_f1": dev_f1,
        })
        if dev_f1 > best_f1:
            best_f1 = dev_f1
            best_params = params.copy()
    return best_params, history
