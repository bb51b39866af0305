"""Dense-network substrate: MLP forward/backward, losses, Adam.

All math is float64 numpy.  MLPs use relu on hidden layers and identity
on the output layer.  Parameters live in plain dataclasses of arrays;
``named_arrays``/gradient containers share the same structure so the
optimizer can treat everything as a flat name -> array mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MlpParams:
    weights: list[np.ndarray]  # layer i: (fan_in, fan_out)
    biases: list[np.ndarray]  # layer i: (fan_out,)

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights/biases length mismatch")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ValueError(f"bad layer {i} shapes {w.shape} / {b.shape}")
            if i > 0 and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i} input dim does not chain")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    def zeros_like(self) -> "MlpParams":
        return MlpParams(
            [np.zeros_like(w) for w in self.weights],
            [np.zeros_like(b) for b in self.biases],
        )

    def named_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}.w{i}"] = w
            out[f"{prefix}.b{i}"] = b
        return out


def init_mlp(input_dim: int, layer_dims, rng: np.random.Generator) -> MlpParams:
    """He-style uniform init: w ~ U(+-sqrt(6/fan_in)), zero biases."""
    weights, biases = [], []
    fan_in = input_dim
    for dim in layer_dims:
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, dim)))
        biases.append(np.zeros(dim))
        fan_in = dim
    return MlpParams(weights, biases)


@dataclass
class MlpCache:
    inputs: list[np.ndarray]  # input to each layer
    pre: list[np.ndarray]  # pre-activation of each layer


def mlp_forward(p: MlpParams, x: np.ndarray) -> tuple[np.ndarray, MlpCache]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != p.input_dim:
        raise ValueError(f"input shape {x.shape} does not match input dim {p.input_dim}")
    inputs, pre = [], []
    h = x
    last = len(p.weights) - 1
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        inputs.append(h)
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
    return h, MlpCache(inputs, pre)


def mlp_backward(p: MlpParams, cache: MlpCache, dy: np.ndarray) -> tuple[MlpParams, np.ndarray]:
    """Gradients of sum(dy * output) w.r.t. parameters and input."""
    if len(cache.inputs) != len(p.weights):
        raise ValueError("cache does not match parameters")
    dy = np.asarray(dy, dtype=np.float64)
    if dy.shape != cache.pre[-1].shape:
        raise ValueError(f"upstream gradient shape {dy.shape} != {cache.pre[-1].shape}")
    grads = p.zeros_like()
    d = dy
    last = len(p.weights) - 1
    for i in range(last, -1, -1):
        if i < last:
            d = d * (cache.pre[i] > 0.0)
        grads.weights[i][...] = cache.inputs[i].T @ d
        grads.biases[i][...] = d.sum(axis=0)
        d = d @ p.weights[i].T
    return grads, d


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy on logits, in overflow-free form.

    Returns (loss, d loss / d logits).  Empty input gives (0, empty).
    """
    logits = np.asarray(logits, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if logits.shape != targets.shape:
        raise ValueError("logits/targets length mismatch")
    if logits.size == 0:
        return 0.0, np.zeros(0)
    per = np.maximum(logits, 0.0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))
    grad = (sigmoid(logits) - targets) / logits.size
    return float(per.mean()), grad


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy over integer class targets."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    n = logits.shape[0]
    if targets.shape != (n,):
        raise ValueError("targets must be one class index per row")
    if n == 0:
        return 0.0, np.zeros_like(logits)
    p = softmax(logits)
    rows = np.arange(n)
    loss = float(-np.log(np.maximum(p[rows, targets], 1e-300)).mean())
    grad = p.copy()
    grad[rows, targets] -= 1.0
    return loss, grad / n


def superclass_cross_entropy(
    logits: np.ndarray, in_superclass: np.ndarray
) -> tuple[float, np.ndarray]:
    """Cross-entropy of the summed softmax mass of a per-row class subset.

    ``in_superclass`` is a (n, C) boolean mask of the classes that count as
    the target group for each row (e.g. all foreground classes vs the
    background column).  Used for the objectness term of the voting-style
    loss profile.
    """
    logits = np.asarray(logits, dtype=np.float64)
    n = logits.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(logits)
    p = softmax(logits)
    q = np.maximum((p * in_superclass).sum(axis=1), 1e-300)
    loss = float(-np.log(q).mean())
    # dL/dz_k = p_k - p_k * 1[k in S] / q
    grad = p - p * in_superclass / q[:, None]
    return loss, grad / n


def smooth_l1_loss(
    pred: np.ndarray, target: np.ndarray, row_mask: np.ndarray
) -> tuple[float, np.ndarray]:
    """Smooth-L1 (transition 1.0), averaged over masked rows and columns.

    Rows outside ``row_mask`` contribute nothing; no masked rows gives
    (0, zeros).
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    row_mask = np.asarray(row_mask, dtype=bool)
    if pred.shape != target.shape or row_mask.shape != (pred.shape[0],):
        raise ValueError("shape mismatch")
    grad = np.zeros_like(pred)
    m = int(row_mask.sum())
    if m == 0:
        return 0.0, grad
    diff = pred[row_mask] - target[row_mask]
    a = np.abs(diff)
    quad = a < 1.0
    per = np.where(quad, 0.5 * diff * diff, a - 0.5)
    denom = m * pred.shape[1]
    grad[row_mask] = np.where(quad, diff, np.sign(diff)) / denom
    return float(per.sum() / denom), grad


@dataclass
class AdamState:
    """Adam with bias correction; moments keyed by parameter name."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
    """One in-place Adam update over a name -> array parameter mapping."""
    if set(grads) - set(params):
        raise ValueError(f"gradients for unknown parameters: {sorted(set(grads) - set(params))}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {name}: {g.shape} != {p.shape}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m += (1.0 - state.beta1) * (g - m)
        v += (1.0 - state.beta2) * (g * g - v)
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
