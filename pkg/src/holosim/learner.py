"""Local training over flat parameter vectors: losses, hand-derived gradients,
and mini-batch SGD for a small family of models (linear regression, softmax
logistic regression, and a dense MLP classifier).

All holons in a run share one ModelSpec, so the flattened dimension is the
single unit of exchange everywhere. Parameters pack layer by layer, each
weight matrix row-major followed by its bias vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Dataset
from .holarchy import HolonId


class ModelKind(str, Enum):
    LINEAR = "linear"
    LOGISTIC = "logistic"
    MLP = "mlp"


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    input_dim: int
    output_dim: int
    hidden: tuple[int, ...] = ()
    activation: str = "tanh"

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if self.kind is not ModelKind.MLP and self.hidden:
            raise ValueError(f"{self.kind.value} models take no hidden layers")
        if self.kind is ModelKind.MLP and not self.hidden:
            raise ValueError("MLP needs at least one hidden layer")
        if self.activation not in ("tanh", "relu"):
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def is_classifier(self) -> bool:
        return self.kind is not ModelKind.LINEAR

    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)


@dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 32
    learning_rate: float = 0.01
    epochs_per_round: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs_per_round < 1:
            raise ValueError("epochs_per_round must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


def param_count(spec: ModelSpec) -> int:
    """Flattened parameter dimension, a pure function of the spec."""
    sizes = spec.layer_sizes()
    return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1))


def init_params(spec: ModelSpec, rng: np.random.Generator, scale: float = 0.05) -> np.ndarray:
    return scale * rng.normal(size=param_count(spec))


def round_rng(seed: int, holon: HolonId, round_no: int) -> np.random.Generator:
    """Generator for one holon's training in one round; the same derivation is
    used by the simulator and the sequential reference implementations."""
    return np.random.default_rng(
        np.random.SeedSequence([seed, 303, holon.level, holon.index, round_no])
    )


def _unpack(spec: ModelSpec, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    arr = np.asarray(theta, dtype=np.float64)
    if arr.shape != (param_count(spec),):
        raise ValueError(f"theta has shape {arr.shape}, model needs ({param_count(spec)},)")
    sizes = spec.layer_sizes()
    layers = []
    offset = 0
    for i in range(len(sizes) - 1):
        n_in, n_out = sizes[i], sizes[i + 1]
        w = arr[offset : offset + n_in * n_out].reshape(n_out, n_in)
        offset += n_in * n_out
        b = arr[offset : offset + n_out]
        offset += n_out
        layers.append((w, b))
    return layers


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    return np.tanh(z) if activation == "tanh" else np.maximum(z, 0.0)


def _activate_grad(a: np.ndarray, z: np.ndarray, activation: str) -> np.ndarray:
    return 1.0 - a * a if activation == "tanh" else (z > 0).astype(np.float64)


def _forward(
    spec: ModelSpec, theta: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """Returns (output, pre-activations, activations) with activations[0] = x."""
    layers = _unpack(spec, theta)
    acts = [x]
    pres = []
    out = x
    for i, (w, b) in enumerate(layers):
        z = out @ w.T + b
        pres.append(z)
        out = _activate(z, spec.activation) if i < len(layers) - 1 else z
        acts.append(out)
    return out, pres, acts


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_data(spec: ModelSpec, data: Dataset) -> None:
    if len(data) == 0:
        raise ValueError("dataset is empty")
    if data.input_dim != spec.input_dim:
        raise ValueError(f"dataset has {data.input_dim} features, model expects {spec.input_dim}")


def _regression_targets(spec: ModelSpec, labels: np.ndarray) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    if y.shape[1] != spec.output_dim:
        raise ValueError(f"targets have width {y.shape[1]}, model outputs {spec.output_dim}")
    return y


def loss(spec: ModelSpec, theta: np.ndarray, data: Dataset) -> float:
    """Mean per-sample empirical risk: squared error for regression, softmax
    cross-entropy for classifiers."""
    _check_data(spec, data)
    out, _, _ = _forward(spec, theta, data.features)
    if spec.kind is ModelKind.LINEAR:
        y = _regression_targets(spec, data.labels)
        return float(np.mean(np.sum((y - out) ** 2, axis=1)))
    probs = _softmax(out)
    picked = probs[np.arange(len(data)), data.labels.astype(np.int64)]
    return float(np.mean(-np.log(np.maximum(picked, 1e-300))))


def gradient(spec: ModelSpec, theta: np.ndarray, batch: Dataset) -> np.ndarray:
    """Mean gradient of the loss over the batch, flattened like theta."""
    _check_data(spec, batch)
    n = len(batch)
    out, pres, acts = _forward(spec, theta, batch.features)
    if spec.kind is ModelKind.LINEAR:
        y = _regression_targets(spec, batch.labels)
        delta = 2.0 * (out - y) / n
    else:
        probs = _softmax(out)
        onehot = np.zeros_like(probs)
        onehot[np.arange(n), batch.labels.astype(np.int64)] = 1.0
        delta = (probs - onehot) / n

    layers = _unpack(spec, theta)
    grads: list[np.ndarray] = []
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        dw = delta.T @ acts[i]
        db = delta.sum(axis=0)
        grads.append(db)
        grads.append(dw.ravel())
        if i > 0:
            delta = (delta @ w) * _activate_grad(acts[i], pres[i - 1], spec.activation)
    return np.concatenate(grads[::-1])


def train_local(
    spec: ModelSpec,
    theta: np.ndarray,
    data: Dataset,
    cfg: TrainingConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Mini-batch SGD with a fixed learning rate for epochs_per_round passes.

    Each epoch reshuffles through `rng`; the final short batch is kept. Batch
    indices are sorted so that a full-batch pass reduces bit-exactly to one
    plain gradient step on the whole set. Pure in (theta, data, cfg, rng state).
    """
    _check_data(spec, data)
    theta = np.array(theta, dtype=np.float64, copy=True)
    n = len(data)
    for _ in range(cfg.epochs_per_round):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = np.sort(perm[start : start + cfg.batch_size])
            theta = theta - cfg.learning_rate * gradient(spec, theta, data.subset(idx))
    return theta


def evaluate(spec: ModelSpec, theta: np.ndarray, test: Dataset) -> float:
    """Fraction of argmax-correct predictions. Ties break toward the lowest
    class index, so the result is deterministic."""
    if not spec.is_classifier:
        raise ValueError("evaluate is defined for classifier models only")
    _check_data(spec, test)
    out, _, _ = _forward(spec, theta, test.features)
    predicted = np.argmax(out, axis=1)
    return float(np.mean(predicted == test.labels.astype(np.int64)))
