"""Lightweight relational scorers: small MLPs over concatenated embeddings.

Two relation heads share one architecture: a co-occurrence scorer trained
with binary cross entropy and a containment scorer trained with mean squared
error. Training is plain mini-batch SGD with momentum; everything runs on
numpy so inference stays cheap enough for per-step scoring.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

RELATIONS = ("cooccur", "contain")
#: Loss paired with each relation head.
LOSS_FOR_RELATION = {"cooccur": "bce", "contain": "mse"}

MAGIC = b"MLP1"


class WeightFormatError(ValueError):
    pass


@dataclass
class MlpModel:
    """Feed-forward scorer: ReLU hidden layers, sigmoid output in (0, 1)."""

    relation: str
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    embedding_dim: int
    provider_fingerprint: str = ""

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        if self.weights[0].shape[0] != 2 * self.embedding_dim:
            raise ValueError("input size must be twice the embedding dimension")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def forward(self, x: np.ndarray) -> np.ndarray | float:
        """Score one input vector (returns a float) or a batch (returns an array).

        Outputs stay strictly inside (0, 1): saturated sigmoids are nudged
        off the exact endpoints.
        """
        single = x.ndim == 1
        h = np.atleast_2d(np.asarray(x, dtype=float))
        if h.shape[1] != self.weights[0].shape[0]:
            raise ValueError(f"input dim {h.shape[1]} does not match model input {self.weights[0].shape[0]}")
        z = self._logits(h)
        p = _sigmoid(z)
        if not np.all(np.isfinite(p)):
            raise FloatingPointError("non-finite scorer output")
        p = np.clip(p, 1e-300, 1.0 - 1e-16)
        return float(p[0]) if single else p

    def _logits(self, h: np.ndarray) -> np.ndarray:
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return (h @ self.weights[-1] + self.biases[-1])[:, 0]

    def copy(self) -> "MlpModel":
        return MlpModel(
            relation=self.relation,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            embedding_dim=self.embedding_dim,
            provider_fingerprint=self.provider_fingerprint,
        )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_model(relation: str, embedding_dim: int, hidden: tuple[int, int] = (64, 32),
               seed: int = 0, provider_fingerprint: str = "") -> MlpModel:
    """He-initialized model with two hidden layers (a 3-layer MLP)."""
    rng = np.random.default_rng(seed)
    sizes = [2 * embedding_dim, *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MlpModel(relation, weights, biases, embedding_dim, provider_fingerprint)


def loss_and_grads(model: MlpModel, x: np.ndarray, y: np.ndarray, loss: str):
    """Mean loss over the batch and gradients for every parameter."""
    n = x.shape[0]
    activations = [np.asarray(x, dtype=float)]
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        activations.append(np.maximum(activations[-1] @ w + b, 0.0))
    z = (activations[-1] @ model.weights[-1] + model.biases[-1])[:, 0]
    p = _sigmoid(z)

    if loss == "bce":
        # log(1 + e^-|z|) + max(z, 0) - z*y, stable for large |z|
        value = float(np.mean(np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0) - z * y))
        dz = (p - y) / n
    elif loss == "mse":
        value = float(np.mean((p - y) ** 2))
        dz = 2.0 * (p - y) * p * (1.0 - p) / n
    else:
        raise ValueError(f"unknown loss {loss!r}")

    grads_w = [np.zeros_like(w) for w in model.weights]
    grads_b = [np.zeros_like(b) for b in model.biases]
    delta = dz[:, None]
    grads_w[-1] = activations[-1].T @ delta
    grads_b[-1] = delta.sum(axis=0)
    upstream = delta @ model.weights[-1].T
    for layer in range(len(model.weights) - 2, -1, -1):
        upstream = upstream * (activations[layer + 1] > 0)
        grads_w[layer] = activations[layer].T @ upstream
        grads_b[layer] = upstream.sum(axis=0)
        if layer > 0:
            upstream = upstream @ model.weights[layer].T
    return value, grads_w, grads_b


def evaluate_loss(model: MlpModel, x: np.ndarray, y: np.ndarray, loss: str) -> float:
    value, _, _ = loss_and_grads(model, x, y, loss)
    return value


@dataclass
class TrainConfig:
    lr: float = 1e-2
    momentum: float = 0.9
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 20  # early-stopping epochs without val improvement
    seed: int = 0


@dataclass
class TrainResult:
    model: MlpModel
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    final_val_loss: float = float("nan")
    epochs_run: int = 0


def train(model: MlpModel, x_train: np.ndarray, y_train: np.ndarray,
          x_val: np.ndarray | None = None, y_val: np.ndarray | None = None,
          config: TrainConfig | None = None) -> TrainResult:
    """Mini-batch SGD with momentum; deterministic given the config seed.

    Keeps the parameters from the best validation epoch when a validation
    split is supplied. Raises on the first non-finite batch loss.
    """
    config = config or TrainConfig()
    loss = LOSS_FOR_RELATION[model.relation]
    if x_train.shape[0] == 0:
        raise ValueError("training data is empty")
    rng = np.random.default_rng(config.seed)
    model = model.copy()
    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]
    result = TrainResult(model=model)
    best_val = np.inf
    best_params: tuple[list[np.ndarray], list[np.ndarray]] | None = None
    stale = 0

    for epoch in range(config.max_epochs):
        order = rng.permutation(x_train.shape[0])
        epoch_losses = []
        for batch_index, start in enumerate(range(0, len(order), config.batch_size)):
            idx = order[start:start + config.batch_size]
            value, grads_w, grads_b = loss_and_grads(model, x_train[idx], y_train[idx], loss)
            if not np.isfinite(value):
                raise FloatingPointError(
                    f"non-finite {loss} loss in epoch {epoch}, batch {batch_index}")
            for i in range(len(model.weights)):
                vel_w[i] = config.momentum * vel_w[i] - config.lr * grads_w[i]
                vel_b[i] = config.momentum * vel_b[i] - config.lr * grads_b[i]
                model.weights[i] += vel_w[i]
                model.biases[i] += vel_b[i]
            epoch_losses.append(value)
        result.train_losses.append(float(np.mean(epoch_losses)))
        result.epochs_run = epoch + 1

        if x_val is not None and len(x_val):
            val = evaluate_loss(model, x_val, y_val, loss)
            result.val_losses.append(val)
            if val < best_val - 1e-12:
                best_val = val
                best_params = ([w.copy() for w in model.weights], [b.copy() for b in model.biases])
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break

    if best_params is not None:
        model.weights, model.biases = best_params
        result.final_val_loss = best_val
    elif x_val is not None and len(x_val):
        result.final_val_loss = evaluate_loss(model, x_val, y_val, loss)
    return result


def grad_check(model: MlpModel, x: np.ndarray, y: np.ndarray, loss: str,
               eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    _, grads_w, grads_b = loss_and_grads(model, x, y, loss)
    worst = 0.0
    params = list(zip(model.weights, grads_w)) + list(zip(model.biases, grads_b))
    for tensor, grad in params:
        flat = tensor.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            hi = evaluate_loss(model, x, y, loss)
            flat[i] = keep - eps
            lo = evaluate_loss(model, x, y, loss)
            flat[i] = keep
            numeric = (hi - lo) / (2 * eps)
            worst = max(worst, abs(gflat[i] - numeric) / max(1.0, abs(numeric)))
    return worst


# -- weight files ----------------------------------------------------------
# MAGIC, u32 header length, JSON header (relation, layer sizes, embedding
# dim, provider fingerprint), then every parameter as little-endian f64.

def save_weights(model: MlpModel, path) -> None:
    header = json.dumps(
        {
            "relation": model.relation,
            "layer_sizes": model.layer_sizes,
            "embedding_dim": model.embedding_dim,
            "provider_fingerprint": model.provider_fingerprint,
        },
        sort_keys=True,
    ).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_weights(path, relation: str | None = None, embedding_dim: int | None = None,
                 provider_fingerprint: str | None = None) -> MlpModel:
    """Load a weight file, checking it against the expected slot and provider."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise WeightFormatError(f"{path}: not a weight file")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode())
        sizes = header["layer_sizes"]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(np.frombuffer(fh.read(8 * fan_in * fan_out), dtype="<f8")
                           .reshape(fan_in, fan_out).copy())
            biases.append(np.frombuffer(fh.read(8 * fan_out), dtype="<f8").copy())
        trailing = fh.read()
    if trailing:
        raise WeightFormatError(f"{path}: {len(trailing)} unexpected trailing bytes")
    if relation is not None and header["relation"] != relation:
        raise WeightFormatError(
            f"{path}: relation tag {header['relation']!r} does not match expected {relation!r}")
    if embedding_dim is not None and header["embedding_dim"] != embedding_dim:
        raise WeightFormatError(
            f"{path}: embedding dim {header['embedding_dim']} does not match provider dim {embedding_dim}")
    if provider_fingerprint is not None and header["provider_fingerprint"] != provider_fingerprint:
        raise WeightFormatError(
            f"{path}: provider fingerprint {header['provider_fingerprint']!r} "
            f"does not match {provider_fingerprint!r}")
    return MlpModel(
        relation=header["relation"],
        weights=weights,
        biases=biases,
        embedding_dim=header["embedding_dim"],
        provider_fingerprint=header["provider_fingerprint"],
    )
