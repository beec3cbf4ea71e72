"""Feedforward MLP regressor for per-agent power indices, built on numpy.

Architecture: input -> three ReLU hidden layers of 512, 256, 128 units
(each with 20% inverted dropout during training) -> linear output of one
value per agent. Inputs are row-major flattened rule tensors, matching the
dataset layout on disk. Training is plain minibatch gradient descent on
mean-squared error with the Adam update; all randomness (init, shuffling,
dropout) is derived from explicit seeds, so a fixed configuration retrains
to identical weights.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataFormatError, TrainingDivergedError
from .sampling import stream_rng
from ._ioutil import atomic_write_bytes, atomic_write_text, config_hash

MODEL_FORMAT_VERSION = 1
HIDDEN_DIMS = (512, 256, 128)
DROPOUT_RATE = 0.2


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings; the loss is always mean-squared error."""

    epochs: int = 30
    batch_size: int = 256
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size, and learning_rate must be positive")


class MlpModel:
    """Dense layer stack: weight matrices are (out, in), biases are (out,)."""

    def __init__(
        self,
        layer_dims: list[int],
        weights: list[np.ndarray],
        biases: list[np.ndarray],
        dropout_rate: float = DROPOUT_RATE,
        train_config: TrainConfig | None = None,
    ):
        if len(layer_dims) < 2:
            raise ValueError("need at least an input and an output layer")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (layer_dims[i + 1], layer_dims[i]) or b.shape != (
                layer_dims[i + 1],
            ):
                raise ValueError(f"layer {i} shapes do not chain with layer_dims")
        self.layer_dims = list(layer_dims)
        self.weights = weights
        self.biases = biases
        self.dropout_rate = dropout_rate
        self.train_config = train_config

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def init_model(
    input_dim: int,
    output_dim: int,
    seed: int,
    hidden_dims: tuple[int, ...] = HIDDEN_DIMS,
    dropout_rate: float = DROPOUT_RATE,
) -> MlpModel:
    """Fresh model with fan-in-scaled uniform weights and zero biases.

    Weights are drawn from U(-sqrt(6/fan_in), sqrt(6/fan_in)), the usual
    He-style bound for ReLU stacks.
    """
    if input_dim < 1 or output_dim < 1 or any(h < 1 for h in hidden_dims):
        raise ValueError("all layer dimensions must be >= 1")
    dims = [input_dim, *hidden_dims, output_dim]
    rng = stream_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims, weights, biases, dropout_rate=dropout_rate)


def _check_batch(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != model.input_dim:
        raise ValueError(
            f"batch must be (rows, {model.input_dim}), got {batch.shape}"
        )
    return batch


def _draw_dropout_masks(
    model: MlpModel, rows: int, rng: np.random.Generator
) -> list[np.ndarray]:
    keep = 1.0 - model.dropout_rate
    return [
        rng.random((rows, dim)) < keep for dim in model.layer_dims[1:-1]
    ]


def _forward_cached(
    model: MlpModel, batch: np.ndarray, masks: list[np.ndarray] | None
):
    """Forward pass keeping pre-activations and activations for backprop."""
    keep = 1.0 - model.dropout_rate
    activations = [batch]
    pre_acts = []
    h = batch
    for layer in range(model.n_layers - 1):
        z = h @ model.weights[layer].T + model.biases[layer]
        pre_acts.append(z)
        h = np.maximum(z, 0.0)
        if masks is not None:
            h = h * masks[layer] / keep
        activations.append(h)
    out = h @ model.weights[-1].T + model.biases[-1]
    return out, activations, pre_acts


def forward(
    model: MlpModel,
    batch: np.ndarray,
    train_mode: bool = False,
    dropout_rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Predictions for a batch.

    Eval mode (the default) applies no dropout and is a pure function of
    the inputs. Train mode applies inverted dropout from ``dropout_rng``.
    """
    batch = _check_batch(model, batch)
    masks = None
    if train_mode:
        if dropout_rng is None:
            raise ValueError("train_mode forward requires a dropout generator")
        masks = _draw_dropout_masks(model, batch.shape[0], dropout_rng)
    out, _, _ = _forward_cached(model, batch, masks)
    return out


def loss_and_grads(
    model: MlpModel,
    batch: np.ndarray,
    targets: np.ndarray,
    masks: list[np.ndarray] | None = None,
):
    """MSE loss and its exact gradients for every weight and bias.

    ``masks``, when given, are the dropout keep-masks to apply (fixed masks
    make the loss differentiable for finite-difference checks).
    """
    batch = _check_batch(model, batch)
    targets = np.asarray(targets, dtype=np.float64)
    keep = 1.0 - model.dropout_rate
    out, activations, pre_acts = _forward_cached(model, batch, masks)
    diff = out - targets
    loss = float((diff * diff).mean())

    grad_w = [None] * model.n_layers
    grad_b = [None] * model.n_layers
    delta = 2.0 * diff / diff.size
    grad_w[-1] = delta.T @ activations[-1]
    grad_b[-1] = delta.sum(axis=0)
    upstream = delta @ model.weights[-1]
    for layer in range(model.n_layers - 2, -1, -1):
        if masks is not None:
            upstream = upstream * masks[layer] / keep
        delta = upstream * (pre_acts[layer] > 0.0)
        grad_w[layer] = delta.T @ activations[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            upstream = delta @ model.weights[layer]
    return loss, grad_w, grad_b


def train(
    model: MlpModel,
    features: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
    use_dropout: bool = True,
) -> tuple[MlpModel, list[float]]:
    """Minibatch Adam on MSE; returns the model and per-epoch mean loss."""
    features = _check_batch(model, features)
    labels = np.asarray(labels, dtype=np.float64)
    if labels.ndim != 2 or labels.shape != (features.shape[0], model.output_dim):
        raise ValueError(
            f"labels must be ({features.shape[0]}, {model.output_dim}), got {labels.shape}"
        )
    shuffle_rng = stream_rng(cfg.seed, 1)
    dropout_rng = stream_rng(cfg.seed, 2)
    adam_m = [np.zeros_like(w) for w in model.weights] + [
        np.zeros_like(b) for b in model.biases
    ]
    adam_v = [np.zeros_like(p) for p in adam_m]
    step = 0
    history = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(features.shape[0])
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            masks = None
            if use_dropout and model.dropout_rate > 0.0:
                masks = _draw_dropout_masks(model, len(idx), dropout_rng)
            loss, grad_w, grad_b = loss_and_grads(
                model, features[idx], labels[idx], masks
            )
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {n_batches}"
                )
            step += 1
            params = model.weights + model.biases
            grads = grad_w + grad_b
            corr1 = 1.0 - cfg.adam_beta1**step
            corr2 = 1.0 - cfg.adam_beta2**step
            for i, (p, g) in enumerate(zip(params, grads)):
                adam_m[i] = cfg.adam_beta1 * adam_m[i] + (1 - cfg.adam_beta1) * g
                adam_v[i] = cfg.adam_beta2 * adam_v[i] + (1 - cfg.adam_beta2) * g * g
                p -= cfg.learning_rate * (adam_m[i] / corr1) / (
                    np.sqrt(adam_v[i] / corr2) + cfg.adam_eps
                )
            epoch_loss += loss
            n_batches += 1
        history.append(epoch_loss / n_batches)
    model.train_config = cfg
    return model, history


def evaluate(model: MlpModel, features: np.ndarray, labels: np.ndarray) -> dict:
    """MAE and MSE over all (datapoint, agent) cells, plus per-agent MAE."""
    features = _check_batch(model, features)
    labels = np.asarray(labels, dtype=np.float64)
    if features.shape[0] == 0:
        raise ValueError("cannot evaluate on an empty set")
    preds = forward(model, features)
    err = preds - labels
    return {
        "mae": float(np.abs(err).mean()),
        "mse": float((err * err).mean()),
        "per_agent_mae": [float(v) for v in np.abs(err).mean(axis=0)],
    }


def dataset_arrays(ds) -> tuple[np.ndarray, np.ndarray]:
    """Flatten a labeled dataset into (features, labels) training arrays."""
    if ds.labels is None:
        raise ValueError("dataset has no labels")
    k = ds.tensor.shape[0]
    features = ds.tensor.reshape(k, -1).astype(np.float64)
    return features, ds.labels.astype(np.float64)


def save_model(model: MlpModel, path: str) -> None:
    os.makedirs(path, exist_ok=True)
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_dims": model.layer_dims,
        "dropout_rate": model.dropout_rate,
        "train_config": None
        if model.train_config is None
        else asdict(model.train_config),
    }
    meta["config_hash"] = config_hash(meta)
    atomic_write_text(os.path.join(path, "model.json"), json.dumps(meta, indent=2) + "\n")
    blob = b"".join(
        arr.astype("<f8").tobytes()
        for w, b in zip(model.weights, model.biases)
        for arr in (w, b)
    )
    atomic_write_bytes(os.path.join(path, "weights.bin"), blob)


def load_model(path: str) -> MlpModel:
    meta_path = os.path.join(path, "model.json")
    try:
        with open(meta_path, encoding="utf-8") as f:
            meta = json.load(f)
    except FileNotFoundError:
        raise DataFormatError(f"no model at {path}: missing model.json") from None
    except json.JSONDecodeError as e:
        raise DataFormatError(f"corrupt model.json in {path}: {e}") from e
    version = meta.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise DataFormatError(
            f"model format version {version} unsupported (expected {MODEL_FORMAT_VERSION})"
        )
    dims = meta["layer_dims"]
    raw = np.fromfile(os.path.join(path, "weights.bin"), dtype="<f8")
    expected = sum(
        dims[i + 1] * dims[i] + dims[i + 1] for i in range(len(dims) - 1)
    )
    if raw.size != expected:
        raise DataFormatError(
            f"weights.bin holds {raw.size} float64 values, expected {expected}"
        )
    weights, biases = [], []
    pos = 0
    for i in range(len(dims) - 1):
        w = raw[pos : pos + dims[i + 1] * dims[i]].reshape(dims[i + 1], dims[i])
        pos += w.size
        b = raw[pos : pos + dims[i + 1]]
        pos += b.size
        weights.append(w.copy())
        biases.append(b.copy())
    cfg = meta.get("train_config")
    return MlpModel(
        dims,
        weights,
        biases,
        dropout_rate=meta.get("dropout_rate", DROPOUT_RATE),
        train_config=None if cfg is None else TrainConfig(**cfg),
    )
