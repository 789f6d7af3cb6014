"""Dense network, Adam, and the seeded training loop.

Forward passes build an autodiff graph (the tape); backward() on the loss
tensor populates parameter gradients. Weights store in float64 and all
accumulation stays in double precision. Everything that draws randomness
takes an explicit numpy Generator, and identical (seed, config, data) runs
produce bit-identical parameters.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import DomainError, TrainingError

CHECKPOINT_VERSION = 1
LEAKY_RELU_SLOPE = 0.01


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden_layers: int
    hidden_units: int
    output_dim: int
    activation: str = "leaky_relu"
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise DomainError("input_dim and output_dim must be positive")
        if self.hidden_layers < 0:
            raise DomainError("hidden_layers must be >= 0")
        if self.hidden_layers > 0 and self.hidden_units < 1:
            raise DomainError("hidden_units must be positive")
        if self.activation != "leaky_relu":
            raise DomainError(f"unsupported activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DomainError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")

    def layer_dims(self):
        dims = [self.input_dim] + [self.hidden_units] * self.hidden_layers + [self.output_dim]
        return list(zip(dims[:-1], dims[1:]))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-3
    batch_size: int = 128
    max_epochs: int = 200
    early_stop_patience: int = 20
    lam: float = 0.5
    seed: int = 0
    quantiles: tuple[float, ...] = (0.05, 0.95)

    def __post_init__(self):
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise DomainError("max_epochs must be >= 1")
        if not 0 <= self.early_stop_patience <= self.max_epochs:
            raise DomainError("early_stop_patience must lie in [0, max_epochs]")
        if not (math.isfinite(self.lam) and self.lam >= 0.0):
            raise DomainError("lam must be finite and >= 0")
        object.__setattr__(self, "quantiles", tuple(float(q) for q in self.quantiles))
        if not self.quantiles or not all(0.0 < q < 1.0 for q in self.quantiles):
            raise DomainError("quantiles must be a non-empty tuple of values in (0, 1)")


class Mlp:
    """Fully connected net with leaky-ReLU hidden layers and inverted dropout."""

    def __init__(self, config: MlpConfig, seed: int = 0):
        self.config = config
        self.forward_count = 0
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6D6C70]))
        self.weights = []
        self.biases = []
        for fan_in, fan_out in config.layer_dims():
            bound = math.sqrt(6.0 / fan_in)  # Kaiming-uniform, fan-in scaling
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            self.weights.append(ad.Tensor(w, requires_grad=True))
            self.biases.append(ad.Tensor(np.zeros((1, fan_out)), requires_grad=True))

    def parameters(self):
        return self.weights + self.biases

    def forward(self, x, mode="eval", rng=None) -> ad.Tensor:
        """Run a batch through the net; in train mode dropout masks come from rng.

        The returned tensor carries the tape for backward().
        """
        if mode not in ("train", "eval"):
            raise DomainError(f"mode must be 'train' or 'eval', got {mode!r}")
        data = x.data if isinstance(x, ad.Tensor) else np.asarray(x, dtype=float)
        if data.ndim != 2 or data.shape[1] != self.config.input_dim:
            raise DomainError(
                f"expected input of shape (batch, {self.config.input_dim}), got {data.shape}"
            )
        dropping = mode == "train" and self.config.dropout_rate > 0.0
        if dropping and rng is None:
            raise DomainError("train-mode forward with dropout needs an rng")
        self.forward_count += 1
        h = x if isinstance(x, ad.Tensor) else ad.Tensor(data)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = ad.leaky_relu(h, LEAKY_RELU_SLOPE)
                if dropping:
                    keep = 1.0 - self.config.dropout_rate
                    mask = (rng.random(h.shape) < keep) / keep
                    h = h * ad.Tensor(mask)
        return h

    def get_flat_params(self) -> np.ndarray:
        return np.concatenate([p.data.ravel() for p in self.parameters()])

    def set_flat_params(self, flat: np.ndarray):
        flat = np.asarray(flat, dtype=float)
        offset = 0
        for p in self.parameters():
            n = p.data.size
            p.data = flat[offset : offset + n].reshape(p.data.shape).copy()
            offset += n
        if offset != flat.size:
            raise DomainError(f"parameter vector length {flat.size} does not match model ({offset})")

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


class Adam:
    """Adam with bias-corrected moments; beta1=0.9, beta2=0.999, eps=1e-8."""

    def __init__(self, params, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.learning_rate = float(learning_rate)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / (1.0 - self.beta1**self.t)
            v_hat = self.v[i] / (1.0 - self.beta2**self.t)
            p.data = p.data - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def state_dict(self):
        return {
            "t": self.t,
            "m": [m.ravel().tolist() for m in self.m],
            "v": [v.ravel().tolist() for v in self.v],
        }

    def load_state_dict(self, state):
        self.t = int(state["t"])
        self.m = [np.asarray(m, dtype=float).reshape(p.data.shape) for m, p in zip(state["m"], self.params)]
        self.v = [np.asarray(v, dtype=float).reshape(p.data.shape) for v, p in zip(state["v"], self.params)]


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = math.inf
    epochs_run: int = 0


def train_model(model: Mlp, x_train, y_train, x_val, y_val, config: TrainConfig, loss_fn) -> TrainHistory:
    """Seeded mini-batch training with early stopping on validation loss.

    loss_fn(outputs, y) maps the network output tensor and a target column to
    a scalar loss tensor. The model ends up holding the parameters of the
    best validation epoch. Non-finite losses abort with epoch and batch
    diagnostics.
    """
    x_train = np.asarray(x_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float).reshape(-1, 1)
    x_val = np.asarray(x_val, dtype=float)
    y_val = np.asarray(y_val, dtype=float).reshape(-1, 1)
    if len(x_train) == 0:
        raise DomainError("empty training split")
    seeds = np.random.SeedSequence([int(config.seed), 0x7472]).spawn(2)
    rng_shuffle = np.random.default_rng(seeds[0])
    rng_dropout = np.random.default_rng(seeds[1])

    optimizer = Adam(model.parameters(), config.learning_rate)
    history = TrainHistory()
    best_params = model.get_flat_params()
    bad_epochs = 0

    for epoch in range(config.max_epochs):
        order = rng_shuffle.permutation(len(x_train))
        batch_losses = []
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            batch_no = start // config.batch_size
            try:
                out = model.forward(x_train[idx], mode="train", rng=rng_dropout)
                loss = loss_fn(out, y_train[idx])
            except TrainingError as err:
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}: {err}",
                    epoch=epoch,
                    batch=batch_no,
                ) from err
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(
                    f"non-finite loss value {value!r} at epoch {epoch}, batch {batch_no}",
                    epoch=epoch,
                    batch=batch_no,
                )
            optimizer.zero_grad()
            loss.backward()
            for p in model.parameters():
                if p.grad is not None and not np.all(np.isfinite(p.grad)):
                    raise TrainingError(
                        f"non-finite gradient at epoch {epoch}, batch {batch_no}",
                        epoch=epoch,
                        batch=batch_no,
                    )
            optimizer.step()
            batch_losses.append(value)
        history.train_loss.append(float(np.mean(batch_losses)))

        val_out = model.forward(x_val, mode="eval")
        val_loss = loss_fn(val_out, y_val).item()
        if not math.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}", epoch=epoch)
        history.val_loss.append(val_loss)
        history.epochs_run = epoch + 1

        if val_loss < history.best_val_loss:
            history.best_val_loss = val_loss
            history.best_epoch = epoch
            best_params = model.get_flat_params()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs > config.early_stop_patience:
                break

    model.set_flat_params(best_params)
    return history


def save_checkpoint(path, model: Mlp, optimizer: Adam | None = None, train_config: TrainConfig | None = None, extra: dict | None = None):
    """Write a versioned textual checkpoint atomically (no partial files)."""
    record = {
        "format_version": CHECKPOINT_VERSION,
        "model_config": asdict(model.config),
        "params": model.get_flat_params().tolist(),
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "train_config": asdict(train_config) if train_config is not None else None,
        "extra": extra or {},
    }
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(record, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    """Read a checkpoint; returns (model, optimizer_state, train_config, extra)."""
    with open(path) as fh:
        record = json.load(fh)
    version = record.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise DomainError(f"unsupported checkpoint version {version!r}")
    config = MlpConfig(**record["model_config"])
    model = Mlp(config, seed=0)
    model.set_flat_params(np.asarray(record["params"], dtype=float))
    train_config = TrainConfig(**{**record["train_config"], "quantiles": tuple(record["train_config"]["quantiles"])}) if record.get("train_config") else None
    return model, record.get("optimizer"), train_config, record.get("extra", {})
