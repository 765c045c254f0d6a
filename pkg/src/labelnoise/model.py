"""Small feed-forward multi-label classifier trained with numpy.

Architecture: ``d -> h1 [-> h2 ...] -> C`` with ReLU hidden layers and a
per-class sigmoid output, so output rows need not sum to one.  Gradients are
written out by hand; training is single-threaded and bit-reproducible for a
fixed seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from labelnoise import elr as elr_mod
from labelnoise.rng import make_rng

CHECKPOINT_FORMAT = "labelnoise-mlp"


class NumericalAbort(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(eq=False)
class MlpClassifier:
    weights: list[np.ndarray]  # layer k: fan_in x fan_out
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (w.shape[1],):
                raise ValueError(f"layer {k}: bias shape {b.shape} does not match weight {w.shape}")
            if k and w.shape[0] != self.weights[k - 1].shape[1]:
                raise ValueError(f"layer {k}: fan-in {w.shape[0]} != previous fan-out")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {k}: non-finite parameters")

    @classmethod
    def init(cls, dims, seed: int) -> "MlpClassifier":
        """Glorot-uniform weights, zero biases, from the ``"init"`` stream."""
        dims = [int(v) for v in dims]
        if len(dims) < 2 or min(dims) < 1:
            raise ValueError(f"dims must list at least input and output sizes, got {dims}")
        rng = make_rng(seed, "init")
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def params(self) -> list[np.ndarray]:
        """Interleaved ``[W0, b0, W1, b1, ...]``; the arrays are shared, not copied."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpClassifier":
        return MlpClassifier([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def forward(self, x) -> np.ndarray:
        return self.forward_cached(x)[0]

    def forward_cached(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dims[0]:
            raise ValueError(f"expected input of shape (B, {self.dims[0]}), got {x.shape}")
        activations = [x]
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = expit(z) if k == last else np.maximum(z, 0.0)
            activations.append(h)
        return h, activations

    def backward(self, activations, dp) -> list[np.ndarray]:
        """Parameter gradients, same order as :attr:`params`.

        ``dp`` is the loss gradient with respect to the sigmoid outputs;
        gradients are summed (not averaged) over the batch.
        """
        p = activations[-1]
        delta = np.asarray(dp, dtype=np.float64) * p * (1.0 - p)
        grads = []
        for k in range(len(self.weights) - 1, -1, -1):
            h_in = activations[k]
            grads.append(delta.sum(axis=0))
            grads.append(h_in.T @ delta)
            if k:
                delta = (delta @ self.weights[k].T) * (h_in > 0.0)
        return grads[::-1]

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": 1,
            "dims": self.dims,
            "hidden_activation": "relu",
            "output_activation": "sigmoid",
            "layers": [{"weight": w.tolist(), "bias": b.tolist()}
                       for w, b in zip(self.weights, self.biases)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MlpClassifier":
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"not a {CHECKPOINT_FORMAT} checkpoint")
        if doc.get("hidden_activation") != "relu" or doc.get("output_activation") != "sigmoid":
            raise ValueError("unsupported activations in checkpoint")
        weights = [np.array(layer["weight"], dtype=np.float64) for layer in doc["layers"]]
        biases = [np.array(layer["bias"], dtype=np.float64) for layer in doc["layers"]]
        model = cls(weights, biases)
        if model.dims != list(doc["dims"]):
            raise ValueError(f"checkpoint dims {doc['dims']} disagree with layer shapes {model.dims}")
        return model


def save_checkpoint(model: MlpClassifier, path: str | Path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model.to_dict(), fh, indent=1)
        fh.write("\n")


def load_checkpoint(path: str | Path) -> MlpClassifier:
    with open(path, encoding="utf-8") as fh:
        return MlpClassifier.from_dict(json.load(fh))


# ----------------------------------------------------------------- optimizers

class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SgdMomentum:
    def __init__(self, params, lr=1e-2, momentum=0.9):
        self.params = params
        self.lr, self.momentum = lr, momentum
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, grads):
        for p, g, vel in zip(self.params, grads, self.velocity):
            vel *= self.momentum
            vel += g
            p -= self.lr * vel


# ------------------------------------------------------------------- training

@dataclass
class TrainConfig:
    hidden: tuple[int, ...] = (32,)
    optimizer: str = "adam"
    lr: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 16
    epochs: int = 20
    seed: int = 0
    loss: str = "bce"
    elr_lambda: float = 3.0
    elr_beta: float = 0.7
    ce_mode: str = "full_bce"
    regularizer_mode: str = "per_label_mean"
    target_mix_alpha: float | None = None

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.optimizer not in ("adam", "sgd-momentum"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd-momentum', got {self.optimizer!r}")
        if self.loss not in ("bce", "elr"):
            raise ValueError(f"loss must be 'bce' or 'elr', got {self.loss!r}")
        # lr = 0 is allowed: it is the documented no-op training run
        if self.lr < 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("lr must be >= 0, batch_size and epochs >= 1")
        if self.ce_mode not in elr_mod.CE_MODES:
            raise ValueError(f"ce_mode must be one of {elr_mod.CE_MODES}")
        if self.regularizer_mode not in elr_mod.REGULARIZER_MODES:
            raise ValueError(f"regularizer_mode must be one of {elr_mod.REGULARIZER_MODES}")


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    acc_noisy_train: float
    acc_noisy_val: float | None = None
    acc_clean_val: float | None = None


@dataclass
class TrainResult:
    model: MlpClassifier
    log: list[EpochRecord] = field(default_factory=list)
    initial: MlpClassifier | None = None


def mean_binary_accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean over classes of the fraction of ``1[p >= 0.5] == label``."""
    return float(((probs >= 0.5) == (labels == 1)).mean())


def train(dataset, cfg: TrainConfig, val=None) -> TrainResult:
    """Fit an MLP to ``dataset.noisy_labels``.

    ``val`` is an optional :class:`~labelnoise.synthdata.LabeledDataset`;
    its noisy and/or clean labels are scored after every epoch.
    """
    if dataset.noisy_labels is None:
        raise ValueError("training needs noisy labels")
    x = dataset.features
    y = dataset.noisy_labels.astype(np.float64)
    n, n_classes = y.shape

    model = MlpClassifier.init([x.shape[1], *cfg.hidden, n_classes], cfg.seed)
    initial = model.copy()
    params = model.params
    if cfg.optimizer == "adam":
        opt = Adam(params, lr=cfg.lr)
    else:
        opt = SgdMomentum(params, lr=cfg.lr, momentum=cfg.momentum)

    state = None
    if cfg.loss == "elr":
        state = elr_mod.ElrState.zeros(
            n, n_classes, beta=cfg.elr_beta, lam=cfg.elr_lambda, ce_mode=cfg.ce_mode,
            regularizer_mode=cfg.regularizer_mode, target_mix_alpha=cfg.target_mix_alpha)
    shuffle_rng = make_rng(cfg.seed, "shuffle")
    mix_rng = make_rng(cfg.seed, "target_mix")

    log = []
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            ids = order[start:start + cfg.batch_size]
            p, acts = model.forward_cached(x[ids])
            if state is None:
                loss, dp = elr_mod.bce_loss(p, y[ids])
            else:
                elr_mod.update_targets(state, ids, elr_mod.clamp_probs(p))
                t = state.targets[ids]
                if state.target_mix_alpha is not None:
                    t = elr_mod.mixed_batch_targets(t, state.target_mix_alpha, mix_rng)
                loss, dp = elr_mod.elr_loss(p, y[ids], t, state.lam, state.ce_mode, state.regularizer_mode)
            if not math.isfinite(loss):
                raise NumericalAbort(epoch, n_batches, loss)
            opt.step(model.backward(acts, dp))
            total += loss
            n_batches += 1

        record = EpochRecord(epoch, total / n_batches, mean_binary_accuracy(model.forward(x), y))
        if val is not None:
            p_val = model.forward(val.features)
            if val.noisy_labels is not None:
                record.acc_noisy_val = mean_binary_accuracy(p_val, val.noisy_labels)
            if val.clean_labels is not None:
                record.acc_clean_val = mean_binary_accuracy(p_val, val.clean_labels)
        log.append(record)
    return TrainResult(model, log, initial)
