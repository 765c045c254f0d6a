"""Synthetic multi-label data with known clean labels.

Features are standard normal; label ``c`` is driven by the linear logit
``z_c = w_c . x + b_c``.  In ``deterministic`` mode ``y_c = 1[z_c > 0]``, so
the linear rule is a perfect clean classifier; in ``stochastic`` mode
``y_c ~ Bernoulli(sigmoid(z_c))``.  Both modes give closed-form clean and
noisy posteriors, which the tests use as oracles.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit, ndtr

from labelnoise import keyvalue
from labelnoise.keyvalue import format_float
from labelnoise.noise import NoiseModel, corrupt_labels
from labelnoise.rng import make_rng

MODES = ("deterministic", "stochastic")


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    n_samples: int
    weights: np.ndarray  # C x d
    bias: np.ndarray  # C
    mode: str = "deterministic"
    seed: int = 0

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        b = np.atleast_1d(np.asarray(self.bias, dtype=np.float64))
        if b.shape != (w.shape[0],):
            raise ValueError(f"bias has shape {b.shape}, expected ({w.shape[0]},)")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValueError("weights and bias must be finite")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    def replace(self, **changes) -> "GeneratorSpec":
        return dataclasses.replace(self, **changes)

    def to_keyvalue(self, prefix: str = "generator.") -> dict[str, object]:
        out: dict[str, object] = {
            f"{prefix}n_samples": self.n_samples,
            f"{prefix}n_features": self.n_features,
            f"{prefix}n_classes": self.n_classes,
            f"{prefix}mode": self.mode,
            f"{prefix}seed": self.seed,
            f"{prefix}bias": [float(v) for v in self.bias],
        }
        for c, row in enumerate(self.weights):
            out[f"{prefix}w.{c}"] = [float(v) for v in row]
        return out

    @classmethod
    def from_keyvalue(cls, values, prefix: str = "generator.") -> "GeneratorSpec":
        n_classes = keyvalue.get_int(values, prefix + "n_classes")
        weights = [keyvalue.get_float_list(values, f"{prefix}w.{c}") for c in range(n_classes)]
        return cls(
            n_samples=keyvalue.get_int(values, prefix + "n_samples"),
            weights=np.array(weights),
            bias=np.array(keyvalue.get_float_list(values, prefix + "bias")),
            mode=keyvalue.get_str(values, prefix + "mode", choices=MODES),
            seed=keyvalue.get_int(values, prefix + "seed"),
        )


def random_spec(n_samples: int, n_features: int, n_classes: int, seed: int,
                bias=0.0, mode: str = "deterministic", weight_seed: int | None = None) -> GeneratorSpec:
    """GeneratorSpec with unit-norm random weight rows.

    With unit rows the logit ``z_c`` is ``N(b_c, 1)``, so ``bias`` directly
    sets the class prior: ``P(y_c=1) = Phi(b_c)`` in deterministic mode.
    """
    rng = make_rng(seed if weight_seed is None else weight_seed, "weights")
    w = rng.standard_normal((n_classes, n_features))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    b = np.broadcast_to(np.asarray(bias, dtype=np.float64), (n_classes,)).copy()
    return GeneratorSpec(n_samples=n_samples, weights=w, bias=b, mode=mode, seed=seed)


@dataclass(eq=False)
class LabeledDataset:
    features: np.ndarray
    clean_labels: np.ndarray | None
    noisy_labels: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        n = self.features.shape[0]
        for name in ("clean_labels", "noisy_labels"):
            labels = getattr(self, name)
            if labels is None:
                continue
            labels = np.asarray(labels)
            if labels.ndim != 2 or labels.shape[0] != n:
                raise ValueError(f"{name} has shape {labels.shape}, expected ({n}, C)")
            if not np.isin(labels, (0, 1)).all():
                raise ValueError(f"{name} must be 0/1")
            setattr(self, name, labels.astype(np.int8))
        if self.clean_labels is not None and self.noisy_labels is not None:
            if self.clean_labels.shape != self.noisy_labels.shape:
                raise ValueError("clean and noisy label matrices differ in shape")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        labels = self.clean_labels if self.clean_labels is not None else self.noisy_labels
        return labels.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        pick = lambda a: None if a is None else a[idx]
        return LabeledDataset(self.features[idx], pick(self.clean_labels),
                              pick(self.noisy_labels), dict(self.provenance))


def clean_logits(spec: GeneratorSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x @ spec.weights.T + spec.bias


def clean_posterior(spec: GeneratorSpec, x) -> np.ndarray:
    """``P(y_c = 1 | x)``; exactly 0 or 1 in deterministic mode."""
    z = clean_logits(spec, x)
    if spec.mode == "deterministic":
        return (z > 0).astype(np.float64)
    return expit(z)


def generate(spec: GeneratorSpec) -> LabeledDataset:
    """Draw a clean dataset; bit-identical for a fixed spec."""
    x = make_rng(spec.seed, "features").standard_normal((spec.n_samples, spec.n_features))
    z = clean_logits(spec, x)
    if spec.mode == "deterministic":
        y = (z > 0).astype(np.int8)
    else:
        u = make_rng(spec.seed, "labels").random(z.shape)
        y = (u < expit(z)).astype(np.int8)
    return LabeledDataset(x, y, None, {"generator": spec})


def add_noise(dataset: LabeledDataset, model: NoiseModel, seed: int) -> LabeledDataset:
    noisy = corrupt_labels(dataset.clean_labels, model, seed)
    provenance = dict(dataset.provenance, noise_model=model, noise_seed=seed)
    return LabeledDataset(dataset.features, dataset.clean_labels, noisy, provenance)


def analytic_prior(spec: GeneratorSpec) -> np.ndarray:
    """``P(y_c = 1)`` per class under the Gaussian feature law.

    ``z_c ~ N(b_c, |w_c|^2)``.  Deterministic mode gives ``Phi(b_c / |w_c|)``;
    stochastic mode integrates ``sigmoid(z)`` against that normal with
    80-point Gauss-Hermite quadrature.
    """
    scale = np.linalg.norm(spec.weights, axis=1)
    b = spec.bias
    if spec.mode == "deterministic":
        with np.errstate(divide="ignore"):
            ratio = np.where(scale > 0, b / np.where(scale > 0, scale, 1.0), np.where(b > 0, np.inf, -np.inf))
        return ndtr(ratio)
    nodes, weights = np.polynomial.hermite_e.hermegauss(80)
    vals = expit(b[:, None] + scale[:, None] * nodes[None, :])
    return vals @ weights / math.sqrt(2.0 * math.pi)


class BayesClassifier:
    """The generating linear rule, ``y_c = 1[w_c . x + b_c > 0]``."""

    def __init__(self, spec: GeneratorSpec):
        self.spec = spec

    def predict_proba(self, x) -> np.ndarray:
        return clean_posterior(self.spec, x)

    def predict(self, x) -> np.ndarray:
        return (clean_logits(self.spec, x) > 0).astype(np.int8)


def clean_bayes_classifier(spec: GeneratorSpec) -> BayesClassifier:
    if spec.mode != "deterministic":
        raise ValueError("the clean Bayes classifier is exact only for deterministic specs")
    return BayesClassifier(spec)


def noisy_posterior(spec: GeneratorSpec, model: NoiseModel, x, c: int):
    """``P(noisy y_c = 1 | x) = T01 * P(y_c=0 | x) + T11 * P(y_c=1 | x)``.

    ``x`` may be a single d-vector (scalar result) or an ``N x d`` matrix.
    """
    t = model.transition(c)
    x = np.asarray(x, dtype=np.float64)
    post = clean_posterior(spec, np.atleast_2d(x))[:, c]
    out = t.t01 * (1.0 - post) + t.t11 * post
    return float(out[0]) if x.ndim == 1 else out


def noisy_posterior_matrix(spec: GeneratorSpec, model: NoiseModel, x) -> np.ndarray:
    return np.column_stack([noisy_posterior(spec, model, x, c) for c in range(spec.n_classes)])


# ---------------------------------------------------------------- persistence

def _meta_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".meta")


def save_dataset(dataset: LabeledDataset, path: str | Path) -> None:
    """Write ``x*, y*, yt*`` columns plus a key-value ``.meta`` sidecar."""
    path = Path(path)
    d, c = dataset.n_features, dataset.n_classes
    header = [f"x{j}" for j in range(d)]
    blocks = [[[format_float(v) for v in row] for row in dataset.features]]
    if dataset.clean_labels is not None:
        header += [f"y{j}" for j in range(c)]
        blocks.append(dataset.clean_labels.astype(str).tolist())
    if dataset.noisy_labels is not None:
        header += [f"yt{j}" for j in range(c)]
        blocks.append(dataset.noisy_labels.astype(str).tolist())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for parts in zip(*blocks):
            writer.writerow([v for part in parts for v in part])
    keyvalue.dump(_provenance_keyvalue(dataset), _meta_path(path))


def _provenance_keyvalue(dataset: LabeledDataset) -> dict[str, object]:
    meta: dict[str, object] = {
        "dataset.n_samples": dataset.n_samples,
        "dataset.n_features": dataset.n_features,
        "dataset.n_classes": dataset.n_classes,
        "dataset.has_clean": dataset.clean_labels is not None,
        "dataset.has_noisy": dataset.noisy_labels is not None,
    }
    spec = dataset.provenance.get("generator")
    if spec is not None:
        meta.update(spec.to_keyvalue())
    model = dataset.provenance.get("noise_model")
    if model is not None:
        meta.update(model.to_keyvalue(prefix="noise."))
        meta["noise.seed"] = dataset.provenance["noise_seed"]
    return meta


def load_dataset(path: str | Path) -> LabeledDataset:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    cols = {"x": [], "y": [], "yt": []}
    for j, name in enumerate(header):
        kind = name.rstrip("0123456789")
        if kind not in cols:
            raise ValueError(f"{path}: unexpected column '{name}'")
        cols[kind].append(j)
    features = data[:, cols["x"]]
    clean = data[:, cols["y"]].astype(np.int8) if cols["y"] else None
    noisy = data[:, cols["yt"]].astype(np.int8) if cols["yt"] else None

    provenance: dict = {"path": str(path)}
    meta_path = _meta_path(path)
    if meta_path.exists():
        meta = keyvalue.load(meta_path)
        if "generator.n_classes" in meta:
            provenance["generator"] = GeneratorSpec.from_keyvalue(meta)
        if any(k.startswith("noise.class.") for k in meta):
            provenance["noise_model"] = NoiseModel.from_keyvalue(
                {k: v for k, v in meta.items() if k.startswith("noise.class.")}, prefix="noise.")
            provenance["noise_seed"] = keyvalue.get_int(meta, "noise.seed")
    return LabeledDataset(features, clean, noisy, provenance)
