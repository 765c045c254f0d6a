"""Evaluation: thresholded per-class accuracies and per-class ROC AUC.

A label is predicted positive when its probability is ``>= 0.5``.  A derived
``NoFinding`` class is positive exactly when no label is, on both the
prediction side and the label side, giving ``C + 1`` binary accuracies.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from labelnoise.keyvalue import format_float

THRESHOLD = 0.5
NOFINDING = "NoFinding"


class UndefinedAucError(ValueError):
    """AUC requested for a label vector with only one class present."""


def threshold_predict(p):
    """Return ``(1[p >= 0.5], nofinding)`` for a C-vector or an N x C matrix."""
    p = np.asarray(p, dtype=np.float64)
    pred = (p >= THRESHOLD).astype(np.int8)
    return pred, ~pred.any(axis=-1)


def nofinding_labels(labels) -> np.ndarray:
    return ~np.asarray(labels).astype(bool).any(axis=-1)


def binary_accuracies(predictions, labels) -> np.ndarray:
    """Per-class agreement rates, then the NoFinding agreement rate last."""
    predictions = np.atleast_2d(np.asarray(predictions))
    labels = np.atleast_2d(np.asarray(labels))
    if predictions.shape != labels.shape:
        raise ValueError(f"predictions {predictions.shape} and labels {labels.shape} differ in shape")
    if labels.shape[0] == 0:
        raise ValueError("cannot compute accuracy on an empty set")
    per_class = (predictions == labels).mean(axis=0)
    nofinding = (nofinding_labels(predictions) == nofinding_labels(labels)).mean()
    return np.append(per_class, nofinding)


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC with average ranks for tied scores.

    Equals ``(wins + 0.5 * ties) / (P * N)`` over all positive/negative pairs.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError(f"AUC undefined with {n_pos} positives and {n_neg} negatives")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def class_names(n_classes: int) -> list[str]:
    return [f"c{c}" for c in range(n_classes)] + [NOFINDING]


@dataclass
class EvalReport:
    n: int
    class_names: list[str]
    per_class_accuracy_noisy: list[float] | None
    per_class_accuracy_clean: list[float] | None
    per_class_auc: list[float | None]
    auc_labels: str
    mean_auc: float | None
    flags: dict[str, list[str]] = field(default_factory=dict)

    def to_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(asdict(self), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "EvalReport":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def to_csv(self, path: str | Path) -> None:
        fmt = lambda v: "" if v is None else format_float(v)
        n_cls = len(self.per_class_auc)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["class", "acc_noisy", "acc_clean", "auc", "flags"])
            for c, name in enumerate(self.class_names):
                writer.writerow([
                    name,
                    fmt(self.per_class_accuracy_noisy[c]) if self.per_class_accuracy_noisy else "",
                    fmt(self.per_class_accuracy_clean[c]) if self.per_class_accuracy_clean else "",
                    fmt(self.per_class_auc[c]) if c < n_cls else "",
                    ";".join(self.flags.get(name, [])),
                ])


def evaluate(probs, noisy_labels=None, clean_labels=None) -> EvalReport:
    """Score probabilities against noisy and/or clean labels.

    AUC is computed against the clean labels when they exist, otherwise the
    noisy ones.  Classes whose AUC labels contain a single class get an
    ``auc_undefined`` flag and are left out of the mean.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if noisy_labels is None and clean_labels is None:
        raise ValueError("need noisy or clean labels to evaluate")
    n, n_classes = probs.shape
    names = class_names(n_classes)
    pred, _ = threshold_predict(probs)
    acc_noisy = binary_accuracies(pred, noisy_labels).tolist() if noisy_labels is not None else None
    acc_clean = binary_accuracies(pred, clean_labels).tolist() if clean_labels is not None else None

    auc_source = clean_labels if clean_labels is not None else noisy_labels
    flags: dict[str, list[str]] = {}
    aucs: list[float | None] = []
    for c in range(n_classes):
        try:
            aucs.append(roc_auc(probs[:, c], auc_source[:, c]))
        except UndefinedAucError as exc:
            warnings.warn(f"class {names[c]}: {exc}; excluded from mean AUC", stacklevel=2)
            aucs.append(None)
            flags.setdefault(names[c], []).append("auc_undefined")
    defined = [a for a in aucs if a is not None]
    return EvalReport(
        n=n,
        class_names=names,
        per_class_accuracy_noisy=acc_noisy,
        per_class_accuracy_clean=acc_clean,
        per_class_auc=aucs,
        auc_labels="clean" if clean_labels is not None else "noisy",
        mean_auc=float(np.mean(defined)) if defined else None,
        flags=flags,
    )
