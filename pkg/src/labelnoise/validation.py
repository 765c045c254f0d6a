"""Monte Carlo check of the clean-accuracy lower bound.

One classifier is trained on a noisy training set and then frozen.  Each
trial draws a fresh noisy test set of size ``n`` from the same generator,
computes the bound from the noisy accuracy and the true ``T``/``eps``, and
compares it to the classifier's accuracy on that test set's clean labels.
A large noisy sample stands in for the noisy distribution to check the
Hoeffding step (noisy distribution accuracy >= noisy test accuracy - gap)
separately.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from labelnoise.bound import BoundInputs, clean_accuracy_lower_bound
from labelnoise.keyvalue import format_float
from labelnoise.metrics import binary_accuracies, threshold_predict
from labelnoise.model import TrainConfig, train
from labelnoise.noise import NoiseModel, compute_noise_rate, compute_tau
from labelnoise.rng import make_rng
from labelnoise.synthdata import GeneratorSpec, add_noise, generate


def derive_seed(master: int, name: str, index: int = 0) -> int:
    return int(make_rng(master, name, index).integers(0, 2**63))


@dataclass
class TrialRow:
    trial: int
    label: int
    n: int
    acc_noisy: float
    acc_clean: float
    gap: float
    lower_bound: float
    covered: bool
    acc_noisy_dist: float
    acc_clean_dist: float
    generalization_ok: bool


@dataclass
class ValidationResult:
    rows: list[TrialRow]
    delta: float
    n_classes: int
    coverage: list[float] = field(default_factory=list)
    generalization_coverage: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c >= 1.0 - self.delta for c in self.coverage)

    def summary(self) -> dict[str, object]:
        out: dict[str, object] = {
            "trials": len(self.rows) // self.n_classes,
            "delta": self.delta,
            "passed": self.passed,
        }
        for c in range(self.n_classes):
            out[f"class.{c}.coverage"] = self.coverage[c]
            out[f"class.{c}.generalization_coverage"] = self.generalization_coverage[c]
        return out


def validate_bound(spec: GeneratorSpec, noise: NoiseModel, cfg: TrainConfig, *, trials: int,
                   test_size: int, delta: float, proxy_size: int, seed: int) -> ValidationResult:
    """Run ``trials`` bound checks against a classifier trained once.

    ``noise`` supplies the true T per class; its priors are used for ``eps``.
    Raises :class:`~labelnoise.bound.VacuousBoundError` if any true T has
    ``tau <= 0``.
    """
    if spec.mode != "deterministic":
        raise ValueError("bound validation needs a deterministic generator")
    if trials < 1 or test_size < 1 or proxy_size < 1:
        raise ValueError("trials, test_size and proxy_size must be >= 1")
    n_classes = spec.n_classes
    taus = [compute_tau(noise.transition(c)) for c in range(n_classes)]
    epsilons = [compute_noise_rate(noise.transition(c), noise.prior(c)) for c in range(n_classes)]

    train_set = add_noise(generate(spec.replace(seed=derive_seed(seed, "train_features"))),
                          noise, derive_seed(seed, "train_noise"))
    model = train(train_set, cfg).model

    proxy = add_noise(generate(spec.replace(n_samples=proxy_size, seed=derive_seed(seed, "proxy_features"))),
                      noise, derive_seed(seed, "proxy_noise"))
    proxy_pred, _ = threshold_predict(model.forward(proxy.features))
    acc_noisy_dist = binary_accuracies(proxy_pred, proxy.noisy_labels)
    acc_clean_dist = binary_accuracies(proxy_pred, proxy.clean_labels)

    rows = []
    for r in range(trials):
        test_spec = spec.replace(n_samples=test_size, seed=derive_seed(seed, "test_features", r))
        test = add_noise(generate(test_spec), noise, derive_seed(seed, "test_noise", r))
        pred, _ = threshold_predict(model.forward(test.features))
        acc_noisy = binary_accuracies(pred, test.noisy_labels)
        acc_clean = binary_accuracies(pred, test.clean_labels)
        for c in range(n_classes):
            report = clean_accuracy_lower_bound(
                BoundInputs(float(acc_noisy[c]), delta, test_size, taus[c], epsilons[c]))
            rows.append(TrialRow(
                trial=r, label=c, n=test_size,
                acc_noisy=float(acc_noisy[c]), acc_clean=float(acc_clean[c]),
                gap=report.hoeffding_gap, lower_bound=report.lower_bound,
                covered=bool(acc_clean[c] >= report.lower_bound),
                acc_noisy_dist=float(acc_noisy_dist[c]), acc_clean_dist=float(acc_clean_dist[c]),
                generalization_ok=bool(acc_noisy_dist[c] >= acc_noisy[c] - report.hoeffding_gap),
            ))

    result = ValidationResult(rows, delta, n_classes)
    for c in range(n_classes):
        mine = [row for row in rows if row.label == c]
        result.coverage.append(sum(row.covered for row in mine) / len(mine))
        result.generalization_coverage.append(sum(row.generalization_ok for row in mine) / len(mine))
    return result


COVERAGE_HEADER = ("trial", "class", "n", "acc_noisy", "acc_clean", "gap", "lower_bound", "covered",
                   "acc_noisy_dist", "acc_clean_dist", "generalization_ok")


def write_coverage_csv(result: ValidationResult, fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(COVERAGE_HEADER)
    for r in result.rows:
        writer.writerow([r.trial, r.label, r.n, format_float(r.acc_noisy), format_float(r.acc_clean),
                         format_float(r.gap), format_float(r.lower_bound), int(r.covered),
                         format_float(r.acc_noisy_dist), format_float(r.acc_clean_dist),
                         int(r.generalization_ok)])
