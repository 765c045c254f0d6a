"""Anchor-point estimation of per-class transition matrices.

For an instance whose clean label is certainly ``k``, the noisy posterior
``P(noisy=1 | x)`` equals ``T_k1``.  Taking a high percentile of the predicted
noisy posterior (and of its complement) picks approximate anchors for class 1
(and class 0) without any clean labels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from labelnoise.noise import ClassPrior, NoiseModel, TransitionMatrix, compute_noise_rate, compute_tau

DEFAULT_PERCENTILE = 97.0


def estimate_transition(noisy_probs, percentile: float = DEFAULT_PERCENTILE) -> TransitionMatrix:
    """Read both rows of T off two anchor samples.

    The class-1 anchor is the sample at ``percentile`` of the noisy
    posteriors (``100`` = the maximum); the class-0 anchor is the sample at the
    same percentile of ``1 - posterior``.  Percentiles use numpy's ``higher``
    method so the anchor is always an actual probe sample.
    """
    probs = np.asarray(noisy_probs, dtype=np.float64).ravel()
    if probs.size == 0:
        raise ValueError("empty probe set")
    if probs.size < 2:
        raise ValueError("need at least two probe samples")
    if not (0.0 < percentile <= 100.0):
        raise ValueError(f"percentile must lie in (0, 100], got {percentile}")
    if np.any(probs < 0) or np.any(probs > 1) or not np.isfinite(probs).all():
        raise ValueError("noisy posteriors must lie in [0, 1]")
    t11 = float(np.percentile(probs, percentile, method="higher"))
    t00 = float(np.percentile(1.0 - probs, percentile, method="higher"))
    return TransitionMatrix(t00, 1.0 - t00, 1.0 - t11, t11)


def estimate_prior(noisy_labels, t_hat: TransitionMatrix) -> tuple[ClassPrior, bool]:
    """Invert ``mean(noisy) = T01 + p1 (T11 - T01)`` for the clean prior.

    Returns the prior and whether it had to be clamped into [0, 1].
    """
    tau = compute_tau(t_hat)
    if tau <= 0.0:
        raise ValueError(f"cannot invert noisy positive rate: tau(T_hat) = {tau!r} <= 0")
    labels = np.asarray(noisy_labels).ravel()
    if labels.size == 0:
        raise ValueError("empty label vector")
    p1 = (labels.mean() - t_hat.t01) / (t_hat.t11 - t_hat.t01)
    clamped = not 0.0 <= p1 <= 1.0
    return ClassPrior.from_positive_rate(float(np.clip(p1, 0.0, 1.0))), clamped


def estimate_noise_rate_from_data(noisy_labels, t_hat: TransitionMatrix) -> float:
    prior, clamped = estimate_prior(noisy_labels, t_hat)
    if clamped:
        warnings.warn("estimated clean prior fell outside [0, 1] and was clamped", stacklevel=2)
    return compute_noise_rate(t_hat, prior)


@dataclass
class ClassEstimate:
    transition: TransitionMatrix
    prior: ClassPrior | None
    tau: float
    epsilon: float | None
    flags: list[str]


def estimate_noise_model(probs, noisy_labels, percentile: float = DEFAULT_PERCENTILE):
    """Per-class estimates for ``N x C`` posteriors and noisy labels.

    Returns ``(NoiseModel | None, [ClassEstimate, ...])``.  A class whose
    estimated T has ``tau <= 0`` gets a ``vacuous`` flag and no prior; the
    noise model is only assembled when every class has one.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    noisy_labels = np.atleast_2d(np.asarray(noisy_labels))
    if probs.shape != noisy_labels.shape:
        raise ValueError(f"posteriors {probs.shape} and labels {noisy_labels.shape} differ in shape")
    estimates = []
    for c in range(probs.shape[1]):
        t_hat = estimate_transition(probs[:, c], percentile)
        tau = compute_tau(t_hat)
        if tau <= 0.0:
            estimates.append(ClassEstimate(t_hat, None, tau, None, ["vacuous"]))
            continue
        prior, clamped = estimate_prior(noisy_labels[:, c], t_hat)
        estimates.append(ClassEstimate(t_hat, prior, tau, compute_noise_rate(t_hat, prior),
                                       ["prior_clamped"] if clamped else []))
    model = None
    if all(e.prior is not None for e in estimates):
        model = NoiseModel(tuple((e.transition, e.prior) for e in estimates))
    return model, estimates
