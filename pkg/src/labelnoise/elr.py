"""Multi-label early-learning regularized loss.

Per sample ``i`` with sigmoid outputs ``p_i``, noisy labels ``y_i`` and a
moving-average target ``t_i``::

    loss_i = CE(p_i, y_i) + lam * R(p_i, t_i)

``R`` is ``log(1 - <t, p>)`` adapted to outputs that do not sum to one:

* ``per_label_mean``: ``(1/C) sum_c log(1 - t_c p_c)``
* ``inner_product``:  ``log(max(1 - <t, p>/C, 1e-7))``

Because ``d R / d p_c <= 0`` wherever ``t_c > 0``, the regularizer keeps
pushing up outputs that the model confidently predicted early on, which
counteracts the cross-entropy pull toward a flipped negative label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_CLAMP = 1e-7
INNER_PRODUCT_FLOOR = 1e-7

CE_MODES = ("full_bce", "positive_only")
REGULARIZER_MODES = ("per_label_mean", "inner_product")


def clamp_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


@dataclass(eq=False)
class ElrState:
    """Moving-average targets, one row per training sample id."""

    targets: np.ndarray
    beta: float = 0.7
    lam: float = 3.0
    ce_mode: str = "full_bce"
    regularizer_mode: str = "per_label_mean"
    target_mix_alpha: float | None = None

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.targets.ndim != 2:
            raise ValueError(f"targets must be N x C, got shape {self.targets.shape}")
        if np.any(self.targets < 0) or np.any(self.targets > 1):
            raise ValueError("targets must lie in [0, 1]")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.ce_mode not in CE_MODES:
            raise ValueError(f"ce_mode must be one of {CE_MODES}, got {self.ce_mode!r}")
        if self.regularizer_mode not in REGULARIZER_MODES:
            raise ValueError(f"regularizer_mode must be one of {REGULARIZER_MODES}, got {self.regularizer_mode!r}")
        if self.target_mix_alpha is not None and self.target_mix_alpha <= 0:
            raise ValueError(f"target mix alpha must be > 0, got {self.target_mix_alpha}")

    @classmethod
    def zeros(cls, n_samples: int, n_classes: int, **kwargs) -> "ElrState":
        return cls(np.zeros((n_samples, n_classes)), **kwargs)


def update_targets(state: ElrState, ids, p_batch) -> ElrState:
    """``t_i <- beta * t_i + (1 - beta) * p_i`` for the rows in ``ids``, in place."""
    ids = np.asarray(ids)
    n = state.targets.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        bad = ids[(ids < 0) | (ids >= n)][0]
        raise IndexError(f"unknown sample id {bad} (state holds {n} samples)")
    p_batch = np.asarray(p_batch, dtype=np.float64)
    state.targets[ids] = state.beta * state.targets[ids] + (1.0 - state.beta) * p_batch
    return state


def bce_loss(p, y):
    """Mean-over-batch binary cross entropy and its gradient w.r.t. ``p``."""
    return elr_loss(p, y, None, 0.0)


def elr_loss(p, y, t, lam: float, ce_mode: str = "full_bce",
             regularizer_mode: str = "per_label_mean"):
    """Return ``(loss, dloss/dp)`` for a batch.

    ``p`` is clamped to ``[1e-7, 1 - 1e-7]`` first; the gradient is zero for
    entries the clamp moved.  ``t`` is ignored when ``lam == 0``.
    """
    p_raw = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    batch, n_classes = p_raw.shape
    p = clamp_probs(p_raw)

    if ce_mode == "full_bce":
        ce = -(y * np.log(p) + (1.0 - y) * np.log1p(-p)).sum(axis=1)
        grad = -(y / p - (1.0 - y) / (1.0 - p))
    elif ce_mode == "positive_only":
        ce = -(y * np.log(p)).sum(axis=1)
        grad = -y / p
    else:
        raise ValueError(f"unknown ce_mode {ce_mode!r}")
    per_sample = ce

    if lam != 0.0:
        t = np.asarray(t, dtype=np.float64)
        if regularizer_mode == "per_label_mean":
            one_minus = 1.0 - t * p
            reg = np.log(one_minus).mean(axis=1)
            reg_grad = -(t / n_classes) / one_minus
        elif regularizer_mode == "inner_product":
            one_minus = 1.0 - (t * p).sum(axis=1) / n_classes
            active = one_minus > INNER_PRODUCT_FLOOR
            reg = np.log(np.maximum(one_minus, INNER_PRODUCT_FLOOR))
            reg_grad = np.where(active[:, None], -(t / n_classes) / np.where(active, one_minus, 1.0)[:, None], 0.0)
        else:
            raise ValueError(f"unknown regularizer_mode {regularizer_mode!r}")
        per_sample = per_sample + lam * reg
        grad = grad + lam * reg_grad

    inside = (p_raw >= PROB_CLAMP) & (p_raw <= 1.0 - PROB_CLAMP)
    grad = np.where(inside, grad, 0.0) / batch
    return float(per_sample.mean()), grad


def mix_targets(t_i, t_j, alpha_mix: float, seed):
    """Convex mix ``a * t_i + (1 - a) * t_j`` with ``a ~ Beta(alpha, alpha)``.

    ``seed`` is an int or a generator exposing ``beta(a, b)``.  Only targets
    are mixed; inputs and labels are left alone.
    """
    if alpha_mix <= 0:
        raise ValueError(f"alpha_mix must be > 0, got {alpha_mix}")
    rng = np.random.default_rng(seed) if isinstance(seed, (int, np.integer)) else seed
    a = rng.beta(alpha_mix, alpha_mix)
    return a * np.asarray(t_i, dtype=np.float64) + (1.0 - a) * np.asarray(t_j, dtype=np.float64)


def mixed_batch_targets(t_batch: np.ndarray, alpha_mix: float, rng: np.random.Generator) -> np.ndarray:
    """Mix each row with a randomly permuted partner row, one ``a`` per batch."""
    partner = rng.permutation(t_batch.shape[0])
    return mix_targets(t_batch, t_batch[partner], alpha_mix, rng)
