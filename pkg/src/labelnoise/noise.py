"""Class-conditional binary label noise.

A multi-label problem with ``C`` labels is treated as ``C`` independent binary
problems.  Each label ``c`` carries a 2x2 row-stochastic transition matrix
``T[k, l] = P(noisy = l | clean = k)`` and a clean prior ``P(clean = k)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from labelnoise import keyvalue
from labelnoise.rng import make_rng

ROW_SUM_TOL = 1e-12


def _check_probability(name: str, value: float) -> None:
    if not np.isfinite(value) or value < 0.0 or value > 1.0:
        raise ValueError(f"{name} must be a probability in [0, 1], got {value!r}")


@dataclass(frozen=True)
class TransitionMatrix:
    """2x2 noise transition matrix, ``t_kl = P(noisy=l | clean=k)``."""

    t00: float
    t01: float
    t10: float
    t11: float

    def __post_init__(self):
        for name in ("t00", "t01", "t10", "t11"):
            _check_probability(name, getattr(self, name))
        if abs(self.t00 + self.t01 - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"row 0 must sum to 1, got t00+t01={self.t00 + self.t01!r}")
        if abs(self.t10 + self.t11 - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"row 1 must sum to 1, got t10+t11={self.t10 + self.t11!r}")

    @classmethod
    def from_diagonal(cls, t00: float, t11: float) -> "TransitionMatrix":
        _check_probability("t00", t00)
        _check_probability("t11", t11)
        return cls(float(t00), 1.0 - t00, 1.0 - t11, float(t11))

    @classmethod
    def identity(cls) -> "TransitionMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def symmetric(cls, rho: float) -> "TransitionMatrix":
        """Flip either class with probability ``rho``."""
        return cls.from_diagonal(1.0 - rho, 1.0 - rho)

    def as_array(self) -> np.ndarray:
        return np.array([[self.t00, self.t01], [self.t10, self.t11]])


@dataclass(frozen=True)
class ClassPrior:
    p0: float
    p1: float

    def __post_init__(self):
        _check_probability("p0", self.p0)
        _check_probability("p1", self.p1)
        if abs(self.p0 + self.p1 - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"prior must sum to 1, got p0+p1={self.p0 + self.p1!r}")

    @classmethod
    def from_positive_rate(cls, p1: float) -> "ClassPrior":
        _check_probability("p1", p1)
        return cls(1.0 - p1, float(p1))


@dataclass(frozen=True)
class NoiseModel:
    """One ``(TransitionMatrix, ClassPrior)`` pair per label index."""

    per_class: tuple[tuple[TransitionMatrix, ClassPrior], ...]

    def __post_init__(self):
        object.__setattr__(self, "per_class", tuple((t, p) for t, p in self.per_class))
        if not self.per_class:
            raise ValueError("noise model needs at least one class")

    @property
    def n_classes(self) -> int:
        return len(self.per_class)

    def transition(self, c: int) -> TransitionMatrix:
        return self.per_class[c][0]

    def prior(self, c: int) -> ClassPrior:
        return self.per_class[c][1]

    @classmethod
    def uniform(cls, t: TransitionMatrix, priors) -> "NoiseModel":
        """Same transition matrix for every class, one prior per entry of ``priors``."""
        return cls(tuple((t, ClassPrior.from_positive_rate(float(p1))) for p1 in priors))

    def to_keyvalue(self, prefix: str = "") -> dict[str, float]:
        out = {}
        for c, (t, prior) in enumerate(self.per_class):
            out[f"{prefix}class.{c}.t00"] = t.t00
            out[f"{prefix}class.{c}.t11"] = t.t11
            out[f"{prefix}class.{c}.p0"] = prior.p0
        return out

    @classmethod
    def from_keyvalue(cls, values: Mapping[str, str], prefix: str = "") -> "NoiseModel":
        keys = [k[len(prefix):] for k in values if k.startswith(prefix + "class.")]
        indices = set()
        for key in keys:
            parts = key.split(".")
            if len(parts) != 3 or not parts[1].isdigit() or parts[2] not in ("t00", "t11", "p0"):
                raise keyvalue.ConfigError(f"unknown noise model key '{prefix}{key}'", prefix + key)
            indices.add(int(parts[1]))
        if not indices:
            raise keyvalue.ConfigError("noise model has no 'class.<c>.*' entries")
        if indices != set(range(len(indices))):
            raise keyvalue.ConfigError(f"noise model class indices must be 0..C-1, got {sorted(indices)}")
        per_class = []
        for c in range(len(indices)):
            base = f"{prefix}class.{c}."
            t = TransitionMatrix.from_diagonal(keyvalue.get_float(values, base + "t00"),
                                               keyvalue.get_float(values, base + "t11"))
            p0 = keyvalue.get_float(values, base + "p0")
            per_class.append((t, ClassPrior(p0, 1.0 - p0)))
        return cls(tuple(per_class))

    def save(self, path: str | Path) -> None:
        keyvalue.dump(self.to_keyvalue(), path)

    @classmethod
    def load(cls, path: str | Path) -> "NoiseModel":
        return cls.from_keyvalue(keyvalue.load(path))


def compute_tau(t: TransitionMatrix) -> float:
    """Smallest diagonal margin ``min(t00 - t01, t11 - t10)``; may be <= 0."""
    return min(t.t00 - t.t01, t.t11 - t.t10)


def compute_noise_rate(t: TransitionMatrix, prior: ClassPrior) -> float:
    """Probability that a label is flipped, ``1 - sum_k P(Y=k) T_kk``."""
    return 1.0 - (prior.p0 * t.t00 + prior.p1 * t.t11)


def corrupt_labels(clean_labels, model: NoiseModel, seed: int) -> np.ndarray:
    """Flip each entry of an ``N x C`` binary matrix through its class's T.

    Entry ``(i, c)`` with clean value ``k`` becomes ``l`` with probability
    ``T^(c)_kl``, independently of every other entry.  One uniform variate is
    drawn per entry, row-major, from the ``"noise"`` stream of ``seed``; the
    result is a pure function of ``(clean_labels, model, seed)``.
    """
    y = np.asarray(clean_labels)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2:
        raise ValueError(f"labels must be an N x C matrix, got shape {np.shape(clean_labels)}")
    if y.shape[1] != model.n_classes:
        raise ValueError(f"labels have {y.shape[1]} classes but noise model has {model.n_classes}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    y = y.astype(np.int8)

    flip_from_0 = np.array([t.t01 for t, _ in model.per_class])
    flip_from_1 = np.array([t.t10 for t, _ in model.per_class])
    flip = np.where(y == 1, flip_from_1, flip_from_0)
    u = make_rng(seed, "noise").random(y.shape)
    out = np.where(u < flip, 1 - y, y).astype(np.int8)
    return out.reshape(np.shape(clean_labels))
