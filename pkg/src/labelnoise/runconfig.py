"""Run-config schema: dotted keys to library objects.

Sections: ``seed`` (master seed), ``generator.*``, ``noise.*``, ``train.*``,
``elr.*``, ``bound.*``.  Unknown keys are rejected by name.
"""

from __future__ import annotations

from typing import Mapping

from labelnoise import keyvalue
from labelnoise.keyvalue import ConfigError
from labelnoise.model import TrainConfig
from labelnoise.noise import NoiseModel, TransitionMatrix, ClassPrior
from labelnoise.synthdata import MODES, GeneratorSpec, random_spec

GENERATOR_KEYS = {
    "generator.n_samples", "generator.n_features", "generator.n_classes",
    "generator.mode", "generator.bias", "generator.weight_seed",
}
NOISE_KEYS = {"noise.rho", "noise.t00", "noise.t11"}
NOISE_PREFIXES = ("noise.class.",)
TRAIN_KEYS = {
    "train.data", "train.val", "train.hidden", "train.optimizer", "train.lr",
    "train.momentum", "train.batch_size", "train.epochs", "train.loss",
}
ELR_KEYS = {"elr.lambda", "elr.beta", "elr.ce_mode", "elr.regularizer_mode", "elr.target_mix_alpha"}
BOUND_KEYS = {"bound.trials", "bound.test_size", "bound.delta", "bound.proxy_size"}


def master_seed(values: Mapping[str, str]) -> int:
    seed = keyvalue.get_int(values, "seed")
    if seed < 0 or seed >= 2**64:
        raise ConfigError(f"config key 'seed' must be an unsigned 64-bit integer, got {seed}", "seed")
    return seed


def generator_spec(values: Mapping[str, str], seed: int) -> GeneratorSpec:
    n_classes = keyvalue.get_int(values, "generator.n_classes")
    bias = keyvalue.get_float_list(values, "generator.bias", [0.0])
    if len(bias) == 1:
        bias = bias * n_classes
    if len(bias) != n_classes:
        raise ConfigError(f"'generator.bias' needs 1 or {n_classes} values, got {len(bias)}", "generator.bias")
    return random_spec(
        n_samples=keyvalue.get_int(values, "generator.n_samples"),
        n_features=keyvalue.get_int(values, "generator.n_features"),
        n_classes=n_classes,
        seed=seed,
        bias=bias,
        mode=keyvalue.get_str(values, "generator.mode", "deterministic", choices=MODES),
        weight_seed=keyvalue.get_int(values, "generator.weight_seed", seed),
    )


def has_noise(values: Mapping[str, str]) -> bool:
    return any(k.startswith("noise.") for k in values)


def noise_model(values: Mapping[str, str], priors) -> NoiseModel:
    """Transition matrices from ``noise.*`` with the given clean priors.

    Accepted forms, most specific first: ``noise.class.<c>.t00`` /
    ``noise.class.<c>.t11`` per class, ``noise.t00`` / ``noise.t11`` for all
    classes, or ``noise.rho`` for symmetric flips.
    """
    per_class = []
    for c, p1 in enumerate(priors):
        base = f"noise.class.{c}."
        if base + "t00" in values or base + "t11" in values:
            t = TransitionMatrix.from_diagonal(keyvalue.get_float(values, base + "t00"),
                                               keyvalue.get_float(values, base + "t11"))
        elif "noise.t00" in values or "noise.t11" in values:
            t = TransitionMatrix.from_diagonal(keyvalue.get_float(values, "noise.t00"),
                                               keyvalue.get_float(values, "noise.t11"))
        else:
            t = TransitionMatrix.symmetric(keyvalue.get_float(values, "noise.rho"))
        per_class.append((t, ClassPrior.from_positive_rate(float(p1))))
    for key in values:
        if key.startswith("noise.class."):
            parts = key.split(".")
            if (len(parts) != 4 or not parts[2].isdigit() or int(parts[2]) >= len(per_class)
                    or parts[3] not in ("t00", "t11")):
                raise ConfigError(f"unknown config key '{key}'", key)
    return NoiseModel(tuple(per_class))


def train_config(values: Mapping[str, str], seed: int) -> TrainConfig:
    alpha = values.get("elr.target_mix_alpha")
    try:
        return TrainConfig(
            hidden=tuple(keyvalue.get_int_list(values, "train.hidden", [32])),
            optimizer=keyvalue.get_str(values, "train.optimizer", "adam", choices=("adam", "sgd-momentum")),
            lr=keyvalue.get_float(values, "train.lr", 1e-3),
            momentum=keyvalue.get_float(values, "train.momentum", 0.9),
            batch_size=keyvalue.get_int(values, "train.batch_size", 16),
            epochs=keyvalue.get_int(values, "train.epochs", 20),
            seed=seed,
            loss=keyvalue.get_str(values, "train.loss", "bce", choices=("bce", "elr")),
            elr_lambda=keyvalue.get_float(values, "elr.lambda", 3.0),
            elr_beta=keyvalue.get_float(values, "elr.beta", 0.7),
            ce_mode=keyvalue.get_str(values, "elr.ce_mode", "full_bce"),
            regularizer_mode=keyvalue.get_str(values, "elr.regularizer_mode", "per_label_mean"),
            target_mix_alpha=None if alpha is None else keyvalue.get_float(values, "elr.target_mix_alpha"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid training config: {exc}") from None
