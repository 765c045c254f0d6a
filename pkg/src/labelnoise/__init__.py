"""Class-conditional label noise toolkit.

Noise models and label corruption, a clean-accuracy lower bound computed from
noisy-test-set accuracy, a multi-label early-learning regularized loss, anchor
point transition estimation and evaluation metrics, all runnable against
synthetic data with known ground truth.
"""

from labelnoise.bound import (
    BoundInputs,
    BoundReport,
    SweepSpec,
    VacuousBoundError,
    bound_sweep,
    clean_accuracy_lower_bound,
    hoeffding_gap,
    noisy_optimal_accuracy,
)
from labelnoise.noise import (
    ClassPrior,
    NoiseModel,
    TransitionMatrix,
    compute_noise_rate,
    compute_tau,
    corrupt_labels,
)

__version__ = "0.1.0"

__all__ = [
    "BoundInputs",
    "BoundReport",
    "ClassPrior",
    "NoiseModel",
    "SweepSpec",
    "TransitionMatrix",
    "VacuousBoundError",
    "bound_sweep",
    "clean_accuracy_lower_bound",
    "compute_noise_rate",
    "compute_tau",
    "corrupt_labels",
    "hoeffding_gap",
    "noisy_optimal_accuracy",
]
