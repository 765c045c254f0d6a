"""Lower bound on clean-distribution accuracy from noisy-test-set accuracy.

For a binary label with transition matrix ``T``, diagonal margin ``tau`` and
noise rate ``eps``, a classifier scoring ``acc`` on a noisy test set of size
``n`` satisfies, with probability at least ``1 - delta``::

    A_clean >= 1 + (-1 + eps + acc - sqrt(ln(1/delta) / (2 n))) / tau

The square-root term is the Hoeffding deviation between noisy test accuracy
and noisy distribution accuracy; ``1 - eps`` is the best noisy accuracy any
classifier can reach.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence, TextIO

from labelnoise.keyvalue import format_float

DEFAULT_DELTA = 0.05

FLAG_VACUOUS = "vacuous"
FLAG_SATURATED = "saturated"


class VacuousBoundError(ValueError):
    """Raised when tau <= 0, where the bound's denominator is zero or flips sign."""

    def __init__(self, tau: float):
        super().__init__(
            f"vacuous bound: tau = {tau!r} <= 0 (transition matrix is not diagonally dominant)"
        )
        self.tau = tau


@dataclass(frozen=True)
class BoundInputs:
    noisy_test_accuracy: float
    delta: float
    test_set_size: int
    tau: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.noisy_test_accuracy <= 1.0:
            raise ValueError(f"noisy_test_accuracy must lie in [0, 1], got {self.noisy_test_accuracy!r}")
        _check_delta(self.delta)
        if int(self.test_set_size) != self.test_set_size or self.test_set_size < 1:
            raise ValueError(f"test_set_size must be a positive integer, got {self.test_set_size!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon!r}")
        if not math.isfinite(self.tau):
            raise ValueError(f"tau must be finite, got {self.tau!r}")


@dataclass(frozen=True)
class BoundReport:
    """Bound value plus every intermediate quantity.

    ``lower_bound`` is never clamped.  ``saturated`` is set when the
    parenthesized term is positive, i.e. ``acc - gap > 1 - eps``, which no
    achievable classifier can produce and therefore signals inconsistent
    inputs (typically a misestimated T or eps).
    """

    inputs: BoundInputs
    hoeffding_gap: float
    lower_bound: float
    saturated: bool

    @property
    def flags(self) -> list[str]:
        return [FLAG_SATURATED] if self.saturated else []

    def as_dict(self) -> dict:
        out = asdict(self.inputs)
        out.update(
            hoeffding_gap=self.hoeffding_gap,
            noisy_optimal_accuracy=noisy_optimal_accuracy(self.inputs.epsilon),
            lower_bound=self.lower_bound,
            saturated=self.saturated,
        )
        return out


def _check_delta(delta: float) -> None:
    if not (0.0 < delta <= 1.0):
        raise ValueError(f"delta must lie in (0, 1], got {delta!r}")


def hoeffding_gap(delta: float, n: int) -> float:
    """``sqrt(ln(1/delta) / (2 n))``."""
    _check_delta(delta)
    if n < 1:
        raise ValueError(f"test set size must be >= 1, got {n!r}")
    return math.sqrt(math.log(1.0 / delta) / (2.0 * n))


def noisy_optimal_accuracy(epsilon: float) -> float:
    """Best achievable accuracy on the noisy distribution, ``1 - eps``."""
    return 1.0 - epsilon


def clean_accuracy_lower_bound(inputs: BoundInputs) -> BoundReport:
    if inputs.tau <= 0.0:
        raise VacuousBoundError(inputs.tau)
    gap = hoeffding_gap(inputs.delta, inputs.test_set_size)
    slack = -1.0 + inputs.epsilon + inputs.noisy_test_accuracy - gap
    return BoundReport(
        inputs=inputs,
        hoeffding_gap=gap,
        lower_bound=1.0 + slack / inputs.tau,
        saturated=slack > 0.0,
    )


@dataclass
class SweepSpec:
    """Grid for bound curves under symmetric noise ``T = [[1-r, r], [r, 1-r]]``.

    With symmetric noise ``eps = r`` and ``tau = 1 - 2r``.  ``mode`` selects
    the curve family:

    * ``"accuracy"``: one curve per value in ``accuracies``, test size fixed
      at ``n``.
    * ``"size"``: one curve per value in ``sizes``, noisy accuracy fixed at
      ``(1 - eps) - accuracy_offset``.
    """

    epsilons: Sequence[float]
    mode: str = "size"
    accuracies: Sequence[float] = ()
    sizes: Sequence[int] = (1_000, 10_000, 100_000)
    n: int = 10_000
    delta: float = DEFAULT_DELTA
    accuracy_offset: float = 0.1


@dataclass
class SweepRow:
    epsilon: float
    tau: float
    noisy_accuracy: float
    n: int
    delta: float
    gap: float
    lower_bound: float | None
    flags: list[str] = field(default_factory=list)


def bound_sweep(spec: SweepSpec) -> list[SweepRow]:
    """One row per grid point, curves outer and epsilon inner.

    Points with ``tau <= 0`` (``eps >= 0.5``) get ``lower_bound=None`` and a
    ``vacuous`` flag rather than an exception.
    """
    if len(spec.epsilons) == 0:
        raise ValueError("sweep needs at least one epsilon value")
    if spec.mode == "accuracy":
        if len(spec.accuracies) == 0:
            raise ValueError("accuracy sweep needs at least one accuracy value")
        curves = [(acc, spec.n) for acc in spec.accuracies]
    elif spec.mode == "size":
        if len(spec.sizes) == 0:
            raise ValueError("size sweep needs at least one test set size")
        curves = [(None, n) for n in spec.sizes]
    else:
        raise ValueError(f"unknown sweep mode {spec.mode!r}; expected 'accuracy' or 'size'")

    rows = []
    for acc_fixed, n in curves:
        for eps in spec.epsilons:
            eps = float(eps)
            tau = 1.0 - 2.0 * eps
            acc = acc_fixed if acc_fixed is not None else (1.0 - eps) - spec.accuracy_offset
            gap = hoeffding_gap(spec.delta, n)
            if tau <= 0.0:
                rows.append(SweepRow(eps, tau, acc, n, spec.delta, gap, None, [FLAG_VACUOUS]))
                continue
            # accuracies outside [0, 1] are legitimate curve points here, so
            # the arithmetic is done inline rather than through BoundInputs
            slack = -1.0 + eps + acc - gap
            rows.append(SweepRow(eps, tau, acc, n, spec.delta, gap, 1.0 + slack / tau,
                                 [FLAG_SATURATED] if slack > 0.0 else []))
    return rows


SWEEP_HEADER = ("epsilon", "tau", "noisy_accuracy", "n", "delta", "gap", "lower_bound", "flags")


def write_sweep_csv(rows: Iterable[SweepRow], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for r in rows:
        writer.writerow([
            format_float(r.epsilon),
            format_float(r.tau),
            format_float(r.noisy_accuracy),
            r.n,
            format_float(r.delta),
            format_float(r.gap),
            "" if r.lower_bound is None else format_float(r.lower_bound),
            ";".join(r.flags),
        ])
