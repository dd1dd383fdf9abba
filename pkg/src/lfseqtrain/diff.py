"""Loss results and a central finite-difference gradient checker."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from lfseqtrain.core import PosteriorTable


@dataclass
class LossResult:
    """Scalar loss and d(loss)/d(log-posterior) with the table's shape."""

    value: float
    grad: np.ndarray
    info: dict = field(default_factory=dict)

    def __add__(self, other: "LossResult") -> "LossResult":
        return LossResult(self.value + other.value, self.grad + other.grad)

    def scaled(self, factor: float) -> "LossResult":
        return LossResult(factor * self.value, factor * self.grad, dict(self.info))


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass
class GradCheckReport:
    max_abs_error: float
    max_rel_error: float
    passed: bool
    worst_index: tuple | None = None


def finite_diff_check(
    loss_fn: Callable[[PosteriorTable], LossResult],
    table: PosteriorTable,
    step: float = 1e-5,
    tolerance: float = 1e-5,
    rel_floor: float = 1e-4,
) -> GradCheckReport:
    """Compare ``loss_fn(table).grad`` against central differences.

    Each log-posterior entry is perturbed independently without
    re-normalizing its row.  The relative error of an entry is
    ``|analytic - numeric| / max(|analytic|, |numeric|, rel_floor)``; the
    floor keeps entries whose true gradient is ~0 from dominating through
    round-off alone.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    base = loss_fn(table)
    if not math.isfinite(base.value):
        raise NonFiniteLossError(f"loss is not finite at the base point: {base.value}")
    analytic = np.asarray(base.grad, dtype=np.float64)
    if analytic.shape != table.values.shape:
        raise ValueError(f"gradient shape {analytic.shape} does not match table {table.values.shape}")
    numeric = np.zeros_like(analytic)
    values = table.values.copy()
    for idx in np.ndindex(values.shape):
        orig = values[idx]
        if not np.isfinite(orig):
            continue
        values[idx] = orig + step
        up = loss_fn(table.with_values(values)).value
        values[idx] = orig - step
        down = loss_fn(table.with_values(values)).value
        values[idx] = orig
        if not (math.isfinite(up) and math.isfinite(down)):
            raise NonFiniteLossError(f"loss not finite when perturbing entry {idx}")
        numeric[idx] = (up - down) / (2 * step)
    abs_err = np.abs(analytic - numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), rel_floor)
    rel_err = abs_err / denom
    worst = np.unravel_index(int(np.argmax(rel_err)), rel_err.shape) if rel_err.size else None
    max_rel = float(rel_err.max()) if rel_err.size else 0.0
    return GradCheckReport(
        max_abs_error=float(abs_err.max()) if abs_err.size else 0.0,
        max_rel_error=max_rel,
        passed=max_rel <= tolerance,
        worst_index=worst,
    )
