"""Log and expectation semirings.

The expectation semiring is kept in normalized form: an element is a pair
``(log_mass, exp_risk)`` where ``exp_risk`` is the risk *conditioned on* the
mass.  Under this parameterization products add risks and sums take a
mass-weighted average, so everything stays in the log domain without
signed-log arithmetic.  It is equivalent to the classical ``(p, p*r)`` pair.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

NEG_INF = -math.inf


def log_plus(x: float, y: float) -> float:
    """log(exp(x) + exp(y)), safe for -inf on either side."""
    if x == NEG_INF:
        return y
    if y == NEG_INF:
        return x
    m = max(x, y)
    return m + math.log1p(math.exp(-abs(x - y)))


def logsumexp(values, axis=None):
    """logsumexp that returns -inf (not nan) for all -inf slices."""
    a = np.asarray(values, dtype=np.float64)
    if a.size == 0:
        return NEG_INF if axis is None else np.full(np.delete(a.shape, axis), NEG_INF)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


class ExpectationValue(NamedTuple):
    log_mass: float
    exp_risk: float


EXP_ZERO = ExpectationValue(NEG_INF, 0.0)
EXP_ONE = ExpectationValue(0.0, 0.0)


def exp_plus(x: ExpectationValue, y: ExpectationValue) -> ExpectationValue:
    log_mass = log_plus(x.log_mass, y.log_mass)
    if log_mass == NEG_INF:
        return EXP_ZERO
    wx = math.exp(x.log_mass - log_mass) if x.log_mass != NEG_INF else 0.0
    wy = math.exp(y.log_mass - log_mass) if y.log_mass != NEG_INF else 0.0
    return ExpectationValue(log_mass, wx * x.exp_risk + wy * y.exp_risk)


def exp_times(x: ExpectationValue, edge_log_weight: float, edge_risk: float) -> ExpectationValue:
    """Extend ``x`` by an edge carrying ``edge_log_weight`` and ``edge_risk``."""
    log_mass = x.log_mass + edge_log_weight
    if log_mass == NEG_INF:
        return EXP_ZERO
    return ExpectationValue(log_mass, x.exp_risk + edge_risk)


def exp_product(x: ExpectationValue, y: ExpectationValue) -> ExpectationValue:
    """Semiring product of two elements (``exp_times`` with ``y`` as the edge)."""
    return exp_times(x, y.log_mass, y.exp_risk)


# Vectorized scatter forms used by the lattice engine.


def scatter_logsumexp(dst: np.ndarray, values: np.ndarray, size: int) -> np.ndarray:
    """out[j] = logsumexp(values[dst == j]); -inf for empty groups."""
    out = np.full(size, NEG_INF)
    if dst.size == 0:
        return out
    np.maximum.at(out, dst, values)
    shift = np.where(np.isfinite(out), out, 0.0)
    with np.errstate(invalid="ignore"):
        w = np.exp(values - shift[dst])
    w[values == NEG_INF] = 0.0
    total = np.bincount(dst, weights=w, minlength=size)
    with np.errstate(divide="ignore"):
        return np.where(total > 0, np.log(total) + shift, NEG_INF)


def scatter_expectation(
    dst: np.ndarray, log_mass: np.ndarray, risk: np.ndarray, size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Group-wise semiring sum of ``(log_mass, risk)`` elements by ``dst``."""
    out_mass = scatter_logsumexp(dst, log_mass, size)
    share = posterior_share(log_mass, out_mass[dst])
    out_risk = np.bincount(dst, weights=share * risk, minlength=size)
    return out_mass, out_risk


def posterior_share(log_part: np.ndarray, log_total: np.ndarray) -> np.ndarray:
    """exp(log_part - log_total) with 0 wherever the part has no mass."""
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.exp(log_part - log_total)
    out[np.isnan(out) | (log_part == NEG_INF)] = 0.0
    return out
