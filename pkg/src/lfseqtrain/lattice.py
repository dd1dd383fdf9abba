"""Layered trellis with forward/backward passes in the expectation semiring.

Every loss in this package is a frame-synchronous DP.  Each frame (or zero-
weight bookkeeping step such as a segment boundary) is a :class:`Layer`: a
set of edges from the previous layer's states to the next layer's states.
An edge carries a log-weight, an additive risk, and optionally the flat index
of the posterior-table entry its weight was read from.  A layer may also prune
states based on their forward mass; the resulting masks are kept constant in
the backward pass.

With all risks zero the same code computes log-partition functions and edge
posteriors for the plain log semiring.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from lfseqtrain.semiring import NEG_INF, posterior_share, scatter_expectation, scatter_logsumexp

PruneFn = Callable[[np.ndarray], np.ndarray]

_fault = {"delta": 0.0}


@contextlib.contextmanager
def injected_fault(delta: float = 1e-3):
    """Test hook: perturb the forward mass of one trellis cell."""
    _fault["delta"] = delta
    try:
        yield
    finally:
        _fault["delta"] = 0.0


@dataclass
class Layer:
    src: np.ndarray
    dst: np.ndarray
    n_out: int
    weight: np.ndarray
    risk: Optional[np.ndarray] = None
    entry: Optional[np.ndarray] = None
    prune: Optional[PruneFn] = None

    def edge_risk(self) -> np.ndarray:
        return self.risk if self.risk is not None else np.zeros(self.src.shape)


@dataclass
class Pass:
    mass: list[np.ndarray]
    risk: list[np.ndarray]


def _combine(idx, mass, risk, size, expectation):
    if expectation:
        return scatter_expectation(idx, mass, risk, size)
    return scatter_logsumexp(idx, mass, size), None


def forward(
    layers: list[Layer], n_start: int = 1, expectation: bool = True
) -> tuple[Pass, list[Optional[np.ndarray]]]:
    mass = np.full(n_start, NEG_INF)
    mass[0] = 0.0
    risk = np.zeros(n_start)
    out = Pass([mass], [risk])
    masks: list[Optional[np.ndarray]] = []
    for j, layer in enumerate(layers):
        cand = mass[layer.src] + layer.weight
        edge_risk = risk[layer.src] + layer.edge_risk() if expectation else None
        mass, risk = _combine(layer.dst, cand, edge_risk, layer.n_out, expectation)
        if risk is None:
            risk = np.zeros(layer.n_out)
        if j == 0 and _fault["delta"] and mass[0] != NEG_INF:
            mass[0] += _fault["delta"]
        keep = None
        if layer.prune is not None:
            keep = layer.prune(mass)
            mass = np.where(keep, mass, NEG_INF)
            risk = np.where(keep, risk, 0.0)
        masks.append(keep)
        out.mass.append(mass)
        out.risk.append(risk)
    return out, masks


def backward(
    layers: list[Layer], masks: list[Optional[np.ndarray]], n_start: int = 1, expectation: bool = True
) -> Pass:
    """Suffix masses and conditional suffix risks; the last layer must end in one state."""
    if layers[-1].n_out != 1:
        raise ValueError("final layer must collapse to a single state")
    mass = np.zeros(1)
    risk = np.zeros(1)
    betas = [mass]
    risks = [risk]
    for j in range(len(layers) - 1, -1, -1):
        layer = layers[j]
        if masks[j] is not None:
            mass = np.where(masks[j], mass, NEG_INF)
        n_in = layers[j - 1].n_out if j > 0 else n_start
        cand = mass[layer.dst] + layer.weight
        edge_risk = risk[layer.dst] + layer.edge_risk() if expectation else None
        mass, risk = _combine(layer.src, cand, edge_risk, n_in, expectation)
        if risk is None:
            risk = np.zeros(n_in)
        betas.append(mass)
        risks.append(risk)
    betas.reverse()
    risks.reverse()
    return Pass(betas, risks)


@dataclass
class Solution:
    """Forward/backward results for one trellis.

    ``log_mass`` is the total log-weight of surviving paths and ``risk`` their
    expected risk.
    """

    layers: list[Layer]
    fwd: Pass
    bwd: Pass
    masks: list[Optional[np.ndarray]]

    @property
    def log_mass(self) -> float:
        return float(self.fwd.mass[-1][0])

    @property
    def risk(self) -> float:
        return float(self.fwd.risk[-1][0])

    def edge_posteriors(self, j: int) -> np.ndarray:
        """Posterior probability of traversing each edge of layer ``j``."""
        layer = self.layers[j]
        beta = self.bwd.mass[j + 1]
        if self.masks[j] is not None:
            beta = np.where(self.masks[j], beta, NEG_INF)
        joint = self.fwd.mass[j][layer.src] + layer.weight + beta[layer.dst]
        return posterior_share(joint, np.full(joint.shape, self.log_mass))

    def risk_edge_grad(self, j: int) -> np.ndarray:
        """d(expected risk) / d(edge log-weight) for layer ``j``."""
        layer = self.layers[j]
        occ = self.edge_posteriors(j)
        through = self.fwd.risk[j][layer.src] + layer.edge_risk() + self.bwd.risk[j + 1][layer.dst]
        return occ * (through - self.risk)


def solve(layers: list[Layer], n_start: int | None = None, expectation: bool = True) -> Solution:
    """Run both passes; the start state is state 0 of the first layer's input.

    With ``expectation=False`` risks are ignored (plain log semiring).
    """
    if n_start is None:
        n_start = int(layers[0].src.max()) + 1 if layers[0].src.size else 1
    fwd, masks = forward(layers, n_start, expectation)
    if fwd.mass[-1][0] == NEG_INF:
        return Solution(layers, fwd, None, masks)
    bwd = backward(layers, masks, n_start, expectation)
    return Solution(layers, fwd, bwd, masks)


def table_grad(layers: list[Layer], edge_grads: list[np.ndarray], size: int, scale: float) -> np.ndarray:
    """Scatter per-edge weight gradients onto posterior-table entries."""
    entries = [layer.entry for layer in layers if layer.entry is not None]
    grads = [g for layer, g in zip(layers, edge_grads) if layer.entry is not None]
    if not entries:
        return np.zeros(size)
    return scale * np.bincount(np.concatenate(entries), weights=np.concatenate(grads), minlength=size)
