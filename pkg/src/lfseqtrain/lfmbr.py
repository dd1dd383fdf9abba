"""Lattice-free label-level MBR with a smoothed Hamming risk.

Hypotheses are recombined on (labels emitted so far, k-label history).  The
risk of a label sequence is position-local, so it is charged as each label
is emitted; missing positions are charged once at the end.  Two prunes keep
the state space small and are treated as constants when differentiating:

* a length window ``|s - s_viterbi(t)| <= W`` around the reference emission
  schedule, and
* a probability prune dropping ``(t, s, u)`` when its log-mass falls below
  ``gamma * max_u log-mass(t, s, u)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from lfseqtrain import lattice
from lfseqtrain.core import PAD, InfeasibleTargetError, PosteriorTable, SegmentInfo, check_labels
from lfseqtrain.diff import LossResult
from lfseqtrain.lfsegmbr import local_cost, position_costs
from lfseqtrain.lm import NGramPhonemeLM, ScoreScales, score_arrays


@dataclass(frozen=True)
class MbrConfig:
    """``gamma = inf`` disables the probability prune; ``W >= T`` the length window."""

    L: int = 3
    gamma: float = 1.1
    W: int = 4

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError("gamma must be > 1")
        if self.W < 0 or self.L < 0:
            raise ValueError("need W >= 0 and L >= 0")


UNPRUNED = MbrConfig(gamma=math.inf, W=10**9)


def hamming_cost(hyp: Sequence[int], ref: Sequence[int], L: int) -> float:
    """Smoothed per-position cost after padding both sequences to equal length."""
    total = 0.0
    for s in range(1, max(len(hyp), len(ref)) + 1):
        a = hyp[s - 1] if s <= len(hyp) else PAD
        total += local_cost(a, ref, s, L)
    return total


def mbr_layers(
    table: PosteriorTable,
    target: Sequence[int],
    positions: Sequence[int],
    lm: NGramPhonemeLM | None,
    scales: ScoreScales,
    cfg: MbrConfig,
) -> list[lattice.Layer]:
    T, V = table.T, table.V
    space = table.space
    n_ctx, n_sym = space.size, table.vocab.n_symbols
    S_ref = len(target)
    S_max = min(T, S_ref + cfg.W)
    n = (S_max + 1) * n_ctx
    label_q, blank_q = score_arrays(table, lm, scales)
    costs = position_costs(target, cfg.L, V, S_max)
    sched = [0] + [int(p) for p in positions]

    templates: dict[tuple[int, int], tuple] = {}
    layers = []
    for t in range(T):
        lo = max(0, sched[t] - cfg.W)
        hi = min(t, sched[t] + cfg.W, S_max)
        key = (hi - lo, int(hi == S_max))
        if key not in templates:
            templates[key] = _edge_template(hi - lo + 1, hi < S_max, space)
        src, dst, ctx, sym, n_blank, n_lab_s = templates[key]
        shift = lo * n_ctx
        lab_pos = np.repeat(np.arange(lo + 1, lo + 1 + n_lab_s), n_ctx * V)
        layers.append(
            lattice.Layer(
                src=src + shift,
                dst=dst + shift,
                n_out=n,
                weight=np.concatenate([np.tile(blank_q[t], n_blank // n_ctx), np.tile(label_q[t].reshape(-1), n_lab_s)]),
                risk=np.concatenate([np.zeros(n_blank), costs[lab_pos, sym[n_blank:]]]),
                entry=(t * n_ctx + ctx) * n_sym + sym,
                prune=_pruner(sched[t + 1], cfg, S_max, n_ctx),
            )
        )
    final_s = np.arange(n) // n_ctx
    layers.append(
        lattice.Layer(
            np.arange(n), np.zeros(n, dtype=np.int64), 1, np.zeros(n), risk=np.maximum(S_ref - final_s, 0).astype(float)
        )
    )
    return layers


def _edge_template(n_s: int, last_emits: bool, space):
    """Edges leaving label counts ``0..n_s-1`` (shifted by the caller): blanks, then labels.

    The highest count emits only if ``last_emits`` (it is below the cap).
    """
    n_ctx, V = space.size, space.V
    n_lab_s = n_s if last_emits else n_s - 1
    b_src = np.arange(n_s * n_ctx)
    lab_s = np.repeat(np.arange(n_lab_s), n_ctx * V)
    lab_ctx = np.tile(np.repeat(np.arange(n_ctx), V), n_lab_s)
    lab_sym = np.tile(np.arange(V), n_lab_s * n_ctx)
    return (
        np.concatenate([b_src, lab_s * n_ctx + lab_ctx]),
        np.concatenate([b_src, (lab_s + 1) * n_ctx + space.advance[lab_ctx, lab_sym]]),
        np.concatenate([b_src % n_ctx, lab_ctx]),
        np.concatenate([np.full(len(b_src), V), lab_sym]),
        len(b_src),
        n_lab_s,
    )


def _pruner(center: int, cfg: MbrConfig, S_max: int, n_ctx: int):
    def prune(mass: np.ndarray) -> np.ndarray:
        grid = mass.reshape(S_max + 1, n_ctx)
        s = np.arange(S_max + 1)[:, None]
        keep = (np.abs(s - center) <= cfg.W) & np.isfinite(grid)
        if math.isfinite(cfg.gamma):
            mu = grid.max(axis=1, keepdims=True)
            with np.errstate(invalid="ignore"):
                keep &= ~(grid < cfg.gamma * mu)
        return keep.reshape(-1)

    return prune


def mbr_loss(
    table: PosteriorTable,
    target: Sequence[int],
    viterbi_positions: SegmentInfo,
    lm: NGramPhonemeLM | None,
    scales: ScoreScales = ScoreScales(),
    cfg: MbrConfig = MbrConfig(),
) -> LossResult:
    """Expected smoothed Hamming risk over the surviving label sequences."""
    target = check_labels(target, table.V)
    if len(target) > table.T:
        raise InfeasibleTargetError(f"target of length {len(target)} cannot align to {table.T} frames")
    positions = viterbi_positions.positions
    if len(positions) != table.T:
        raise ValueError("reference positions must cover every frame")
    layers = mbr_layers(table, target, positions, lm, scales, cfg)
    sol = lattice.solve(layers)
    if sol.bwd is None:
        raise FloatingPointError("every hypothesis was pruned")
    edge = [sol.risk_edge_grad(j) for j in range(len(layers))]
    grad = lattice.table_grad(layers, edge, table.values.size, scales.alpha)
    masks = [m for m in sol.masks if m is not None]
    return LossResult(sol.risk, grad.reshape(table.values.shape), {"log_mass": sol.log_mass, "masks": masks})
