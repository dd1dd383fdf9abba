"""Lattice-free segment-level MBR.

The reference is a Viterbi alignment of the target.  Its emission frames cut
time into segments; a hypothesis alignment pays, per frame, the smoothed
cost of its most recent label against a window of the reference around the
reference position at that frame, plus a penalty on the number of labels it
emits inside each segment.  Hypotheses emitting more than ``I`` labels inside
one segment are dropped from both numerator and denominator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from lfseqtrain import lattice
from lfseqtrain.core import NO_LABEL, PAD, PosteriorTable, SegmentInfo, check_labels, collapse, segment_info
from lfseqtrain.diff import LossResult
from lfseqtrain.lm import NGramPhonemeLM, ScoreScales, score_arrays


class DegenerateInputError(ValueError):
    pass


@dataclass(frozen=True)
class SegMbrConfig:
    L: int = 3
    c: float = 0.3
    I: int = 3

    def __post_init__(self):
        if self.L < 0 or self.c < 0 or self.I < 1:
            raise ValueError("need L >= 0, c >= 0 and I >= 1")


def local_cost(label: int, reference: Sequence[int], position: int, L: int) -> float:
    """Smoothed 0/1 cost of ``label`` against reference positions ``position +- L``.

    Positions are 1-based; the window is clipped to ``[1, len(reference)]``.
    The cost is ``min |offset| / L`` over matching positions, 1 if there is no
    match, and exact-match 0/1 when ``L == 0``.
    """
    if label in (NO_LABEL, PAD):
        return 1.0
    best = 1.0
    lo = max(1, position - L)
    hi = min(len(reference), position + L)
    for q in range(lo, hi + 1):
        if reference[q - 1] == label:
            best = min(best, abs(q - position) / L if L else 0.0)
    return best


def position_costs(reference: Sequence[int], L: int, vocab_size: int, max_position: int) -> np.ndarray:
    """``out[p, a] = local_cost(a, reference, p, L)`` for ``p`` in ``0..max_position``."""
    out = np.empty((max_position + 1, vocab_size))
    for p in range(max_position + 1):
        for a in range(vocab_size):
            out[p, a] = local_cost(a, reference, p, L)
    return out


def emission_penalty(i: int, c: float) -> float:
    return c * max(i - 1, 0)


def segmbr_layers(
    table: PosteriorTable,
    reference_alignment: Sequence[int],
    lm: NGramPhonemeLM | None,
    scales: ScoreScales,
    cfg: SegMbrConfig,
) -> list[lattice.Layer]:
    target = collapse(reference_alignment, table.blank)
    seg = segment_info(reference_alignment, table.blank)
    T, V = table.T, table.V
    space = table.space
    n_ctx, n_sym, I = space.size, table.vocab.n_symbols, cfg.I
    n = (I + 1) * n_ctx
    label_q, blank_q = score_arrays(table, lm, scales)
    costs = position_costs(target, cfg.L, V, len(target))

    # Blank edges keep (i, u); label edges go (i, u) -> (i + 1, advance(u, a)) for i < I.
    state = np.arange(n)
    b_ctx = state % n_ctx
    lab_i = np.repeat(np.arange(I), n_ctx * V)
    lab_ctx = np.tile(np.repeat(np.arange(n_ctx), V), I)
    lab_sym = np.tile(np.arange(V), I * n_ctx)
    lab_src = lab_i * n_ctx + lab_ctx
    lab_dst = (lab_i + 1) * n_ctx + space.advance[lab_ctx, lab_sym]
    src = np.concatenate([state, lab_src])
    dst = np.concatenate([state, lab_dst])
    last = space.last_label[b_ctx]

    boundaries = set(seg.boundaries) | {T}
    penalty = np.array([emission_penalty(i, cfg.c) for i in range(I + 1)])
    collapse_src = state
    collapse_dst = b_ctx
    collapse_risk = penalty[state // n_ctx]

    layers = []
    for t in range(T):
        pos = seg.positions[t]
        if pos == 0:
            blank_cost = np.where(last == NO_LABEL, 0.0, costs[0, np.maximum(last, 0)])
        else:
            blank_cost = np.where(last == NO_LABEL, 1.0, costs[pos, np.maximum(last, 0)])
        risk = np.concatenate([blank_cost, costs[pos, lab_sym]])
        weight = np.concatenate([blank_q[t, b_ctx], label_q[t, lab_ctx, lab_sym]])
        entry = np.concatenate([(t * n_ctx + b_ctx) * n_sym + table.blank, (t * n_ctx + lab_ctx) * n_sym + lab_sym])
        layers.append(lattice.Layer(src, dst, n, weight, risk=risk, entry=entry))
        if t + 1 in boundaries:
            layers.append(lattice.Layer(collapse_src, collapse_dst, n, np.zeros(n), risk=collapse_risk))
    layers.append(lattice.Layer(np.arange(n_ctx), np.zeros(n_ctx, dtype=np.int64), 1, np.zeros(n_ctx)))
    return layers


def segmbr_loss(
    table: PosteriorTable,
    target: Sequence[int],
    viterbi: tuple[Sequence[int], SegmentInfo],
    lm: NGramPhonemeLM | None,
    scales: ScoreScales = ScoreScales(),
    cfg: SegMbrConfig = SegMbrConfig(),
) -> LossResult:
    """Expected segment risk over all alignments surviving the emission prune."""
    target = check_labels(target, table.V)
    alignment, _ = viterbi
    alignment = tuple(int(y) for y in alignment)
    if not target:
        raise DegenerateInputError("segment MBR needs a non-empty target")
    if len(alignment) != table.T or collapse(alignment, table.blank) != target:
        raise ValueError("reference alignment must have T frames and collapse to the target")
    layers = segmbr_layers(table, alignment, lm, scales, cfg)
    sol = lattice.solve(layers)
    if sol.bwd is None:
        raise FloatingPointError("no alignment survives the emission prune")
    edge = [sol.risk_edge_grad(j) for j in range(len(layers))]
    grad = lattice.table_grad(layers, edge, table.values.size, scales.alpha)
    return LossResult(sol.risk, grad.reshape(table.values.shape), {"log_mass": sol.log_mass})

