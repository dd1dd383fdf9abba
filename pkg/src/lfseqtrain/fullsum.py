"""Full-sum cross-entropy over the alignments of one label sequence, and Viterbi."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from lfseqtrain import lattice
from lfseqtrain.core import (
    InfeasibleTargetError,
    PosteriorTable,
    SegmentInfo,
    check_labels,
    segment_info,
    target_contexts,
)
from lfseqtrain.diff import LossResult
from lfseqtrain.lm import NGramPhonemeLM, ScoreScales, score_arrays

__all__ = ["ce_fs_loss", "target_log_mass", "viterbi_align", "segment_info", "PURE_MODEL"]

PURE_MODEL = ScoreScales(alpha=1.0, beta=0.0)


def _check_feasible(table: PosteriorTable, target: Sequence[int]) -> tuple[int, ...]:
    target = check_labels(target, table.V)
    if len(target) > table.T:
        raise InfeasibleTargetError(f"target of length {len(target)} cannot align to {table.T} frames")
    return target


def target_layers(
    table: PosteriorTable, target: Sequence[int], lm: NGramPhonemeLM | None, scales: ScoreScales
) -> list[lattice.Layer]:
    """Trellis over (frame, labels emitted so far) constrained to ``target``."""
    S = len(target)
    label_q, blank_q = score_arrays(table, lm, scales)
    ctx = target_contexts(target, table.space)
    n_ctx, n_sym = table.space.size, table.vocab.n_symbols
    tgt = np.asarray(target, dtype=np.int64)
    stay = np.arange(S + 1)
    move = np.arange(S)
    layers = []
    for t in range(table.T):
        row = t * n_ctx
        src = np.concatenate([stay, move])
        dst = np.concatenate([stay, move + 1])
        weight = np.concatenate([blank_q[t, ctx], label_q[t, ctx[:-1], tgt]])
        entry = np.concatenate([(row + ctx) * n_sym + table.blank, (row + ctx[:-1]) * n_sym + tgt])
        layers.append(lattice.Layer(src, dst, S + 1, weight, entry=entry))
    layers.append(lattice.Layer(np.array([S]), np.array([0]), 1, np.zeros(1)))
    return layers


def target_log_mass(
    table: PosteriorTable,
    target: Sequence[int],
    lm: NGramPhonemeLM | None = None,
    scales: ScoreScales = PURE_MODEL,
) -> LossResult:
    """log of the q-weighted full-sum for ``target``, with its gradient."""
    target = _check_feasible(table, target)
    layers = target_layers(table, target, lm, scales)
    sol = lattice.solve(layers, expectation=False)
    if sol.bwd is None:
        return LossResult(sol.log_mass, np.zeros(table.values.shape))
    edge = [sol.edge_posteriors(j) for j in range(len(layers))]
    grad = lattice.table_grad(layers, edge, table.values.size, scales.alpha)
    return LossResult(sol.log_mass, grad.reshape(table.values.shape))


def ce_fs_loss(
    table: PosteriorTable,
    target: Sequence[int],
    scales: ScoreScales = PURE_MODEL,
    lm: NGramPhonemeLM | None = None,
) -> LossResult:
    """-log of the summed alignment score of ``target``.

    With the default pure-model scales this is -log P(target | X).
    """
    return target_log_mass(table, target, lm, scales).scaled(-1.0)


def viterbi_align(table: PosteriorTable, target: Sequence[int]) -> tuple[tuple[int, ...], SegmentInfo]:
    """Best single alignment of ``target`` under the unscaled model.

    Ties go to the path that emits a label at the earliest differing frame.
    The DP runs over suffixes so the tie rule can be applied while tracing
    forward in time.
    """
    target = _check_feasible(table, target)
    S, T = len(target), table.T
    ctx = target_contexts(target, table.space)
    lp = table.values
    best = np.full((T + 1, S + 1), -np.inf)
    best[T, S] = 0.0
    for t in range(T - 1, -1, -1):
        for s in range(S + 1):
            score = lp[t, ctx[s], table.blank] + best[t + 1, s]
            if s < S:
                score = max(score, lp[t, ctx[s], target[s]] + best[t + 1, s + 1])
            best[t, s] = score
    if best[0, 0] == -np.inf:
        raise InfeasibleTargetError("target has no alignment with non-zero probability")
    path = []
    s = 0
    for t in range(T):
        blank_score = lp[t, ctx[s], table.blank] + best[t + 1, s]
        if s < S and lp[t, ctx[s], target[s]] + best[t + 1, s + 1] >= blank_score:
            path.append(target[s])
            s += 1
        else:
            path.append(table.blank)
    path = tuple(path)
    return path, segment_info(path, table.blank)
