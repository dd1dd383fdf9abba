"""Lattice-free MMI.

The denominator sums the q-score of every label sequence of length 0..T by
recombining partial hypotheses that share the same k-label history.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from lfseqtrain import lattice
from lfseqtrain.core import PosteriorTable
from lfseqtrain.diff import LossResult
from lfseqtrain.fullsum import target_log_mass
from lfseqtrain.lm import NGramPhonemeLM, ScoreScales, check_compatible, score_arrays


def denominator_layers(
    table: PosteriorTable, lm: NGramPhonemeLM | None, scales: ScoreScales
) -> list[lattice.Layer]:
    space = table.space
    n_ctx, V, n_sym = space.size, table.V, table.vocab.n_symbols
    label_q, blank_q = score_arrays(table, lm, scales)
    ctx = np.arange(n_ctx)
    src = np.concatenate([ctx, np.repeat(ctx, V)])
    dst = np.concatenate([ctx, space.advance.reshape(-1)])
    sym = np.concatenate([np.full(n_ctx, table.blank), np.tile(np.arange(V), n_ctx)])
    layers = []
    for t in range(table.T):
        weight = np.concatenate([blank_q[t], label_q[t].reshape(-1)])
        entry = (t * n_ctx + src) * n_sym + sym
        layers.append(lattice.Layer(src, dst, n_ctx, weight, entry=entry))
    layers.append(lattice.Layer(ctx, np.zeros(n_ctx, dtype=np.int64), 1, np.zeros(n_ctx)))
    return layers


def denominator_logsum(
    table: PosteriorTable, lm: NGramPhonemeLM | None, scales: ScoreScales = ScoreScales()
) -> LossResult:
    """log of the summed q-score over all label sequences, with its gradient."""
    if lm is not None:
        check_compatible(table, lm)
    layers = denominator_layers(table, lm, scales)
    sol = lattice.solve(layers, expectation=False)
    edge = [sol.edge_posteriors(j) for j in range(len(layers))]
    grad = lattice.table_grad(layers, edge, table.values.size, scales.alpha)
    return LossResult(sol.log_mass, grad.reshape(table.values.shape))


def mmi_loss(
    table: PosteriorTable,
    target: Sequence[int],
    lm: NGramPhonemeLM | None,
    scales: ScoreScales = ScoreScales(),
) -> LossResult:
    """-(log q(target) - log sum_a q(a)); the numerator uses the same scales."""
    num = target_log_mass(table, target, lm, scales)
    den = denominator_logsum(table, lm, scales)
    return LossResult(den.value - num.value, den.grad - num.grad, {"numerator": num.value, "denominator": den.value})
