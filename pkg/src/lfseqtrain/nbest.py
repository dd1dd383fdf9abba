"""N-best beam search and N-best-list MBR (the decode-then-rescore baseline)."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from lfseqtrain.core import PosteriorTable
from lfseqtrain.diff import LossResult
from lfseqtrain.fullsum import target_log_mass
from lfseqtrain.lm import NGramPhonemeLM, ScoreScales, score_arrays
from lfseqtrain.semiring import log_plus

Hypothesis = tuple[tuple[int, ...], float]


def beam_nbest(
    table: PosteriorTable,
    lm: NGramPhonemeLM | None,
    scales: ScoreScales = ScoreScales(),
    beam: int = 16,
    N: int = 4,
) -> list[Hypothesis]:
    """Frame-synchronous beam search over label prefixes.

    Alignments reaching the same prefix are merged, so each hypothesis carries
    the summed q-score of its surviving alignments.  Per frame only the
    ``beam`` best label expansions are considered before merging.
    """
    if not beam >= N >= 1:
        raise ValueError("need beam >= N >= 1")
    label_q, blank_q = score_arrays(table, lm, scales)
    advance = table.space.advance
    V = table.V
    prefixes: list[tuple[int, ...]] = [()]
    ctx = np.zeros(1, dtype=np.int64)
    mass = np.zeros(1)
    for t in range(table.T):
        stay = mass + blank_q[t, ctx]
        grow = (mass[:, None] + label_q[t, ctx]).reshape(-1)
        n_keep = min(beam, grow.size)
        picked = np.argpartition(-grow, n_keep - 1)[:n_keep] if n_keep < grow.size else np.arange(grow.size)
        merged: dict[tuple[int, ...], list] = {}
        for i, p in enumerate(prefixes):
            merged[p] = [float(stay[i]), int(ctx[i])]
        for flat in picked:
            i, a = divmod(int(flat), V)
            p = prefixes[i] + (a,)
            score = float(grow[flat])
            if p in merged:
                merged[p][0] = log_plus(merged[p][0], score)
            else:
                merged[p] = [score, int(advance[ctx[i], a])]
        ranked = sorted(merged.items(), key=lambda kv: (-kv[1][0], len(kv[0]), kv[0]))[:beam]
        prefixes = [p for p, _ in ranked]
        mass = np.array([v[0] for _, v in ranked])
        ctx = np.array([v[1] for _, v in ranked], dtype=np.int64)
    return [(p, float(m)) for p, m in zip(prefixes[:N], mass[:N])]


def levenshtein(a: Sequence[int], b: Sequence[int]) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]


def nbest_mbr_loss(nbest: Sequence[Hypothesis], target: Sequence[int]) -> LossResult:
    """Expected edit distance under list masses renormalized over the list.

    ``grad`` is taken with respect to the hypotheses' log-masses.
    """
    if not nbest:
        raise ValueError("empty N-best list")
    target = tuple(target)
    masses = np.array([m for _, m in nbest], dtype=np.float64)
    post = np.exp(masses - masses.max())
    post /= post.sum()
    dist = np.array([levenshtein(h, target) for h, _ in nbest], dtype=np.float64)
    value = float(post @ dist)
    return LossResult(value, post * (dist - value))


def nbest_mbr_table_loss(
    table: PosteriorTable,
    target: Sequence[int],
    lm: NGramPhonemeLM | None,
    scales: ScoreScales = ScoreScales(),
    beam: int = 16,
    N: int = 4,
) -> LossResult:
    """Decode an N-best list, rescore each entry by full-sum, return the MBR loss.

    The gradient flows through the full-sum masses of the listed hypotheses;
    which hypotheses were selected is treated as fixed.
    """
    hyps = beam_nbest(table, lm, scales, beam, N)
    sums = [target_log_mass(table, h, lm, scales) for h, _ in hyps]
    res = nbest_mbr_loss([(h, s.value) for (h, _), s in zip(hyps, sums)], target)
    grad = np.zeros(table.values.shape)
    for g, s in zip(res.grad, sums):
        grad += g * s.grad
    return LossResult(res.value, grad, {"nbest": [h for h, _ in hyps]})
