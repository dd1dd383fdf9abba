"""Brute-force ground truth by enumerating every alignment.

Nothing here reuses the trellis code or the vectorized cost tables of the
loss modules: scores are accumulated frame by frame along each explicit
alignment and the risks are recomputed from their definitions.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterable, Sequence

from lfseqtrain.core import BOS, PosteriorTable
from lfseqtrain.lfmbr import MbrConfig
from lfseqtrain.lfsegmbr import SegMbrConfig
from lfseqtrain.lm import NGramPhonemeLM, ScoreScales

DEFAULT_CAP = 10**7
KINDS = ("cefs", "lfmmi", "lfsegmbr", "lfmbr")


class EnumerationCapError(ValueError):
    pass


def enumeration_size(T: int, vocab_size: int) -> int:
    return (vocab_size + 1) ** T


def enumerate_alignments(T: int, vocab_size: int, cap: int = DEFAULT_CAP) -> list[tuple[int, ...]]:
    if enumeration_size(T, vocab_size) > cap:
        raise EnumerationCapError(f"{vocab_size + 1}^{T} alignments exceed the cap of {cap}")
    return list(itertools.product(range(vocab_size + 1), repeat=T))


def _lse(values: Iterable[float]) -> float:
    values = [v for v in values if v != -math.inf]
    if not values:
        return -math.inf
    m = max(values)
    return m + math.log(sum(math.exp(v - m) for v in values))


class _Scorer:
    """Per-frame q-scores read straight from the tables by explicit history."""

    def __init__(self, table: PosteriorTable, lm: NGramPhonemeLM | None, scales: ScoreScales):
        self.table, self.lm, self.scales = table, lm, scales
        self.blank = table.blank

    def step(self, t: int, history: tuple, y: int) -> float:
        code = self.table.space.index(history)
        score = self.scales.alpha * float(self.table.values[t, code, y])
        if y != self.blank and self.scales.beta:
            score += self.scales.beta * float(self.lm.log_probs[code, y])
        return score

    def advance(self, history: tuple, y: int) -> tuple:
        if y == self.blank:
            return history
        return history[1:] + (y,)

    def path(self, y: Sequence[int]) -> float:
        history = (BOS,) * self.table.k
        total = 0.0
        for t, sym in enumerate(y):
            total += self.step(t, history, sym)
            history = self.advance(history, sym)
        return total


def _labels(y: Sequence[int], blank: int) -> tuple[int, ...]:
    return tuple(s for s in y if s != blank)


def smoothed_cost(label, reference: Sequence[int], center: int, L: int) -> float:
    """min |l|/L over offsets l in [-L, L] whose (1-based) reference position holds ``label``."""
    costs = [1.0]
    for l in range(-L, L + 1):
        q = center + l
        if 1 <= q <= len(reference) and label is not None and reference[q - 1] == label:
            costs.append(abs(l) / L if L > 0 else 0.0)
    return min(costs)


def hamming(hyp: Sequence[int], ref: Sequence[int], L: int) -> float:
    n = max(len(hyp), len(ref))
    return sum(smoothed_cost(hyp[s - 1] if s <= len(hyp) else None, ref, s, L) for s in range(1, n + 1))


def segment_risk(y: Sequence[int], reference_alignment: Sequence[int], blank: int, cfg: SegMbrConfig):
    """Segment risk of ``y`` against the reference, or None if some segment exceeds ``I`` emissions."""
    ref_labels = _labels(reference_alignment, blank)
    T = len(y)
    ref_pos, s = [], 0
    bounds = []
    for t, sym in enumerate(reference_alignment, start=1):
        if sym != blank:
            s += 1
            bounds.append(t)
        ref_pos.append(s)
    # segment id of each frame: frames after the last emission form one more segment
    seg_of = []
    for t in range(1, T + 1):
        seg_of.append(next((i for i, b in enumerate(bounds) if t <= b), len(bounds)))
    counts = [0] * (len(bounds) + 1)
    frame_risk = 0.0
    last = None
    for t, sym in enumerate(y):
        if sym != blank:
            last = sym
            counts[seg_of[t]] += 1
        if last is None:
            frame_risk += 0.0 if ref_pos[t] == 0 else 1.0
        else:
            frame_risk += smoothed_cost(last, ref_labels, ref_pos[t], cfg.L)
    if max(counts) > cfg.I:
        return None
    return frame_risk + sum(cfg.c * max(i - 1, 0) for i in counts)


def _expected(pairs: Iterable[tuple[float, float]]) -> float:
    pairs = list(pairs)
    z = _lse(m for m, _ in pairs)
    if z == -math.inf:
        raise ValueError("no surviving hypothesis")
    return sum(math.exp(m - z) * r for m, r in pairs if m != -math.inf)


def mbr_survivors(
    table: PosteriorTable,
    positions: Sequence[int],
    lm: NGramPhonemeLM | None,
    scales: ScoreScales,
    cfg: MbrConfig,
    cap: int = DEFAULT_CAP,
) -> dict[tuple[int, ...], float]:
    """Complete alignments that survive both prunes, with their log q-scores.

    Prefixes are grown one frame at a time; after each frame they are grouped
    by (label count, history), and whole groups are dropped by the length
    window and by comparing group mass with the best group of equal length.
    """
    if enumeration_size(table.T, table.V) > cap:
        raise EnumerationCapError("instance too large to enumerate")
    scorer = _Scorer(table, lm, scales)
    blank = table.blank
    alive = {(): (0.0, (BOS,) * table.k)}
    for t in range(table.T):
        grown = {}
        for prefix, (score, hist) in alive.items():
            for y in range(table.V + 1):
                grown[prefix + (y,)] = (score + scorer.step(t, hist, y), scorer.advance(hist, y))
        groups: dict[tuple, list] = {}
        for prefix, (score, hist) in grown.items():
            n_labels = sum(1 for sym in prefix if sym != blank)
            groups.setdefault((n_labels, hist), []).append(prefix)
        group_mass = {key: _lse(grown[p][0] for p in members) for key, members in groups.items()}
        best = {}
        for (n_labels, _), m in group_mass.items():
            best[n_labels] = max(best.get(n_labels, -math.inf), m)
        alive = {}
        for key, members in groups.items():
            n_labels = key[0]
            if abs(n_labels - positions[t]) > cfg.W:
                continue
            m = group_mass[key]
            if m == -math.inf:
                continue
            if math.isfinite(cfg.gamma) and m < cfg.gamma * best[n_labels]:
                continue
            for p in members:
                alive[p] = grown[p]
    return {p: score for p, (score, _) in alive.items()}


def segmbr_survivors(
    table: PosteriorTable, reference_alignment: Sequence[int], cfg: SegMbrConfig, cap: int = DEFAULT_CAP
) -> set[tuple[int, ...]]:
    return {
        y
        for y in enumerate_alignments(table.T, table.V, cap)
        if segment_risk(y, reference_alignment, table.blank, cfg) is not None
    }


def brute_loss(
    kind: str,
    table: PosteriorTable,
    target: Sequence[int],
    lm: NGramPhonemeLM | None = None,
    scales: ScoreScales = ScoreScales(1.0, 0.0),
    reference_alignment: Sequence[int] | None = None,
    seg_cfg: SegMbrConfig = SegMbrConfig(),
    mbr_cfg: MbrConfig = MbrConfig(),
    cap: int = DEFAULT_CAP,
) -> float:
    """Objective value by literal summation over every alignment.

    ``reference_alignment`` is the Viterbi alignment used by the two MBR
    kinds (for LF-MBR only its emission schedule matters).
    """
    target = tuple(int(a) for a in target)
    blank = table.blank
    scorer = _Scorer(table, lm, scales)
    if kind in ("cefs", "lfmmi"):
        scores = [(y, scorer.path(y)) for y in enumerate_alignments(table.T, table.V, cap)]
        num = _lse(s for y, s in scores if _labels(y, blank) == target)
        if kind == "cefs":
            return -num
        return _lse(s for _, s in scores) - num
    if reference_alignment is None:
        raise ValueError(f"{kind} needs a reference alignment")
    if kind == "lfsegmbr":
        pairs = []
        for y in enumerate_alignments(table.T, table.V, cap):
            risk = segment_risk(y, reference_alignment, blank, seg_cfg)
            if risk is not None:
                pairs.append((scorer.path(y), risk))
        return _expected(pairs)
    if kind == "lfmbr":
        positions = list(itertools.accumulate(1 if sym != blank else 0 for sym in reference_alignment))
        alive = mbr_survivors(table, positions, lm, scales, mbr_cfg, cap)
        return _expected((score, hamming(_labels(y, blank), target, mbr_cfg.L)) for y, score in alive.items())
    raise ValueError(f"unknown loss kind {kind!r}")


def label_sequence_scores(
    table: PosteriorTable, lm: NGramPhonemeLM | None, scales: ScoreScales, cap: int = DEFAULT_CAP
) -> dict[tuple[int, ...], float]:
    """log q-score of every label sequence (summed over its alignments)."""
    scorer = _Scorer(table, lm, scales)
    buckets: dict[tuple[int, ...], list[float]] = {}
    for y in enumerate_alignments(table.T, table.V, cap):
        buckets.setdefault(_labels(y, table.blank), []).append(scorer.path(y))
    return {a: _lse(v) for a, v in buckets.items()}
