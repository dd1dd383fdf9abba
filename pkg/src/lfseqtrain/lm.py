"""Context-limited phoneme LM and the combined sequence score."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from lfseqtrain.core import ContextSpace, PosteriorTable, check_labels, context_space
from lfseqtrain.semiring import logsumexp


class DegenerateLMError(ValueError):
    pass


class ContextMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreScales:
    alpha: float = 1.2
    beta: float = 0.3

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.beta >= 0:
            raise ValueError("beta must be non-negative")


@dataclass(frozen=True, eq=False)
class NGramPhonemeLM:
    """log P(a | u) for every context code ``u`` and label ``a``."""

    k: int
    vocab_size: int
    log_probs: np.ndarray
    kappa: float = 1.0
    space: ContextSpace = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "log_probs", np.asarray(self.log_probs, dtype=np.float64))
        object.__setattr__(self, "space", context_space(self.vocab_size, self.k))
        if self.log_probs.shape != (self.space.size, self.vocab_size):
            raise ValueError(f"LM table shape {self.log_probs.shape} does not match contexts")
        if np.max(np.abs(logsumexp(self.log_probs, axis=1))) > 1e-9:
            raise ValueError("LM rows are not normalized")

    def __eq__(self, other):
        if not isinstance(other, NGramPhonemeLM):
            return NotImplemented
        return (
            self.k == other.k
            and self.vocab_size == other.vocab_size
            and self.kappa == other.kappa
            and self.log_probs.tobytes() == other.log_probs.tobytes()
        )

    @classmethod
    def uniform(cls, vocab_size: int, k: int) -> "NGramPhonemeLM":
        n = context_space(vocab_size, k).size
        return cls(k, vocab_size, np.full((n, vocab_size), -np.log(vocab_size)))

    def log_prob(self, u, a: int) -> float:
        code = u if isinstance(u, (int, np.integer)) else self.space.index(u)
        return float(self.log_probs[code, a])

    def sequence_log_prob(self, labels: Sequence[int]) -> float:
        """Sum of per-label log-probabilities; there is no end-of-sequence factor."""
        u = 0
        total = 0.0
        for a in labels:
            total += self.log_probs[u, a]
            u = self.space.advance[u, a]
        return float(total)


def train_lm(corpus: Iterable[Sequence[int]], vocab_size: int, k: int, kappa: float = 1.0) -> NGramPhonemeLM:
    """Add-kappa maximum-likelihood estimate over BOS-padded histories.

    With ``kappa == 0`` a history never seen in the corpus gets a uniform row.
    """
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    space = context_space(vocab_size, k)
    counts = np.zeros((space.size, vocab_size))
    for labels in corpus:
        u = 0
        for a in check_labels(labels, vocab_size):
            counts[u, a] += 1
            u = space.advance[u, a]
    if kappa == 0 and counts.sum() == 0:
        raise DegenerateLMError("empty corpus cannot be estimated without smoothing")
    smoothed = counts + kappa
    totals = smoothed.sum(axis=1, keepdims=True)
    unseen = totals[:, 0] == 0
    smoothed[unseen] = 1.0
    totals[unseen] = vocab_size
    with np.errstate(divide="ignore"):
        log_probs = np.log(smoothed) - np.log(totals)
    return NGramPhonemeLM(k, vocab_size, log_probs, kappa)


def check_compatible(table: PosteriorTable, lm: NGramPhonemeLM) -> None:
    if lm.k != table.k or lm.vocab_size != table.V:
        raise ContextMismatchError(
            f"LM (k={lm.k}, V={lm.vocab_size}) does not match table (k={table.k}, V={table.V})"
        )


def q_label(table: PosteriorTable, lm: NGramPhonemeLM, scales: ScoreScales, t: int, u, a: int) -> float:
    """alpha * log P_model(a | u, frame t) + beta * log P_lm(a | u)."""
    score = scales.alpha * table.log_prob(t, u, a)
    if scales.beta:
        score += scales.beta * lm.log_prob(u, a)
    return score


def q_blank(table: PosteriorTable, scales: ScoreScales, t: int, u) -> float:
    return scales.alpha * table.log_prob(t, u, table.blank)


def score_arrays(
    table: PosteriorTable, lm: NGramPhonemeLM | None, scales: ScoreScales
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized q-scores: labels ``(T, n_ctx, V)`` and blank ``(T, n_ctx)``."""
    label = scales.alpha * table.values[:, :, : table.V]
    if lm is not None:
        check_compatible(table, lm)
    if scales.beta:
        if lm is None:
            raise ValueError("beta > 0 requires a language model")
        label = label + scales.beta * lm.log_probs[None, :, :]
    blank = scales.alpha * table.values[:, :, table.V]
    return label, blank
