"""Tabular toy transducer and a plain gradient-descent loop.

The model has one row of logits per (feature id, context, symbol).  An
utterance is a sequence of feature ids; its posterior table is the row-wise
log-softmax of the looked-up logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from lfseqtrain.core import PosteriorTable, Vocabulary, context_space
from lfseqtrain.criteria import Settings, evaluate, needs_alignment
from lfseqtrain.diff import NonFiniteLossError
from lfseqtrain.fullsum import viterbi_align
from lfseqtrain.lfmmi import denominator_logsum
from lfseqtrain.lm import NGramPhonemeLM, ScoreScales, train_lm

Utterance = tuple[tuple[int, ...], tuple[int, ...]]
TRAIN_CRITERIA = ("cefs", "lfmmi", "lfsegmbr+mmi", "lfmbr+mmi")


@dataclass(eq=False)
class ToyModel:
    n_features: int
    vocab_size: int
    k: int
    logits: np.ndarray

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        n_ctx = context_space(self.vocab_size, self.k).size
        if self.logits.shape != (self.n_features, n_ctx, self.vocab_size + 1):
            raise ValueError(f"logits shape {self.logits.shape} does not match the model sizes")

    @classmethod
    def init(cls, n_features: int, vocab_size: int, k: int, seed: int = 0, scale: float = 0.1) -> "ToyModel":
        n_ctx = context_space(vocab_size, k).size
        rng = np.random.default_rng(seed)
        return cls(n_features, vocab_size, k, scale * rng.standard_normal((n_features, n_ctx, vocab_size + 1)))

    def copy(self) -> "ToyModel":
        return ToyModel(self.n_features, self.vocab_size, self.k, self.logits.copy())

    def table(self, features: Sequence[int]) -> PosteriorTable:
        return PosteriorTable.from_logits(self.logits[list(features)], self.k, Vocabulary(self.vocab_size))

    def __eq__(self, other):
        if not isinstance(other, ToyModel):
            return NotImplemented
        return (self.n_features, self.vocab_size, self.k) == (other.n_features, other.vocab_size, other.k) and (
            self.logits.tobytes() == other.logits.tobytes()
        )


@dataclass
class ToyDataset:
    vocab_size: int
    n_features: int
    utterances: list[Utterance] = field(default_factory=list)

    def __post_init__(self):
        for feats, target in self.utterances:
            if len(target) > len(feats):
                raise ValueError("target longer than its feature sequence")

    def targets(self) -> list[tuple[int, ...]]:
        return [tgt for _, tgt in self.utterances]


def make_dataset(
    n_utterances: int = 5,
    vocab_size: int = 3,
    seed: int = 0,
    max_labels: int = 3,
    frames_per_label: int = 3,
    noise: float = 0.1,
) -> ToyDataset:
    """Random targets aligned with blank-heavy schedules.

    The feature at each frame is the aligned symbol id (labels, blank = V),
    replaced by a random id with probability ``noise``.
    """
    rng = np.random.default_rng(seed)
    n_features = vocab_size + 1
    utts = []
    for _ in range(n_utterances):
        S = int(rng.integers(1, max_labels + 1))
        T = S * frames_per_label
        target = tuple(int(a) for a in rng.integers(0, vocab_size, S))
        frames = np.sort(rng.choice(T, size=S, replace=False))
        align = np.full(T, vocab_size)
        align[frames] = target
        flip = rng.random(T) < noise
        feats = np.where(flip, rng.integers(0, n_features, T), align)
        utts.append((tuple(int(f) for f in feats), target))
    return ToyDataset(vocab_size, n_features, utts)


def chain_softmax(table: PosteriorTable, grad: np.ndarray) -> np.ndarray:
    """Map d/d(log-softmax output) to d/d(logits) row by row."""
    probs = np.exp(table.values)
    return grad - probs * grad.sum(axis=2, keepdims=True)


def logit_grad(model: ToyModel, features: Sequence[int], table: PosteriorTable, grad: np.ndarray) -> np.ndarray:
    out = np.zeros_like(model.logits)
    np.add.at(out, list(features), chain_softmax(table, grad))
    return out


def expected_blank_fraction(table: PosteriorTable) -> float:
    """Expected share of frames emitting blank under the unscaled model."""
    occ = denominator_logsum(table, None, ScoreScales(1.0, 0.0)).grad
    return float(occ[:, :, table.blank].sum() / table.T)


@dataclass
class TrainResult:
    model: ToyModel
    losses: list[float]
    blank: list[float]


def _evaluate_all(model, data, criterion, lm, settings, alignments):
    losses, blanks, grads = [], [], []
    for j, (feats, target) in enumerate(data.utterances):
        table = model.table(feats)
        res = evaluate(criterion, table, target, lm, settings, alignments[j] if alignments else None)
        if not math.isfinite(res.value):
            raise NonFiniteLossError(f"{criterion} loss is {res.value} on utterance {j}")
        losses.append(res.value)
        blanks.append(expected_blank_fraction(table))
        grads.append((feats, table, res.grad))
    return float(np.mean(losses)), float(np.mean(blanks)), grads


def train(
    model: ToyModel,
    data: ToyDataset,
    criterion: str = "cefs",
    lr: float = 0.5,
    epochs: int = 50,
    seed: int = 0,
    lm: NGramPhonemeLM | None = None,
    settings: Settings = Settings(),
) -> TrainResult:
    """Per-utterance gradient descent in a seeded random order.

    ``losses`` and ``blank`` have ``epochs + 1`` entries: the dataset mean
    before training and after every epoch.  MBR criteria use Viterbi
    alignments of the initial model throughout.
    """
    if criterion not in TRAIN_CRITERIA:
        raise ValueError(f"criterion must be one of {TRAIN_CRITERIA}")
    if not lr > 0:
        raise ValueError("lr must be positive")
    if lm is None:
        lm = train_lm(data.targets(), model.vocab_size, model.k, kappa=1.0)
    model = model.copy()
    rng = np.random.default_rng(seed)
    alignments = None
    if needs_alignment(criterion):
        alignments = [viterbi_align(model.table(f), tgt) for f, tgt in data.utterances]
    loss, blank, _ = _evaluate_all(model, data, criterion, lm, settings, alignments)
    losses, blanks = [loss], [blank]
    for _ in range(epochs):
        for j in rng.permutation(len(data.utterances)):
            feats, target = data.utterances[j]
            table = model.table(feats)
            res = evaluate(criterion, table, target, lm, settings, alignments[j] if alignments else None)
            if not math.isfinite(res.value):
                raise NonFiniteLossError(f"{criterion} loss is {res.value} on utterance {j}")
            model.logits -= lr * logit_grad(model, feats, table, res.grad)
        loss, blank, _ = _evaluate_all(model, data, criterion, lm, settings, alignments)
        losses.append(loss)
        blanks.append(blank)
    return TrainResult(model, losses, blanks)


def blank_dominance_scenario(seed: int = 0, ce_epochs: int = 30, mmi_epochs: int = 20, lr: float = 0.5):
    """CE-FS training followed by LF-MMI fine-tuning on the fixed toy set.

    Returns ``(ce_result, mmi_result)``; the blank trace of the second run
    starts at the CE-FS model.
    """
    data = make_dataset(seed=seed)
    model = ToyModel.init(data.n_features, data.vocab_size, 1, seed=seed)
    ce = train(model, data, "cefs", lr=lr, epochs=ce_epochs, seed=seed)
    mmi = train(ce.model, data, "lfmmi", lr=lr, epochs=mmi_epochs, seed=seed, settings=Settings(ScoreScales(1.2, 0.3)))
    return ce, mmi
