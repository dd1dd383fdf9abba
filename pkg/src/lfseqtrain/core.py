"""Vocabulary, bounded label contexts, sequences and posterior tables.

Labels are dense integers ``0..V-1``.  The blank symbol is coded as ``V`` so
that it sits last in every posterior row.  ``BOS``, ``PAD`` and ``NO_LABEL``
are negative sentinels and never index a table.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from lfseqtrain.semiring import logsumexp

BOS = -1
PAD = -2
NO_LABEL = -3

ContextState = tuple  # k-tuple over labels and BOS, BOS entries form a prefix
Alignment = tuple  # length-T tuple over labels and the blank code
LabelSequence = tuple


class InvalidSymbolError(ValueError):
    pass


class InfeasibleTargetError(ValueError):
    """No monotonic alignment of the target exists (more labels than frames)."""


@dataclass(frozen=True)
class Vocabulary:
    size: int
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("vocabulary needs at least one phoneme")
        if self.names is not None and len(self.names) != self.size:
            raise ValueError("names must match the vocabulary size")

    @property
    def blank(self) -> int:
        return self.size

    @property
    def n_symbols(self) -> int:
        return self.size + 1

    def name(self, symbol: int) -> str:
        if symbol == self.blank:
            return "ε"
        if symbol == BOS:
            return "<s>"
        if symbol == PAD:
            return "<pad>"
        if symbol == NO_LABEL:
            return "<none>"
        if self.names is not None:
            return self.names[symbol]
        if self.size <= 26:
            return string.ascii_lowercase[symbol]
        return str(symbol)

    def format(self, symbols: Sequence[int]) -> str:
        return "(" + ",".join(self.name(int(s)) for s in symbols) + ")"


def collapse(y: Sequence[int], blank: int) -> LabelSequence:
    """Drop blanks from an alignment."""
    return tuple(int(s) for s in y if s != blank)


def map_blanks(y: Sequence[int], blank: int) -> tuple[int, ...]:
    """Replace each blank by the most recent label; leading blanks become NO_LABEL."""
    out = []
    last = NO_LABEL
    for s in y:
        if s != blank:
            last = int(s)
        out.append(last)
    return tuple(out)


def initial_context(k: int) -> ContextState:
    return (BOS,) * k


def context_advance(u: ContextState, y: int, blank: int) -> ContextState:
    if y == blank:
        return u
    if y < 0:
        raise InvalidSymbolError(f"cannot advance a context with reserved symbol {y}")
    return u[1:] + (int(y),)


class ContextSpace:
    """Dense integer coding of all valid k-label histories over ``V`` labels.

    A history holding ``j`` real labels ``b_1..b_j`` (after ``k - j`` BOS
    entries) gets code ``sum(V**i for i < j) + mixed_radix(b)``, so ``BOS^k``
    is code 0 and the total count is ``sum(V**j for j in 0..k)``.
    """

    def __init__(self, vocab_size: int, k: int):
        if k < 1:
            raise ValueError("context size must be >= 1")
        if vocab_size < 1:
            raise ValueError("vocabulary needs at least one phoneme")
        self.V = vocab_size
        self.k = k
        self._offsets = [sum(vocab_size**i for i in range(j)) for j in range(k + 2)]
        self.size = self._offsets[k + 1]
        self.histories: list[ContextState] = []
        for j in range(k + 1):
            for labels in itertools.product(range(vocab_size), repeat=j):
                self.histories.append((BOS,) * (k - j) + labels)
        self.advance = np.empty((self.size, vocab_size), dtype=np.int64)
        self.last_label = np.empty(self.size, dtype=np.int64)
        for code, hist in enumerate(self.histories):
            self.last_label[code] = hist[-1] if hist[-1] != BOS else NO_LABEL
            for a in range(vocab_size):
                self.advance[code, a] = self.index(hist[1:] + (a,))

    def index(self, history: Sequence[int]) -> int:
        history = tuple(history)
        if len(history) != self.k:
            raise ValueError(f"history {history} does not have length {self.k}")
        n_bos = 0
        while n_bos < self.k and history[n_bos] == BOS:
            n_bos += 1
        labels = history[n_bos:]
        code = 0
        for b in labels:
            if not 0 <= b < self.V:
                raise InvalidSymbolError(f"invalid history {history}")
            code = code * self.V + b
        return self._offsets[len(labels)] + code

    def history(self, code: int) -> ContextState:
        return self.histories[code]

    def __len__(self):
        return self.size


@dataclass(frozen=True)
class SegmentInfo:
    """Emission frames (1-based) of each label and label count after each frame."""

    boundaries: tuple[int, ...]
    positions: tuple[int, ...]


def segment_info(y: Sequence[int], blank: int) -> SegmentInfo:
    boundaries = []
    positions = []
    s = 0
    for t, sym in enumerate(y, start=1):
        if sym != blank:
            s += 1
            boundaries.append(t)
        positions.append(s)
    return SegmentInfo(tuple(boundaries), tuple(positions))


@dataclass(frozen=True, eq=False)
class PosteriorTable:
    """Log-posteriors ``values[t, u, y]`` of a limited-context transducer.

    ``t`` is a 0-based frame index, ``u`` a :class:`ContextSpace` code and
    ``y`` a symbol with blank last.  Rows are normalized unless built with
    ``check=False`` (used for finite-difference perturbations).
    """

    values: np.ndarray
    k: int
    vocab: Vocabulary
    check: bool = True
    space: ContextSpace = field(init=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "space", _space(self.vocab.size, self.k))
        expected = (self.space.size, self.vocab.n_symbols)
        if values.ndim != 3 or values.shape[1:] != expected:
            raise ValueError(f"table shape {values.shape} does not match (T, {expected[0]}, {expected[1]})")
        if np.isnan(values).any():
            raise ValueError("table contains NaN")
        if self.check:
            if (values > 0).any():
                raise ValueError("log-probabilities must be <= 0")
            norms = logsumexp(values, axis=2) if values.shape[0] else np.zeros(0)
            if values.shape[0] and np.max(np.abs(norms)) > 1e-9:
                raise ValueError("posterior rows are not normalized")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def V(self) -> int:
        return self.vocab.size

    @property
    def blank(self) -> int:
        return self.vocab.size

    def log_prob(self, t: int, u: ContextState | int, y: int) -> float:
        code = u if isinstance(u, (int, np.integer)) else self.space.index(u)
        return float(self.values[t, code, y])

    def with_values(self, values: np.ndarray, check: bool = False) -> "PosteriorTable":
        return PosteriorTable(values, self.k, self.vocab, check=check)

    def __eq__(self, other):
        if not isinstance(other, PosteriorTable):
            return NotImplemented
        return (
            self.k == other.k
            and self.vocab == other.vocab
            and self.values.shape == other.values.shape
            and self.values.tobytes() == other.values.tobytes()
        )

    @classmethod
    def from_logits(cls, logits: np.ndarray, k: int, vocab: Vocabulary) -> "PosteriorTable":
        logits = np.asarray(logits, dtype=np.float64)
        shifted = logits - np.max(logits, axis=2, keepdims=True)
        log_z = np.log(np.sum(np.exp(shifted), axis=2, keepdims=True))
        return cls(shifted - log_z, k, vocab)

    @classmethod
    def uniform(cls, T: int, vocab_size: int, k: int) -> "PosteriorTable":
        n = _space(vocab_size, k).size
        return cls(np.full((T, n, vocab_size + 1), -np.log(vocab_size + 1)), k, Vocabulary(vocab_size))

    @classmethod
    def random(
        cls, T: int, vocab_size: int, k: int, rng: np.random.Generator, scale: float = 1.0, blank_bias: float = 0.0
    ) -> "PosteriorTable":
        n = _space(vocab_size, k).size
        logits = scale * rng.standard_normal((T, n, vocab_size + 1))
        logits[:, :, vocab_size] += blank_bias
        return cls.from_logits(logits, k, Vocabulary(vocab_size))


_SPACES: dict[tuple[int, int], ContextSpace] = {}


def _space(vocab_size: int, k: int) -> ContextSpace:
    key = (vocab_size, k)
    if key not in _SPACES:
        _SPACES[key] = ContextSpace(vocab_size, k)
    return _SPACES[key]


def context_space(vocab_size: int, k: int) -> ContextSpace:
    """Shared (cached) context space for ``(V, k)``."""
    return _space(vocab_size, k)


def target_contexts(target: Sequence[int], space: ContextSpace) -> np.ndarray:
    """Context code after each prefix of ``target`` (length ``S + 1``)."""
    codes = [0]
    for a in target:
        codes.append(int(space.advance[codes[-1], a]))
    return np.asarray(codes, dtype=np.int64)


def check_labels(target: Sequence[int], vocab_size: int) -> LabelSequence:
    target = tuple(int(a) for a in target)
    for a in target:
        if not 0 <= a < vocab_size:
            raise InvalidSymbolError(f"label {a} outside vocabulary of size {vocab_size}")
    return target
