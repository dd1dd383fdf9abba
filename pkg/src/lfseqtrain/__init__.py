"""Lattice-free sequence training criteria for limited-context monotonic transducers."""

from lfseqtrain.core import (
    BOS,
    NO_LABEL,
    PAD,
    ContextSpace,
    InfeasibleTargetError,
    InvalidSymbolError,
    PosteriorTable,
    SegmentInfo,
    Vocabulary,
    collapse,
    context_advance,
    initial_context,
    map_blanks,
    segment_info,
)
from lfseqtrain.criteria import CRITERIA, Settings, evaluate
from lfseqtrain.diff import LossResult, finite_diff_check
from lfseqtrain.fullsum import ce_fs_loss, viterbi_align
from lfseqtrain.lfmbr import MbrConfig, hamming_cost, mbr_loss
from lfseqtrain.lfmmi import denominator_logsum, mmi_loss
from lfseqtrain.lfsegmbr import SegMbrConfig, local_cost, segmbr_loss
from lfseqtrain.lm import NGramPhonemeLM, ScoreScales, train_lm
from lfseqtrain.nbest import beam_nbest, levenshtein, nbest_mbr_loss

__version__ = "0.1.0"

__all__ = [
    "BOS",
    "NO_LABEL",
    "PAD",
    "CRITERIA",
    "ContextSpace",
    "InfeasibleTargetError",
    "InvalidSymbolError",
    "LossResult",
    "MbrConfig",
    "NGramPhonemeLM",
    "PosteriorTable",
    "ScoreScales",
    "SegMbrConfig",
    "SegmentInfo",
    "Settings",
    "Vocabulary",
    "beam_nbest",
    "ce_fs_loss",
    "collapse",
    "context_advance",
    "denominator_logsum",
    "evaluate",
    "finite_diff_check",
    "hamming_cost",
    "initial_context",
    "levenshtein",
    "local_cost",
    "map_blanks",
    "mbr_loss",
    "mmi_loss",
    "nbest_mbr_loss",
    "segment_info",
    "segmbr_loss",
    "train_lm",
    "viterbi_align",
]
