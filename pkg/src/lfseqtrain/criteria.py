"""One entry point for every training criterion."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from lfseqtrain.core import PosteriorTable, SegmentInfo
from lfseqtrain.diff import LossResult
from lfseqtrain.fullsum import ce_fs_loss, viterbi_align
from lfseqtrain.lfmbr import MbrConfig, mbr_loss
from lfseqtrain.lfmmi import mmi_loss
from lfseqtrain.lfsegmbr import SegMbrConfig, segmbr_loss
from lfseqtrain.lm import NGramPhonemeLM, ScoreScales
from lfseqtrain.nbest import nbest_mbr_table_loss

CRITERIA = ("cefs", "lfmmi", "lfsegmbr", "lfmbr", "nbest-mbr", "lfsegmbr+mmi", "lfmbr+mmi")


@dataclass(frozen=True)
class Settings:
    scales: ScoreScales = field(default_factory=ScoreScales)
    seg: SegMbrConfig = field(default_factory=SegMbrConfig)
    mbr: MbrConfig = field(default_factory=MbrConfig)
    mmi_scale: float = 0.2
    beam: int = 16
    nbest: int = 4


def needs_alignment(criterion: str) -> bool:
    return criterion.startswith(("lfsegmbr", "lfmbr"))


def evaluate(
    criterion: str,
    table: PosteriorTable,
    target: Sequence[int],
    lm: NGramPhonemeLM | None,
    settings: Settings = Settings(),
    viterbi: tuple[tuple[int, ...], SegmentInfo] | None = None,
) -> LossResult:
    """Loss and gradient of ``criterion``.

    ``cefs`` always uses the unscaled model.  The ``+mmi`` variants add
    ``settings.mmi_scale`` times the LF-MMI loss.  MBR criteria align the
    target on ``table`` itself when no reference alignment is given.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    sc = settings.scales
    if criterion == "cefs":
        return ce_fs_loss(table, target)
    if criterion == "lfmmi":
        return mmi_loss(table, target, lm, sc)
    if criterion == "nbest-mbr":
        return nbest_mbr_table_loss(table, target, lm, sc, settings.beam, settings.nbest)
    if viterbi is None:
        viterbi = viterbi_align(table, target)
    base, _, extra = criterion.partition("+")
    if base == "lfsegmbr":
        res = segmbr_loss(table, target, viterbi, lm, sc, settings.seg)
    else:
        res = mbr_loss(table, target, viterbi[1], lm, sc, settings.mbr)
    if extra:
        mmi = mmi_loss(table, target, lm, sc)
        combined = res + mmi.scaled(settings.mmi_scale)
        combined.info = {base: res.value, "lfmmi": mmi.value}
        return combined
    return res
