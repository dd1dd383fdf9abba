import math

import numpy as np
import pytest

from instances import PURE, random_instance
from lfseqtrain import oracle
from lfseqtrain.core import PosteriorTable
from lfseqtrain.lfmbr import MbrConfig


def test_counts():
    assert len(oracle.enumerate_alignments(2, 1)) == 4
    assert sorted(oracle.enumerate_alignments(1, 2)) == [(0,), (1,), (2,)]
    assert len(oracle.enumerate_alignments(3, 2)) == 27
    assert len(set(oracle.enumerate_alignments(4, 2))) == 81


def test_cap():
    with pytest.raises(oracle.EnumerationCapError):
        oracle.enumerate_alignments(30, 5)
    with pytest.raises(oracle.EnumerationCapError):
        oracle.enumerate_alignments(3, 2, cap=26)
    assert oracle.enumeration_size(30, 5) == 6**30


def test_cefs_fixture():
    table = PosteriorTable.uniform(2, 2, 1)
    assert oracle.brute_loss("cefs", table, (0,)) == pytest.approx(-math.log(2 / 9), abs=1e-12)


def test_lfmbr_fixture():
    table = PosteriorTable.uniform(2, 1, 1)
    cfg = MbrConfig(L=1, gamma=math.inf, W=10)
    assert oracle.brute_loss("lfmbr", table, (0,), None, PURE, (0, 1), mbr_cfg=cfg) == pytest.approx(0.5)


@pytest.mark.parametrize("seed", range(4))
def test_mmi_at_unit_scales_equals_cefs(seed):
    table, target, lm, _ = random_instance(np.random.default_rng(seed))
    assert oracle.brute_loss("lfmmi", table, target, lm, PURE) == pytest.approx(
        oracle.brute_loss("cefs", table, target), abs=1e-12
    )


def test_label_sequence_scores_normalized():
    table = PosteriorTable.random(4, 2, 2, np.random.default_rng(0))
    scores = oracle.label_sequence_scores(table, None, PURE)
    assert sum(math.exp(v) for v in scores.values()) == pytest.approx(1.0, abs=1e-12)
    assert len(scores) == sum(2**s for s in range(5))


def test_unknown_kind():
    with pytest.raises(ValueError):
        oracle.brute_loss("ctc", PosteriorTable.uniform(2, 1, 1), (0,))


def test_mbr_kinds_need_reference():
    with pytest.raises(ValueError):
        oracle.brute_loss("lfmbr", PosteriorTable.uniform(2, 1, 1), (0,))


def test_segment_risk_by_hand():
    cfg = oracle.SegMbrConfig(L=1, c=0.3, I=2)
    assert oracle.segment_risk((1, 1), (0, 1), 1, cfg) == 2.0
    assert oracle.segment_risk((1, 0), (0, 1), 1, cfg) == 1.0
    assert oracle.segment_risk((0, 0), (0, 1), 1, cfg) == 0.0
    assert oracle.segment_risk((0, 0), (0, 1), 1, oracle.SegMbrConfig(L=1, c=0.3, I=1)) == 0.0
    ref = (1, 0, 1)
    assert oracle.segment_risk((0, 0, 1), ref, 1, oracle.SegMbrConfig(L=1, c=0.3, I=1)) is None
