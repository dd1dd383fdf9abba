import numpy as np
import pytest

from instances import PURE
from lfseqtrain.core import PosteriorTable, segment_info
from lfseqtrain.diff import LossResult, NonFiniteLossError, finite_diff_check
from lfseqtrain.fullsum import ce_fs_loss
from lfseqtrain.lfmbr import MbrConfig, mbr_loss
from lfseqtrain.lfmmi import mmi_loss


def test_cefs_random_passes():
    table = PosteriorTable.random(4, 2, 1, np.random.default_rng(0))
    report = finite_diff_check(lambda t: ce_fs_loss(t, (0, 1)), table, step=1e-5)
    assert report.passed
    assert report.max_rel_error <= 1e-5


def test_constant_loss_has_zero_error():
    # one phoneme and a zero-width length window: every survivor is the target
    table = PosteriorTable.random(4, 1, 1, np.random.default_rng(5))
    info = segment_info((0, 1, 0, 1), 1)
    cfg = MbrConfig(L=0, gamma=float("inf"), W=0)
    assert np.all(mbr_loss(table, (0, 0), info, None, PURE, cfg).grad == 0)
    report = finite_diff_check(lambda t: mbr_loss(t, (0, 0), info, None, PURE, cfg), table)
    assert report.passed
    assert report.max_abs_error == 0.0


def test_bad_gradient_is_caught():
    table = PosteriorTable.random(3, 2, 1, np.random.default_rng(1))

    def wrong(t):
        res = ce_fs_loss(t, (0,))
        return LossResult(res.value, res.grad * 1.01)

    report = finite_diff_check(wrong, table)
    assert not report.passed
    assert report.worst_index is not None


def test_non_finite_base_aborts():
    table = PosteriorTable.uniform(2, 2, 1)
    with pytest.raises(NonFiniteLossError):
        finite_diff_check(lambda t: LossResult(float("inf"), np.zeros(t.values.shape)), table)


def test_step_must_be_positive():
    table = PosteriorTable.uniform(2, 2, 1)
    with pytest.raises(ValueError):
        finite_diff_check(lambda t: ce_fs_loss(t, (0,)), table, step=0.0)


def test_shape_mismatch():
    table = PosteriorTable.uniform(2, 2, 1)
    with pytest.raises(ValueError):
        finite_diff_check(lambda t: LossResult(1.0, np.zeros(3)), table)


def test_mmi_at_unit_scales_matches_cefs_value():
    table = PosteriorTable.random(4, 2, 1, np.random.default_rng(2))
    assert mmi_loss(table, (1, 0), None, PURE).value == pytest.approx(ce_fs_loss(table, (1, 0)).value, abs=1e-10)


def test_loss_result_arithmetic():
    a = LossResult(1.0, np.ones(2), {"x": 1})
    b = LossResult(2.0, np.full(2, 3.0))
    c = a + b.scaled(0.5)
    assert c.value == 2.0
    assert np.array_equal(c.grad, np.full(2, 2.5))
