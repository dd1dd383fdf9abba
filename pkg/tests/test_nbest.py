import functools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from instances import PURE, SCALES, random_instance
from lfseqtrain import oracle
from lfseqtrain.core import PosteriorTable, Vocabulary
from lfseqtrain.diff import finite_diff_check
from lfseqtrain.lm import train_lm
from lfseqtrain.nbest import beam_nbest, levenshtein, nbest_mbr_loss, nbest_mbr_table_loss

A, B = 0, 1


def reference_levenshtein(a, b):
    @functools.lru_cache(maxsize=None)
    def d(i, j):
        if i == 0 or j == 0:
            return i + j
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


class TestLevenshtein:
    def test_examples(self):
        assert levenshtein((), ()) == 0
        assert levenshtein((A, B), ()) == 2
        assert levenshtein((A, B, A), (B, A)) == 1
        assert levenshtein((A, A, B), (B, A, A)) == 2

    @given(st.lists(st.integers(0, 3), max_size=8), st.lists(st.integers(0, 3), max_size=8))
    def test_matches_recursive_definition(self, a, b):
        assert levenshtein(a, b) == reference_levenshtein(tuple(a), tuple(b))

    @given(st.lists(st.integers(0, 3), max_size=8), st.lists(st.integers(0, 3), max_size=8))
    def test_symmetric(self, a, b):
        assert levenshtein(a, b) == levenshtein(b, a)


class TestBeam:
    def test_single_frame_ranking(self):
        values = np.log(np.array([[[0.5, 0.3, 0.2]] * 3]))
        table = PosteriorTable(values, 1, Vocabulary(2))
        hyps = beam_nbest(table, None, PURE, beam=4, N=2)
        assert [h for h, _ in hyps] == [(A,), (B,)]
        assert hyps[0][1] == pytest.approx(math.log(0.5))

    @pytest.mark.parametrize("T,V,k", [(3, 1, 1), (4, 2, 1), (4, 2, 2), (3, 3, 1)])
    def test_exhaustive_beam_is_exact(self, T, V, k):
        rng = np.random.default_rng(T * 7 + V + k)
        table = PosteriorTable.random(T, V, k, rng)
        lm = train_lm([tuple(rng.integers(0, V, 3))], V, k)
        total = sum(V**s for s in range(T + 1))
        scores = oracle.label_sequence_scores(table, lm, SCALES)
        ranked = sorted(scores.items(), key=lambda kv: -kv[1])
        hyps = beam_nbest(table, lm, SCALES, beam=total, N=4)
        assert [h for h, _ in hyps] == [h for h, _ in ranked[:4]]
        for (h, m), (_, s) in zip(hyps, ranked):
            assert m == pytest.approx(s, abs=1e-10)
        best = beam_nbest(table, lm, SCALES, beam=total, N=1)
        assert best[0][0] == max(scores, key=scores.get)

    def test_narrow_beam_masses_are_lower_bounds(self):
        rng = np.random.default_rng(4)
        table = PosteriorTable.random(5, 2, 1, rng)
        scores = oracle.label_sequence_scores(table, None, PURE)
        for h, m in beam_nbest(table, None, PURE, beam=3, N=3):
            assert m <= scores[h] + 1e-12

    def test_argument_checks(self):
        table = PosteriorTable.uniform(2, 2, 1)
        with pytest.raises(ValueError):
            beam_nbest(table, None, PURE, beam=2, N=3)
        with pytest.raises(ValueError):
            beam_nbest(table, None, PURE, beam=2, N=0)


class TestListLoss:
    def test_target_only(self):
        assert nbest_mbr_loss([((A, B), -1.0)], (A, B)).value == 0.0

    def test_equal_mass_average(self):
        res = nbest_mbr_loss([((A,), -0.5), ((B, B, A), -0.5)], (A,))
        assert res.value == pytest.approx(1.0)

    def test_empty_list(self):
        with pytest.raises(ValueError):
            nbest_mbr_loss([], (A,))

    def test_full_list_is_exact_risk(self):
        rng = np.random.default_rng(3)
        table = PosteriorTable.random(4, 2, 1, rng)
        target = (A, B)
        scores = oracle.label_sequence_scores(table, None, PURE)
        expected = sum(math.exp(s) * reference_levenshtein(h, target) for h, s in scores.items())
        assert nbest_mbr_loss(list(scores.items()), target).value == pytest.approx(expected, abs=1e-12)

    def test_gradient_over_masses(self):
        hyps = [((A,), -0.3), ((B,), -1.2), ((A, B), -2.0), ((), -0.9)]
        target = (A, B)
        res = nbest_mbr_loss(hyps, target)
        h = 1e-6
        for i in range(len(hyps)):
            up = [(x, m + h * (j == i)) for j, (x, m) in enumerate(hyps)]
            down = [(x, m - h * (j == i)) for j, (x, m) in enumerate(hyps)]
            numeric = (nbest_mbr_loss(up, target).value - nbest_mbr_loss(down, target).value) / (2 * h)
            assert res.grad[i] == pytest.approx(numeric, abs=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_table_gradient_with_exhaustive_list(seed):
    rng = np.random.default_rng(900 + seed)
    table, target, lm, _ = random_instance(rng, T=3, V=2)
    total = sum(2**s for s in range(4))
    report = finite_diff_check(lambda t: nbest_mbr_table_loss(t, target, lm, SCALES, beam=total, N=total), table)
    assert report.passed, report


def test_table_loss_default_sizes():
    rng = np.random.default_rng(1)
    table, target, lm, _ = random_instance(rng, T=5, V=3)
    res = nbest_mbr_table_loss(table, target, lm, SCALES)
    assert len(res.info["nbest"]) == 4
    assert res.value >= 0.0
    assert res.grad.shape == table.values.shape
