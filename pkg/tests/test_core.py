import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfseqtrain.core import (
    BOS,
    NO_LABEL,
    PAD,
    ContextSpace,
    InvalidSymbolError,
    PosteriorTable,
    Vocabulary,
    collapse,
    context_advance,
    initial_context,
    map_blanks,
    segment_info,
)
from lfseqtrain.semiring import (
    EXP_ONE,
    EXP_ZERO,
    NEG_INF,
    ExpectationValue,
    exp_plus,
    exp_product,
    exp_times,
    log_plus,
    logsumexp,
    scatter_expectation,
    scatter_logsumexp,
)

A, B, C = 0, 1, 2


class TestSequences:
    def test_collapse(self):
        eps = 2
        assert collapse((A, eps, eps, B, eps), eps) == (A, B)
        assert collapse((eps, eps, eps), eps) == ()
        assert collapse((A, A), eps) == (A, A)

    def test_map_blanks(self):
        eps = 2
        assert map_blanks((A, eps, eps, B, eps), eps) == (A, A, A, B, B)
        assert map_blanks((eps, A, eps), eps) == (NO_LABEL, A, A)
        assert map_blanks((eps, eps), eps) == (NO_LABEL, NO_LABEL)

    @given(st.lists(st.integers(0, 2), max_size=6), st.lists(st.integers(0, 8), max_size=8))
    def test_collapse_ignores_blank_insertion(self, labels, where):
        eps = 3
        y = list(labels)
        for w in where:
            y.insert(w % (len(y) + 1), eps)
        assert collapse(y, eps) == tuple(labels)

    def test_reserved_codes_are_distinct_and_outside_vocab(self):
        vocab = Vocabulary(3)
        codes = {vocab.blank, BOS, PAD, NO_LABEL}
        assert len(codes) == 4
        assert all(c not in range(vocab.size) for c in codes)

    def test_vocabulary_needs_a_phoneme(self):
        with pytest.raises(ValueError):
            Vocabulary(0)

    def test_format(self):
        assert Vocabulary(2).format((0, 2)) == "(a,ε)"


class TestContext:
    def test_advance_examples(self):
        eps = 3
        assert context_advance((A, B), C, eps) == (B, C)
        assert context_advance((BOS, BOS), A, eps) == (BOS, A)
        assert context_advance((A,), eps, eps) == (A,)

    @pytest.mark.parametrize("bad", [BOS, PAD])
    def test_advance_rejects_reserved(self, bad):
        with pytest.raises(InvalidSymbolError):
            context_advance((A,), bad, 3)

    @pytest.mark.parametrize("V,k", [(1, 1), (2, 1), (3, 2), (2, 3), (4, 2)])
    def test_state_count(self, V, k):
        space = ContextSpace(V, k)
        assert space.size == sum(V**j for j in range(k + 1))
        assert len(set(space.histories)) == space.size

    @pytest.mark.parametrize("V,k", [(2, 2), (3, 2), (2, 3)])
    def test_histories_have_bos_prefix(self, V, k):
        for h in ContextSpace(V, k).histories:
            seen_label = False
            for x in h:
                if x != BOS:
                    seen_label = True
                assert not (seen_label and x == BOS)

    @pytest.mark.parametrize("V,k", [(2, 1), (3, 2), (2, 3)])
    def test_tables_agree_with_advance(self, V, k):
        space = ContextSpace(V, k)
        assert space.index(initial_context(k)) == 0
        for code, h in enumerate(space.histories):
            assert space.history(code) == h
            assert space.index(h) == code
            for a in range(V):
                assert space.history(space.advance[code, a]) == context_advance(h, a, V)
            if h[-1] != BOS:
                assert space.last_label[code] == h[-1]

    @given(st.lists(st.integers(0, 3), max_size=10), st.integers(1, 3))
    def test_advance_along_alignment_tracks_prefix(self, y, k):
        eps = 3
        u = initial_context(k)
        for t in range(len(y)):
            u = context_advance(u, y[t], eps)
            prefix = collapse(y[: t + 1], eps)
            expected = ((BOS,) * k + prefix)[-k:]
            assert u == expected


class TestPosteriorTable:
    def test_random_rows_normalized(self):
        table = PosteriorTable.random(4, 3, 2, np.random.default_rng(0))
        assert np.allclose(logsumexp(table.values, axis=-1), 0.0, atol=1e-12)
        assert np.all(table.values <= 0)

    def test_rejects_unnormalized(self):
        values = np.full((2, 2, 3), math.log(0.3))
        with pytest.raises(ValueError):
            PosteriorTable(values, 1, Vocabulary(2))

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            PosteriorTable(np.zeros((2, 3, 2)), 1, Vocabulary(1))

    def test_accepts_neg_inf(self):
        values = np.full((1, 2, 2), NEG_INF)
        values[..., 0] = 0.0
        table = PosteriorTable(values, 1, Vocabulary(1))
        assert table.log_prob(0, (BOS,), 1) == NEG_INF

    def test_log_prob_by_history_or_code(self):
        table = PosteriorTable.random(2, 2, 2, np.random.default_rng(1))
        code = table.space.index((BOS, 1))
        assert table.log_prob(1, (BOS, 1), 0) == table.log_prob(1, code, 0) == table.values[1, code, 0]

    def test_from_logits_shift_invariant(self):
        logits = np.random.default_rng(2).normal(size=(3, 3, 3))
        a = PosteriorTable.from_logits(logits, 1, Vocabulary(2))
        b = PosteriorTable.from_logits(logits + 5.0, 1, Vocabulary(2))
        assert np.allclose(a.values, b.values, atol=1e-12)


class TestSegmentInfo:
    def test_examples(self):
        eps = 2
        info = segment_info((A, eps, B, eps), eps)
        assert info.boundaries == (1, 3) and info.positions == (1, 1, 2, 2)
        info = segment_info((eps, eps), eps)
        assert info.boundaries == () and info.positions == (0, 0)
        info = segment_info((A, B), eps)
        assert info.boundaries == (1, 2) and info.positions == (1, 2)

    @given(st.lists(st.integers(0, 2), max_size=10))
    def test_invariants(self, y):
        info = segment_info(y, 2)
        assert list(info.boundaries) == sorted(set(info.boundaries))
        assert all(b <= len(y) for b in info.boundaries)
        assert all(p <= q for p, q in zip(info.positions, info.positions[1:]))
        for s, b in enumerate(info.boundaries, start=1):
            assert info.positions[b - 1] == s


def _close(x, y, tol=1e-12):
    if x.log_mass == NEG_INF or y.log_mass == NEG_INF:
        return x.log_mass == y.log_mass
    return abs(x.log_mass - y.log_mass) <= tol and abs(x.exp_risk - y.exp_risk) <= tol


class TestSemiring:
    def test_log_plus(self):
        assert log_plus(NEG_INF, NEG_INF) == NEG_INF
        assert log_plus(NEG_INF, -1.0) == -1.0
        assert log_plus(math.log(0.25), math.log(0.75)) == pytest.approx(0.0, abs=1e-15)

    def test_logsumexp_all_neg_inf(self):
        assert logsumexp([NEG_INF, NEG_INF]) == NEG_INF
        out = logsumexp(np.full((2, 3), NEG_INF), axis=1)
        assert np.all(out == NEG_INF)

    def test_exp_plus_examples(self):
        x = exp_plus(ExpectationValue(math.log(0.5), 1.0), ExpectationValue(math.log(0.5), 3.0))
        assert _close(x, ExpectationValue(0.0, 2.0))
        x = exp_plus(EXP_ZERO, ExpectationValue(math.log(0.3), 5.0))
        assert _close(x, ExpectationValue(math.log(0.3), 5.0))
        x = exp_plus(ExpectationValue(math.log(0.9), 2.0), ExpectationValue(math.log(0.1), 12.0))
        assert _close(x, ExpectationValue(0.0, 3.0))

    def test_exp_times_examples(self):
        x = exp_times(ExpectationValue(math.log(0.5), 1.0), math.log(0.5), 0.6)
        assert _close(x, ExpectationValue(math.log(0.25), 1.6))
        x = ExpectationValue(-0.7, 2.5)
        assert exp_times(x, 0.0, 0.0) == x
        assert exp_times(EXP_ZERO, math.log(0.5), 1.0) == EXP_ZERO

    def test_axioms_on_random_triples(self):
        rng = np.random.default_rng(0)

        def draw():
            if rng.random() < 0.05:
                return EXP_ZERO
            return ExpectationValue(float(rng.normal(-1.0, 1.0)), float(rng.uniform(0, 5)))

        for _ in range(1000):
            x, y, z = draw(), draw(), draw()
            assert _close(exp_plus(exp_plus(x, y), z), exp_plus(x, exp_plus(y, z)))
            assert _close(exp_plus(x, y), exp_plus(y, x))
            assert _close(exp_product(exp_product(x, y), z), exp_product(x, exp_product(y, z)))
            assert _close(exp_product(x, exp_plus(y, z)), exp_plus(exp_product(x, y), exp_product(x, z)))
            assert _close(exp_product(exp_plus(y, z), x), exp_plus(exp_product(y, x), exp_product(z, x)))
            assert _close(exp_plus(x, EXP_ZERO), x)
            assert _close(exp_product(x, EXP_ONE), x)
            assert exp_product(x, EXP_ZERO).log_mass == NEG_INF

    def test_scatter_matches_scalar_ops(self):
        rng = np.random.default_rng(3)
        dst = rng.integers(0, 4, 20)
        mass = rng.normal(size=20)
        mass[::7] = NEG_INF
        risk = rng.uniform(0, 3, 20)
        out_mass, out_risk = scatter_expectation(dst, mass, risk, 5)
        for j in range(5):
            acc = EXP_ZERO
            for i in np.flatnonzero(dst == j):
                acc = exp_plus(acc, ExpectationValue(mass[i], risk[i]))
            assert _close(ExpectationValue(out_mass[j], out_risk[j] if acc.log_mass != NEG_INF else 0.0), acc)
        assert out_mass[4] == NEG_INF
        assert np.allclose(scatter_logsumexp(dst, mass, 5), out_mass)

    def test_products_of_paths_add_risk(self):
        edges = [(math.log(0.5), 1.0), (math.log(0.2), 0.5), (0.0, 2.0)]
        x = EXP_ONE
        for w, r in edges:
            x = exp_times(x, w, r)
        assert x.log_mass == pytest.approx(math.log(0.1), abs=1e-15)
        assert x.exp_risk == pytest.approx(3.5, abs=1e-15)


def test_space_enumeration_is_dense():
    V, k = 2, 2
    space = ContextSpace(V, k)
    expected = [(BOS, BOS)] + [(BOS, a) for a in range(V)] + list(itertools.product(range(V), repeat=2))
    assert sorted(space.histories) == sorted(expected)
