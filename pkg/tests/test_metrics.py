import logging
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from grag.metrics import (
    MissingQuestion,
    NonFiniteScore,
    UnknownDocId,
    eval_scores_file,
    evaluate,
    hit_at,
    mhits10,
    mrr,
    mtrr,
    ranks_from_scores,
    tied_hit_at,
    tied_reciprocal_rank,
    tmhits,
    tmhits10,
    write_scores_tsv,
)
from oracles import exact_expected_hits, monte_carlo_hits, strictly_higher_ranks, tie_break_orderings

tied_scores = st.lists(st.integers(0, 4), min_size=1, max_size=8)


def one(scores, positives):
    return [(ranks_from_scores(scores), positives)]


class TestRanks:
    @pytest.mark.parametrize("scores,ranks,ties", [
        ((3, 1, 2), (1, 3, 2), (1, 1, 1)),
        ((5, 5, 5), (1, 1, 1), (3, 3, 3)),
        ((9, 7, 7, 7, 2), (1, 2, 2, 2, 5), (1, 3, 3, 3, 1)),
    ])
    def test_examples(self, scores, ranks, ties):
        r = ranks_from_scores(scores)
        assert tuple(r.ranks) == ranks and tuple(r.tie_counts) == ties

    @given(st.lists(st.integers(-5, 5), min_size=1, max_size=40))
    def test_matches_strictly_higher_count(self, scores):
        r = ranks_from_scores([float(s) for s in scores])
        ranks, ties = strictly_higher_ranks(scores)
        assert r.ranks.tolist() == ranks and r.tie_counts.tolist() == ties

    @given(st.lists(st.integers(-5, 5), min_size=1, max_size=40))
    def test_block_structure(self, scores):
        r = ranks_from_scores(scores)
        blocks = sorted({(int(a), int(t)) for a, t in zip(r.ranks, r.tie_counts)})
        assert sum(t for _, t in blocks) == len(scores)
        for (r0, t0), (r1, _) in zip(blocks, blocks[1:]):
            assert r1 == r0 + t0
        assert (np.all(r.tie_counts == 1)) == (len(set(scores)) == len(scores))

    def test_non_finite(self):
        with pytest.raises(NonFiniteScore):
            ranks_from_scores([1.0, float("nan")])


class TestTerms:
    def test_mrr_examples(self):
        assert mrr(one([5, 9, 1], [0])) == 0.5
        assert mrr(one([9, 8, 7, 6], [0, 3])) == 0.625
        assert mrr(one([3, 2], [0])) == 1.0

    def test_hits_examples(self):
        assert hit_at(10, 1) == 1.0 and hit_at(11, 1) == 0.0
        scores = list(range(40, 0, -1))
        assert mhits10(one(scores, [1, 9, 29])) == pytest.approx(2 / 3)

    def test_mtrr_examples(self):
        assert tied_reciprocal_rank(4, 1) == 0.25
        assert tied_reciprocal_rank(1, 3) == 0.5

    def test_tmhits_examples(self):
        assert tied_hit_at(1, 20) == 0.5
        assert tied_hit_at(13, 1) == 0.0
        assert tied_hit_at(13, 5) == 0.0
        assert tied_hit_at(11, 4) == 0.0
        assert tied_hit_at(9, 4) == 0.5

    @given(st.integers(1, 60), st.integers(1, 60))
    def test_mtrr_is_reciprocal_of_mean_rank(self, r, t):
        mean_rank = Fraction(sum(range(r, r + t)), t)
        assert tied_reciprocal_rank(r, t) == float(1 / mean_rank)
        expected_rr = sum(Fraction(1, k) for k in range(r, r + t)) / t
        assert Fraction(tied_reciprocal_rank(r, t)) <= expected_rr + Fraction(1, 10**12)


class TestAggregates:
    @given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=30, unique=True), st.data())
    def test_collapse_without_ties(self, scores, data):
        pos = data.draw(st.lists(st.integers(0, len(scores) - 1), min_size=1, unique=True))
        rk = one(scores, pos)
        assert mtrr(rk) == mrr(rk)
        assert tmhits10(rk) == mhits10(rk)

    @given(tied_scores, st.data(), st.integers(1, 10))
    def test_tmhits_equals_enumerated_expectation(self, scores, data, k):
        pos = data.draw(st.lists(st.integers(0, len(scores) - 1), min_size=1, unique=True))
        exact = exact_expected_hits(scores, pos, k)
        expect = sum(exact.values()) / len(pos)
        assert tmhits(one(scores, pos), k) == pytest.approx(float(expect), abs=1e-12)

    def test_tmhits_monte_carlo(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(15, 60))
            scores = rng.integers(0, 6, size=n).astype(float)
            pos = rng.choice(n, size=int(rng.integers(1, 4)), replace=False).tolist()
            mc = np.mean([monte_carlo_hits(scores, [p], 10, 10_000, rng) for p in pos])
            assert abs(tmhits10(one(scores, pos)) - mc) <= 0.01

    @given(tied_scores, st.data())
    def test_mtrr_bounded_by_expected_rr(self, scores, data):
        pos = data.draw(st.lists(st.integers(0, len(scores) - 1), min_size=1, unique=True))
        orders = list(tie_break_orderings(scores))
        expected = 0.0
        for p in pos:
            expected += sum(1 / (o.index(p) + 1) for o in orders) / len(orders)
        expected /= len(pos)
        rk = one(scores, pos)
        assert mtrr(rk) <= expected + 1e-12
        assert mtrr(rk) <= mrr(rk)

    @given(st.lists(st.integers(0, 6), min_size=1, max_size=30), st.data())
    def test_monotone_and_bounded_single_positive(self, scores, data):
        p = data.draw(st.integers(0, len(scores) - 1))
        raised = list(scores)
        raised[p] += data.draw(st.integers(1, 4))
        for metric in (mrr, mhits10, mtrr, tmhits10):
            a, b = metric(one(scores, [p])), metric(one(raised, [p]))
            assert 0 <= a <= 1 and 0 <= b <= 1
            assert b >= a

    @given(st.lists(st.integers(0, 6), min_size=1, max_size=30), st.data())
    def test_tmhits_monotone_any_positive_set(self, scores, data):
        pos = data.draw(st.lists(st.integers(0, len(scores) - 1), min_size=1, unique=True))
        p = data.draw(st.sampled_from(pos))
        raised = list(scores)
        raised[p] += data.draw(st.integers(1, 4))
        assert tmhits10(one(raised, pos)) >= tmhits10(one(scores, pos)) - 1e-15

    def test_raising_one_of_two_tied_positives_lowers_mrr(self):
        # optimistic ranks: both positives share rank 1 until one of them is raised
        assert mrr(one([0, 0], [0, 1])) == 1.0
        assert mrr(one([1, 0], [0, 1])) == 0.75

    def test_questions_without_positives_skipped(self):
        assert mrr([(ranks_from_scores([1, 2]), []), (ranks_from_scores([1, 2]), [1])]) == 1.0


class TestScoreFiles:
    def test_all_tied(self, tmp_path):
        n = 100
        scores = {"q1": {f"d{k}": 50.0 for k in range(n)}}
        write_scores_tsv(scores, tmp_path / "s.tsv")
        rep = eval_scores_file(tmp_path / "s.tsv", {"q1": {"d3", "d70"}})
        assert rep.mtrr == 2 / (2 + n - 1)
        assert rep.tmhits10 == pytest.approx(0.1, abs=1e-15)
        assert rep.mrr == 1.0 and rep.mhits10 == 1.0

    def test_all_distinct(self, tmp_path):
        rng = np.random.default_rng(2)
        scores = {f"q{i}": {f"d{k}": float(v) for k, v in enumerate(rng.permutation(30))} for i in range(5)}
        qrels = {f"q{i}": {f"d{i}", f"d{i + 7}"} for i in range(5)}
        write_scores_tsv(scores, tmp_path / "s.tsv")
        rep = eval_scores_file(tmp_path / "s.tsv", qrels)
        assert rep.mtrr == rep.mrr and rep.tmhits10 == rep.mhits10
        direct = evaluate(scores, qrels)
        assert direct.mrr == rep.mrr

    def test_empty_qrels_excluded(self, caplog):
        scores = {"q1": {"a": 1.0, "b": 0.0}, "q2": {"a": 1.0}}
        with caplog.at_level(logging.WARNING):
            rep = evaluate(scores, {"q1": {"b"}})
        assert rep.excluded_questions == ["q2"] and rep.n_questions == 1
        assert rep.mrr == 0.5
        assert any("excluded" in r.message for r in caplog.records)

    def test_errors(self):
        with pytest.raises(UnknownDocId):
            evaluate({"q1": {"a": 1.0}}, {"q1": {"zz"}})
        with pytest.raises(MissingQuestion):
            evaluate({"q1": {"a": 1.0}}, {"q1": {"a"}, "q9": {"a"}})

    def test_float_roundtrip(self, tmp_path):
        scores = {"q": {"a": 0.1 + 0.2, "b": math.pi, "c": np.float64(1e-300)}}
        write_scores_tsv(scores, tmp_path / "s.tsv")
        from grag.metrics import read_scores_tsv
        assert read_scores_tsv(tmp_path / "s.tsv") == {"q": {k: float(v) for k, v in scores["q"].items()}}
