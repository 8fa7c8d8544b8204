import json
import math

import pytest

import reference
import synth
from opmal.errors import AllZeroCounts, BadK, EmptyCorpus, SingleClassError
from opmal.corpus import FeatureMatrix, Vocabulary
from opmal.ranking import (
    CHI_SQUARE,
    FISHER,
    GAIN_RATIO,
    INFO_GAIN,
    METHODS,
    SYM_UNCERTAINTY,
    apply_cuts,
    canonical_method,
    chi_square,
    chi_square_from_table,
    contingency_table,
    discretize_mdl,
    entropy,
    fisher_score,
    gain_ratio,
    info_gain,
    rank_top_k,
    ranking_from_dict,
    ranking_to_dict,
    render_comparison,
    render_ranking,
    score_feature,
    sym_uncertainty,
)


class TestEntropy:
    def test_closed_forms(self):
        assert entropy([3, 1]) == pytest.approx(0.811278, abs=1e-6)
        assert entropy([2, 2]) == pytest.approx(1.0)
        assert entropy([4, 0]) == pytest.approx(0.0)
        assert entropy([1, 1, 1, 1]) == pytest.approx(2.0)

    def test_all_zero(self):
        with pytest.raises(AllZeroCounts):
            entropy([0, 0])

    def test_negative(self):
        with pytest.raises(ValueError):
            entropy([3, -1])


class TestCanonicalMethod:
    def test_aliases(self):
        assert canonical_method("ig") == INFO_GAIN
        assert canonical_method("gr") == GAIN_RATIO
        assert canonical_method("su") == SYM_UNCERTAINTY
        assert canonical_method("chi") == CHI_SQUARE
        assert canonical_method("fisher") == FISHER
        for m in METHODS:
            assert canonical_method(m) == m

    def test_unknown(self):
        with pytest.raises(ValueError):
            canonical_method("pca")


class TestDiscretize:
    def test_two_clusters_one_cut(self):
        values = [0, 0, 0, 5, 5, 5]
        labels = [0, 0, 0, 1, 1, 1]
        assert discretize_mdl(values, labels) == [2.5]

    def test_interleaved_no_cut(self):
        values = [0, 1, 2, 3]
        labels = [0, 1, 0, 1]
        assert discretize_mdl(values, labels) == []

    def test_constant_feature(self):
        assert discretize_mdl([4, 4, 4, 4], [0, 1, 0, 1]) == []

    def test_empty(self):
        assert discretize_mdl([], []) == []

    def test_matches_reference(self, rng):
        for _ in range(150):
            n = int(rng.integers(2, 40))
            values = rng.integers(0, 8, size=n).tolist()
            labels = rng.integers(0, 2, size=n).tolist()
            assert discretize_mdl(values, labels) == pytest.approx(
                reference.ref_mdl_cuts(values, labels), abs=1e-12
            )

    def test_apply_cuts(self):
        bins = apply_cuts([0, 2, 2.5, 3, 9], [2.5, 6.0])
        assert bins.tolist() == [0, 0, 0, 1, 2]

    def test_apply_cuts_no_cuts(self):
        assert apply_cuts([1, 2, 3], []).tolist() == [0, 0, 0]


class TestContingency:
    def test_table(self):
        table = contingency_table([0, 0, 1, 1, 1], [0, 1, 0, 1, 1])
        assert table.tolist() == [[1, 1], [1, 2]]

    def test_bad_labels(self):
        with pytest.raises(ValueError):
            contingency_table([0, 0], [0, 2])


class TestScorers:
    def test_chi_square_perfect(self):
        assert chi_square_from_table([[20, 0], [0, 20]]) == pytest.approx(40.0)

    def test_chi_square_weak(self):
        assert chi_square_from_table([[10, 20], [30, 40]]) == pytest.approx(0.79365, abs=1e-4)

    def test_chi_square_zero_margin_cells(self):
        # an all-zero row contributes nothing rather than dividing by zero
        assert chi_square_from_table([[0, 0], [5, 5]]) == pytest.approx(0.0)

    def test_sym_uncertainty_perfect(self):
        labels = [0, 1, 1, 0, 1]
        assert sym_uncertainty(labels, labels) == pytest.approx(1.0)

    def test_info_gain_independent(self):
        assert info_gain([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0)

    def test_info_gain_perfect(self):
        assert info_gain([0, 0, 1, 1], [0, 0, 1, 1]) == pytest.approx(1.0)

    def test_gain_ratio_single_bin(self):
        assert gain_ratio([0, 0, 0, 0], [0, 1, 0, 1]) == pytest.approx(0.0)

    def test_gain_ratio_unbalanced_split(self):
        binned = [0, 1, 1, 1]
        labels = [0, 1, 1, 1]
        ig = info_gain(binned, labels)
        split_info = entropy([1, 3])
        assert gain_ratio(binned, labels) == pytest.approx(ig / split_info)

    def test_fisher_hand_case(self):
        values = [0, 2, 4, 6]
        labels = [0, 0, 1, 1]
        # class means 1 and 5, population stds both 1
        assert fisher_score(values, labels) == pytest.approx(2.0)

    def test_fisher_zero_spread_floored(self):
        score = fisher_score([1, 1, 3, 3], [0, 0, 1, 1])
        assert score == pytest.approx(2.0 / 1e-12)

    def test_fisher_no_signal(self):
        assert fisher_score([2, 2, 2, 2], [0, 0, 1, 1]) == pytest.approx(0.0)

    def test_fisher_single_class(self):
        with pytest.raises(SingleClassError):
            fisher_score([1, 2, 3], [1, 1, 1])

    def test_score_feature_dispatch(self, rng):
        values = rng.integers(0, 10, size=30).tolist()
        labels = rng.integers(0, 2, size=30).tolist()
        labels[0], labels[1] = 0, 1
        for method in METHODS:
            got = score_feature(values, labels, method)
            want = reference.ref_score(values, labels, method)
            assert got == pytest.approx(want, abs=1e-9), method

    def test_score_feature_unknown_method(self):
        with pytest.raises(ValueError):
            score_feature([1, 2], [0, 1], "mutualinfo")


def two_feature_matrix():
    vocab = Vocabulary(["alpha", "beta"])
    samples = [
        synth.make_sample({"alpha": 9, "beta": 1}, "malware", "m0"),
        synth.make_sample({"alpha": 8, "beta": 2}, "malware", "m1"),
        synth.make_sample({"alpha": 1, "beta": 1}, "benign", "b0"),
        synth.make_sample({"alpha": 2, "beta": 2}, "benign", "b1"),
    ]
    return FeatureMatrix(vocab, samples)


class TestRankTopK:
    def test_orders_by_score(self):
        r = rank_top_k(two_feature_matrix(), FISHER, 2)
        assert [e.opcode for e in r.entries] == ["alpha", "beta"]
        assert [e.rank for e in r.entries] == [1, 2]
        assert r.entries[0].score > r.entries[1].score
        assert r.opcodes == ("alpha", "beta")

    def test_k_clamped_to_vocabulary(self):
        r = rank_top_k(two_feature_matrix(), FISHER, 50)
        assert len(r.entries) == 2
        assert r.k == 50

    def test_ties_break_by_name(self):
        vocab = Vocabulary(["zeta", "eta"])
        samples = [
            synth.make_sample({"zeta": 5, "eta": 5}, "malware", "m0"),
            synth.make_sample({}, "benign", "b0"),
        ]
        r = rank_top_k(FeatureMatrix(vocab, samples), INFO_GAIN, 2)
        assert [e.opcode for e in r.entries] == ["eta", "zeta"]
        assert r.entries[0].score == r.entries[1].score

    def test_alias_method(self):
        r = rank_top_k(two_feature_matrix(), "ig", 1)
        assert r.method == INFO_GAIN

    def test_bad_k(self):
        with pytest.raises(BadK):
            rank_top_k(two_feature_matrix(), FISHER, 0)

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            rank_top_k(FeatureMatrix(Vocabulary(["a"]), []), FISHER, 1)

    def test_single_class(self):
        vocab = Vocabulary(["a"])
        samples = [synth.make_sample({"a": 1}, "benign", "b0")]
        with pytest.raises(SingleClassError):
            rank_top_k(FeatureMatrix(vocab, samples), FISHER, 1)

    def test_matches_reference_on_random(self, rng):
        m = synth.random_matrix(rng)
        labels = m.labels01()
        for method in METHODS:
            r = rank_top_k(m, method, len(m.vocabulary))
            for e in r.entries:
                want = reference.ref_score(m.column(e.opcode), labels, method)
                assert e.score == pytest.approx(want, abs=1e-9)


class TestSerialization:
    def test_round_trip(self):
        r = rank_top_k(two_feature_matrix(), FISHER, 2)
        d = ranking_to_dict(r, vocab_sha256="cafe")
        assert d["format"] == "opmal.ranking"
        assert d["vocab_sha256"] == "cafe"
        again = ranking_from_dict(json.loads(json.dumps(d)))
        assert again.method == r.method
        assert again.k == r.k
        assert again.opcodes == r.opcodes
        assert [e.score for e in again.entries] == [e.score for e in r.entries]

    def test_render_ranking(self):
        d = ranking_to_dict(rank_top_k(two_feature_matrix(), FISHER, 2))
        text = render_ranking(d)
        assert "alpha" in text and "beta" in text
        assert "fisher" in text

    def test_render_comparison(self):
        m = two_feature_matrix()
        docs = [ranking_to_dict(rank_top_k(m, meth, 2)) for meth in (FISHER, INFO_GAIN)]
        text = render_comparison(docs)
        assert "fisher" in text and "info_gain" in text
        # one rank row per feature
        assert text.count("\n") >= 3
