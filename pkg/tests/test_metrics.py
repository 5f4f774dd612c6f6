from fractions import Fraction

import numpy as np
import pytest

from sslab.metrics import (
    DegenerateScoresError,
    RocCurve,
    ScoreSet,
    accuracy,
    auc,
    auc_from_arrays,
    roc_curve,
    trapezoid_auc,
)


def make_scores(labels, scores):
    return ScoreSet([f"s{i}" for i in range(len(labels))], np.array(labels), np.array(scores))


def oracle_auc(labels, scores) -> float:
    """Exact rational pairwise oracle: concordant + half-tied over all pairs."""
    labels = np.asarray(labels)
    scores = np.asarray(scores)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    concordant = int(np.sum(pos[:, None] > neg[None, :]))
    tied = int(np.sum(pos[:, None] == neg[None, :]))
    return float(Fraction(2 * concordant + tied, 2 * len(pos) * len(neg)))


class TestAccuracy:
    def test_all_correct_positives(self):
        assert accuracy(make_scores([1, 1], [1.0, 1.0])) == 1.0

    def test_two_sample_perfect(self):
        assert accuracy(make_scores([1, 0], [0.9, 0.1])) == 1.0

    def test_direct_count_oracle(self):
        # 0.9->1 ok, 0.8->1 wrong, 0.2->0 ok, 0.4->0 wrong
        assert accuracy(make_scores([1, 0, 0, 1], [0.9, 0.8, 0.2, 0.4])) == 0.5

    def test_score_at_threshold_predicts_class_zero(self):
        assert accuracy(make_scores([0, 1], [0.5, 0.5])) == 0.5

    def test_empty_rejected(self):
        with pytest.raises(DegenerateScoresError):
            accuracy(make_scores([], []))


class TestRocCurve:
    def test_perfect_separation_passes_corner(self):
        curve = roc_curve(make_scores([1, 1, 0, 0], [0.9, 0.8, 0.2, 0.1]))
        assert (0.0, 1.0) in curve.points()

    def test_all_scores_equal_is_diagonal_endpoints(self):
        curve = roc_curve(make_scores([1, 0, 1], [0.5, 0.5, 0.5]))
        assert curve.points() == [(0.0, 0.0), (1.0, 1.0)]

    def test_hand_threshold_sweep(self):
        curve = roc_curve(make_scores([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1]))
        assert curve.points() == [(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]

    def test_monotone_and_endpoints(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            n = int(rng.integers(2, 40))
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.random(n), 2)
            curve = roc_curve(make_scores(labels, scores))
            assert np.all(np.diff(curve.fpr) >= 0)
            assert np.all(np.diff(curve.tpr) >= 0)
            assert curve.points()[0] == (0.0, 0.0) and curve.points()[-1] == (1.0, 1.0)

    def test_single_class_rejected(self):
        with pytest.raises(DegenerateScoresError):
            roc_curve(make_scores([1, 1], [0.2, 0.4]))


class TestAuc:
    def test_pairwise_concordance_example(self):
        assert auc(make_scores([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1])) == 0.75

    def test_all_ties_is_half(self):
        assert auc(make_scores([1, 0, 1, 0], [0.3, 0.3, 0.3, 0.3])) == 0.5

    def test_perfect_ranking(self):
        assert auc(make_scores([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9])) == 1.0

    def test_equals_trapezoid_of_roc(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(2, 60))
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.random(n), 1)  # force ties
            s = make_scores(labels, scores)
            assert abs(auc(s) - trapezoid_auc(roc_curve(s))) < 1e-12

    def test_exact_rational_oracle_with_ties(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            n = int(rng.integers(2, 120))
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.random(n), int(rng.integers(1, 3)))
            assert auc_from_arrays(labels, scores) == oracle_auc(labels, scores)

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 2, 100)
        labels[0], labels[1] = 0, 1
        scores = rng.random(100)
        assert auc_from_arrays(labels, scores) == auc_from_arrays(labels, scores**3)

    def test_label_flip_symmetry(self):
        rng = np.random.default_rng(4)
        labels = rng.integers(0, 2, 80)
        labels[0], labels[1] = 0, 1
        scores = rng.random(80)  # continuous, no ties
        a = auc_from_arrays(labels, scores)
        assert abs(auc_from_arrays(1 - labels, scores) - (1.0 - a)) < 1e-15

    def test_single_class_rejected(self):
        with pytest.raises(DegenerateScoresError):
            auc(make_scores([0, 0], [0.2, 0.4]))


class TestScoreSetIO:
    def test_csv_round_trip(self, tmp_path):
        s = make_scores([1, 0, 1], [0.25, 0.5, 1.0 / 3.0])
        path = tmp_path / "scores.csv"
        s.to_csv(path)
        back = ScoreSet.from_csv(path)
        assert back.ids == s.ids
        assert np.array_equal(back.labels, s.labels)
        assert back.scores.tobytes() == s.scores.tobytes()

    def test_validation(self):
        with pytest.raises(ValueError):
            make_scores([2, 0], [0.1, 0.2])
        with pytest.raises(ValueError):
            make_scores([1, 0], [1.5, 0.2])
