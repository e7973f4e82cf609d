import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import helpers
from cpharness.cluster import Cluster, cluster_candidates
from cpharness.rank import (Candidate, PublicTestScorer, SampleScore, ScoreWeights,
                            evaluate_weights, rescore, sample_weights, score_cluster,
                            score_sample, top_k_by_compute, tune_weights)

W = ScoreWeights()


class FixedScorer:
    def __init__(self, value):
        self.value = value

    def evaluate(self, candidate, context):
        return self.value


def ss(cid, combined):
    return SampleScore(cid, 0.0, 0.0, 0.0, combined)


class TestScoreSample:
    def test_all_pass(self):
        s = score_sample(Candidate("a", 0), [True] * 3, [True] * 8, FixedScorer(1.0), W)
        assert s.combined == pytest.approx(1.0)

    def test_public_fail_only(self):
        s = score_sample(Candidate("a", 0), [False, False], [True], FixedScorer(0.0), W)
        assert s.combined == pytest.approx(-2.0)

    def test_mixed(self):
        s = score_sample(Candidate("a", 0), [True, False], [True, True, True, False],
                         FixedScorer(0.8), W)
        assert (s.gen_test_error_rate, s.public_test_fail_rate) == (0.25, 0.5)
        assert s.combined == pytest.approx(-0.45)

    def test_public_scorer(self):
        s = score_sample(Candidate("a", 0), [True, True, False, False], [], PublicTestScorer(), W)
        assert s.scorer_value == pytest.approx(0.5)

    def test_rescore_matches(self):
        c = Candidate("a", 0, scorer_value=0.8, gen_test_error_rate=0.25, public_test_fail_rate=0.5)
        assert rescore(c, W).combined == pytest.approx(-0.45)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            ScoreWeights(w_s=-1)


class TestScoreCluster:
    def test_mean(self):
        cl = Cluster(0, ("x",), ("a", "b"))
        assert score_cluster(cl, {"a": ss("a", 1.0), "b": ss("b", 0.0)}, 0, W) == 0.5

    def test_penalty(self):
        cl = Cluster(0, ("x",), ("a",))
        assert score_cluster(cl, {"a": ss("a", 1.0)}, 2, W) == pytest.approx(0.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            score_cluster(Cluster(0, (), ()), {}, 0, W)

    def test_hand_ranked_clusters(self):
        scores = {"a": ss("a", 0.9), "b": ss("b", 0.7), "c": ss("c", 0.2), "d": ss("d", -1.0),
                  "e": ss("e", 0.5)}
        clusters = cluster_candidates({"a": (1,), "b": (1,), "c": (2,), "d": (3,), "e": (3,)})
        ranked = sorted(clusters, key=lambda cl: -score_cluster(cl, scores, 0, W))
        assert [cl.members for cl in ranked] == [("a", "b"), ("c",), ("d", "e")]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=10), st.integers(0, 20),
       st.floats(0, 10))
def test_cluster_score_decreases_with_attempts(vals, attempts, penalty):
    w = ScoreWeights(attempt_penalty=penalty)
    cl = Cluster(0, (), tuple(f"m{i}" for i in range(len(vals))))
    scores = {f"m{i}": ss(f"m{i}", v) for i, v in enumerate(vals)}
    assert score_cluster(cl, scores, attempts + 1, w) <= score_cluster(cl, scores, attempts, w)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_sample_score_monotone_in_failures(scorer, gen_err, public_fail, bump):
    c1 = Candidate("a", 0, scorer_value=scorer, gen_test_error_rate=gen_err,
                   public_test_fail_rate=public_fail)
    c2 = Candidate("a", 0, scorer_value=scorer, gen_test_error_rate=min(1, gen_err + bump),
                   public_test_fail_rate=min(1, public_fail + bump))
    assert rescore(c2, W).combined <= rescore(c1, W).combined + 1e-12


class TestTopK:
    def cands(self, metrics):
        return [Candidate(f"c{i}", i, compute=m) for i, m in enumerate(metrics)]

    def test_example(self):
        assert top_k_by_compute(self.cands([5, 1, 9]), 2) == ["c2", "c0"]

    def test_full_pool(self):
        assert top_k_by_compute(self.cands([5, 1, 9]), 3) == ["c2", "c0", "c1"]

    def test_k_larger_than_pool(self):
        assert len(top_k_by_compute(self.cands([5, 1]), 50)) == 2

    def test_ties_by_sample_index(self):
        assert top_k_by_compute(self.cands([3, 3, 3]), 2) == ["c0", "c1"]

    def test_sort_oracle_1024(self):
        rng = np.random.default_rng(7)
        metrics = rng.integers(0, 10**6, 1024).tolist()
        got = top_k_by_compute(self.cands(metrics), 50)
        oracle = [f"c{i}" for i in np.argsort(-np.array(metrics), kind="stable")[:50]]
        assert got == oracle


class TestTuning:
    def test_budget_one_returns_defaults(self):
        jp = helpers.random_judged_problem(np.random.default_rng(0))
        best, report = tune_weights([jp], budget=1, rng_seed=3)
        assert best == ScoreWeights()
        assert len(report["samples"]) == 1

    def test_rigged_pool_needs_penalty(self):
        jp = helpers.rigged_judged_problem()
        assert evaluate_weights([jp], ScoreWeights(attempt_penalty=0.0)) == 0.0
        best, report = tune_weights([jp], budget=50, rng_seed=1,
                                    defaults=ScoreWeights(attempt_penalty=0.0))
        assert best.attempt_penalty > 0
        assert report["chosen"]["score"] == 100.0

    def test_deterministic(self):
        hist = [helpers.random_judged_problem(np.random.default_rng(s)) for s in range(3)]
        a = tune_weights(hist, budget=8, rng_seed=11)
        b = tune_weights(hist, budget=8, rng_seed=11)
        assert a == b

    def test_chosen_is_argmax(self):
        hist = [helpers.random_judged_problem(np.random.default_rng(s)) for s in range(3)]
        _, report = tune_weights(hist, budget=10, rng_seed=5, submissions=5)
        scores = [s["score"] for s in report["samples"]]
        assert report["chosen"]["index"] == scores.index(max(scores))

    def test_sampled_ranges(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            w = sample_weights(rng)
            assert 0.01 <= w.w_s <= 100 and 0 <= w.attempt_penalty <= 10

    def test_empty_history(self):
        with pytest.raises(ValueError):
            tune_weights([], 5, 0)
