"""Sample and cluster scoring, penalty-weight tuning, and compute-based top-k selection."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .cluster import Cluster


@dataclass(frozen=True)
class ScoreWeights:
    w_s: float = 1.0
    w_g: float = 1.0
    w_p: float = 2.0
    attempt_penalty: float = 0.5

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"weight {name}={v} must be finite and nonnegative")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Candidate:
    """A sampled program plus everything ranking needs to know about it."""

    id: str
    sample_index: int
    subtask_id: str = ""
    compute: int = 0
    scorer_value: float = 0.0
    gen_test_error_rate: float = 0.0
    public_test_fail_rate: float = 0.0
    signature: tuple = ()
    prompt_hash: str = ""


@dataclass(frozen=True)
class SampleScore:
    candidate_id: str
    scorer_value: float
    gen_test_error_rate: float
    public_test_fail_rate: float
    combined: float


class Scorer(Protocol):
    def evaluate(self, candidate: Candidate, context: Mapping) -> float: ...


class PublicTestScorer:
    """Stand-in for a learned scorer: the public-test pass rate."""

    def evaluate(self, candidate, context):
        return 1.0 - context.get("public_test_fail_rate", candidate.public_test_fail_rate)


def failure_rate(passed: Sequence[bool]) -> float:
    passed = list(passed)
    if not passed:
        return 0.0
    return sum(1 for p in passed if not p) / len(passed)


def combine(scorer_value: float, gen_err: float, public_fail: float, weights: ScoreWeights) -> float:
    return weights.w_s * scorer_value - weights.w_g * gen_err - weights.w_p * public_fail


def score_sample(candidate: Candidate, public_results: Sequence[bool], gen_results: Sequence[bool],
                 scorer: Scorer, weights: ScoreWeights) -> SampleScore:
    """`public_results` holds pass flags; `gen_results` holds ran-cleanly flags."""
    public_fail = failure_rate(public_results)
    gen_err = failure_rate(gen_results)
    value = scorer.evaluate(candidate, {"public_test_fail_rate": public_fail,
                                        "gen_test_error_rate": gen_err})
    return SampleScore(candidate.id, value, gen_err, public_fail,
                       combine(value, gen_err, public_fail, weights))


def rescore(candidate: Candidate, weights: ScoreWeights) -> SampleScore:
    """SampleScore from features already stored on the candidate."""
    return SampleScore(candidate.id, candidate.scorer_value, candidate.gen_test_error_rate,
                       candidate.public_test_fail_rate,
                       combine(candidate.scorer_value, candidate.gen_test_error_rate,
                               candidate.public_test_fail_rate, weights))


def score_cluster(cluster: Cluster, sample_scores: Mapping[str, SampleScore],
                  attempts_from_cluster: int, weights: ScoreWeights,
                  members: Iterable[str] | None = None) -> float:
    """Mean member score minus the attempt penalty times attempts so far.

    `members` restricts the mean to the cluster's surviving members.
    """
    ids = list(cluster.members if members is None else members)
    if not ids:
        raise ValueError(f"cluster {cluster.id} is empty")
    mean = sum(sample_scores[i].combined for i in ids) / len(ids)
    return mean - weights.attempt_penalty * attempts_from_cluster


def top_k_by_compute(candidates: Sequence[Candidate], k: int = 50) -> list[str]:
    """Ids of the k candidates that spent the most compute; ties by sample index."""
    ranked = sorted(candidates, key=lambda c: (-c.compute, c.sample_index))
    return [c.id for c in ranked[:k]]


# --- random-search tuning ---------------------------------------------------

DEFAULT_RANGES = {"w_s": (0.01, 100.0), "w_g": (0.01, 100.0), "w_p": (0.01, 100.0),
                  "attempt_penalty": (0.0, 10.0)}


def sample_weights(rng: np.random.Generator, ranges=DEFAULT_RANGES) -> ScoreWeights:
    vals = {}
    for name in ("w_s", "w_g", "w_p"):
        lo, hi = ranges[name]
        vals[name] = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
    lo, hi = ranges["attempt_penalty"]
    vals["attempt_penalty"] = float(rng.uniform(lo, hi))
    return ScoreWeights(**vals)


def evaluate_weights(historical, weights: ScoreWeights, submissions: int = 50) -> float:
    from .submit import simulate_judged

    return sum(simulate_judged(h, weights, submissions).total for h in historical)


def tune_weights(historical, budget: int, rng_seed: int, ranges=DEFAULT_RANGES,
                 submissions: int = 50, defaults: ScoreWeights = ScoreWeights()):
    """Random search over weight vectors by replaying the submission process.

    Sample 0 is always `defaults`. Returns ``(best_weights, report)``; ties go
    to the earlier sample.
    """
    historical = list(historical)
    if not historical:
        raise ValueError("tuning needs at least one historical problem")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = np.random.default_rng(rng_seed)
    vectors = [defaults] + [sample_weights(rng, ranges) for _ in range(budget - 1)]
    scores = [evaluate_weights(historical, w, submissions) for w in vectors]
    best = max(range(len(vectors)), key=lambda i: (scores[i], -i))
    report = {
        "seed": rng_seed,
        "budget": budget,
        "samples": [{"index": i, "weights": w.to_json(), "score": s}
                    for i, (w, s) in enumerate(zip(vectors, scores))],
        "chosen": {"index": best, "weights": vectors[best].to_json(), "score": scores[best]},
    }
    return vectors[best], report
