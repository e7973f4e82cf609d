"""pass@k, contest ranks and the maximum-likelihood rating fit."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .domain import ContestRecord, model_contest_score

RATING_BOUNDS = (0.0, 4500.0)
RATING_TOL = 0.1
_LN10_400 = math.log(10) / 400
_INVPHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class PassStats:
    n: int
    c: int
    k: int

    def __post_init__(self):
        if not 0 <= self.c <= self.n:
            raise ValueError(f"need 0 <= c <= n, got c={self.c}, n={self.n}")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimate of P(at least one of k draws without replacement passes)."""
    PassStats(n, c, k)
    if c == 0:
        return 0.0
    if n - c < k:
        return 1.0
    if k == 1:
        return c / n
    return 1.0 - math.exp(_log_comb(n - c, k) - _log_comb(n, k))


def win_prob(r_a: float, r_b: float) -> float:
    """Probability that a player rated `r_a` finishes above one rated `r_b`."""
    return 1.0 / (1.0 + 10.0 ** ((r_b - r_a) / 400.0))


def rank_of_model(contest: ContestRecord, model_score: float | None = None) -> int:
    """Competition ranking: 1 + number of humans with a strictly higher total."""
    if model_score is None:
        model_score = model_contest_score(contest)
    return 1 + sum(1 for p in contest.participants if p.score > model_score)


def _outcomes(contest: ContestRecord):
    """Human ratings and +1/-1 for model ahead/behind; ties are dropped."""
    score = model_contest_score(contest)
    ratings, signs = [], []
    for p in contest.participants:
        if p.score == score:
            continue
        ratings.append(p.rating)
        signs.append(1.0 if score > p.score else -1.0)
    return np.asarray(ratings, dtype=float), np.asarray(signs, dtype=float), len(contest.participants)


def log_likelihood_fn(contests: Sequence[ContestRecord]) -> Callable[[float], float]:
    """Per-contest-averaged log-likelihood of the observed ranks as a function of rating."""
    data = [_outcomes(c) for c in contests]

    def ll(rating: float) -> float:
        total = 0.0
        for ratings, signs, size in data:
            if size == 0:
                continue
            # log win_prob(model, h) = -log(1 + 10^((h - R)/400)); sign flips for a loss
            x = signs * (ratings - rating) * _LN10_400
            total += -np.logaddexp(0.0, x).sum() / size
        return float(total)

    return ll


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = RATING_TOL) -> float:
    """Maximizer of a unimodal `f` on [lo, hi] to within `tol`, endpoints included."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = (a + b) / 2
    # the interior search cannot land exactly on a bound
    best = max((f(x), x), (f(lo), lo), (f(hi), hi))
    return best[1]


def estimate_rating(contests: Sequence[ContestRecord], bounds=RATING_BOUNDS,
                    tol: float = RATING_TOL) -> float:
    contests = list(contests)
    if not contests:
        raise ValueError("need at least one contest")
    if not any(len(c.participants) >= 2 for c in contests):
        raise ValueError("need a contest with at least two participants")
    return golden_section_max(log_likelihood_fn(contests), bounds[0], bounds[1], tol)


def percentile(rating: float, leaderboard: Sequence[float]) -> float:
    if not leaderboard:
        raise ValueError("leaderboard is empty")
    return 100.0 * sum(1 for r in leaderboard if r < rating) / len(leaderboard)


def display_percentile(p: float) -> str:
    return f"{min(p, 99.9):.1f}"


def contest_solve_rate(contest: ContestRecord) -> float:
    pids = contest.problem_ids or tuple(contest.model.problems)
    if not pids:
        return 0.0
    solved = sum(1 for pid in pids
                 if pid in contest.model.problems and contest.model.problems[pid].solved)
    return solved / len(pids)


def percentile_and_solve_rate(rating: float, leaderboard: Sequence[float],
                              contests: Sequence[ContestRecord]) -> tuple[float, float]:
    """Leaderboard percentile and the model's solve rate averaged over contests."""
    pct = percentile(rating, leaderboard)
    rate = float(np.mean([contest_solve_rate(c) for c in contests])) if contests else 0.0
    return pct, rate


def human_solve_rates(contests: Sequence[ContestRecord], min_contests: int = 8) -> dict:
    """handle -> (rating, mean per-contest solve rate) for humans in >= min_contests."""
    seen: dict[str, list] = {}
    rating: dict[str, float] = {}
    for c in contests:
        pids = c.problem_ids
        if not pids:
            continue
        for p in c.participants:
            rate = sum(1 for pid in pids if pid in p.problems and p.problems[pid].solved) / len(pids)
            seen.setdefault(p.handle, []).append(rate)
            rating[p.handle] = p.rating
    return {h: (rating[h], float(np.mean(r))) for h, r in seen.items() if len(r) >= min_contests}
