"""CodeForces contest simulation and rating estimation commands.

Contest directory: ``contest.json`` of the form::

    {"id": "1909",
     "problems": [{"id": "F1", "rating": 2200, "judgments": "judgments/F1.txt",
                   "ranked": false}]}

A judgments file lists one sample per line, ``1`` for a sample passing the
full tests and ``0`` otherwise. With ``"ranked": true`` the file order is the
submission order; otherwise samples are drawn uniformly without replacement.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import derive_seed
from .domain import ContestRecord, ImputationError, ModelResult, ProblemError, ProblemResult, cf_problem_score
from .loaders import load_leaderboard, load_standings
from .rating import (display_percentile, estimate_rating, log_likelihood_fn, pass_at_k,
                     percentile_and_solve_rate, rank_of_model)

log = logging.getLogger(__name__)

TABLE_COLUMNS = ["problem", "problem_rating", "pass@1", "pass@k", "failed_submissions", "solved"]


def _read_judgments(root: Path, spec) -> list[bool]:
    if isinstance(spec, str):
        lines = (root / spec).read_text().split()
        return [x.strip() == "1" for x in lines]
    return [bool(x) for x in spec]


def submit_k(judgments: list[bool], k: int, ranked: bool, rng: np.random.Generator):
    """Submit up to k samples; returns (solved, failed submissions before the first pass)."""
    order = range(len(judgments)) if ranked else rng.permutation(len(judgments))
    failed = 0
    for idx in list(order)[:k]:
        if judgments[idx]:
            return True, failed
        failed += 1
    return False, failed


def simulate_contest(contest_dir, standings: ContestRecord, n: int | None = None, k: int = 10,
                     seed: int = 0) -> dict:
    root = Path(contest_dir)
    spec = json.loads((root / "contest.json").read_text())
    cid = str(spec["id"])
    rows, results = [], {}
    total = 0.0
    for prob in spec["problems"]:
        pid = str(prob["id"])
        judgments = _read_judgments(root, prob["judgments"])
        use = len(judgments) if n is None else n
        if use > len(judgments):
            raise ProblemError(f"{cid} {pid}: {use} samples requested, {len(judgments)} available")
        judgments = judgments[:use]
        c = sum(judgments)
        rng = np.random.default_rng(derive_seed(seed, f"contest:{cid}:{pid}"))
        kk = min(k, use)
        solved, failed = submit_k(judgments, kk, bool(prob.get("ranked", False)), rng)
        score = 0.0
        note = ""
        if solved:
            try:
                score = cf_problem_score(pid, standings, failed)
            except ImputationError as e:
                warnings.warn(str(e), stacklevel=2)
                note = "unimputable"
        total += score
        results[pid] = ProblemResult(solved, failed, score)
        rows.append({
            "problem": f"{cid} {pid}",
            "problem_rating": prob.get("rating"),
            "pass@1": f"{c} / {use}",
            "pass@k": round(pass_at_k(use, c, kk), 2) if use else 0.0,
            "failed_submissions": failed if solved else kk,
            "solved": "solved" if solved else "not solved",
            "score": score,
            "note": note,
        })
    record = replace(standings, contest_id=cid, model=ModelResult(results, total))
    return {
        "contest_id": cid,
        "k": k,
        "seed": seed,
        "total": total,
        "rank": rank_of_model(record),
        "participants": len(standings.participants),
        "rows": rows,
        "model_problems": {pid: {"solved": r.solved, "failed_attempts": r.failed_attempts,
                                 "score": r.score} for pid, r in results.items()},
    }


def write_table(rows, path: Path, columns=TABLE_COLUMNS):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", delimiter="\t")
        w.writeheader()
        w.writerows(rows)


def cmd_simulate_contest(contest_dir, standings_csv, n=None, k=10, seed=0, out_dir=None,
                         figures=True) -> dict:
    if standings_csv is None or not Path(standings_csv).exists():
        raise FileNotFoundError(f"standings file {standings_csv!r} not found")
    standings = load_standings(standings_csv)
    report = simulate_contest(contest_dir, standings, n, k, seed)
    report["standings"] = str(Path(standings_csv).resolve())
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
        write_table(report["rows"], out / "table.tsv")
        if figures:
            from .plotting import plot_pass_at_k

            plot_pass_at_k(report["rows"], out / "pass_at_k.png", title=f"Contest {report['contest_id']}")
    return report


def record_from_report(report: dict, standings: ContestRecord | None = None) -> ContestRecord:
    standings = standings or load_standings(report["standings"])
    problems = {pid: ProblemResult(d["solved"], d["failed_attempts"], d["score"])
                for pid, d in report.get("model_problems", {}).items()}
    pids = standings.problem_ids or tuple(problems)
    return replace(standings, contest_id=report["contest_id"],
                   model=ModelResult(problems, float(report["total"])), problem_ids=pids)


def cmd_rate(report_paths, leaderboard_csv=None, out_dir=None, figures=True) -> dict:
    reports = [json.loads(Path(p).read_text()) for p in report_paths]
    if not reports:
        raise ValueError("rate needs at least one contest report")
    records = [record_from_report(r) for r in reports]
    rating = estimate_rating(records)
    result = {
        "rating": rating,
        "contests": [{"contest_id": rec.contest_id, "rank": rank_of_model(rec),
                      "participants": len(rec.participants)} for rec in records],
    }
    leaderboard = load_leaderboard(leaderboard_csv) if leaderboard_csv else []
    if leaderboard:
        pct, rate = percentile_and_solve_rate(rating, leaderboard, records)
        result["percentile"] = pct
        result["percentile_display"] = display_percentile(pct)
        result["solve_rate"] = rate
    else:
        warnings.warn("no leaderboard given; percentile omitted", stacklevel=2)
        _, rate = percentile_and_solve_rate(rating, [0.0], records)
        result["solve_rate"] = rate
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "rating.json").write_text(json.dumps(result, indent=1, sort_keys=True) + "\n")
        if figures:
            from .plotting import plot_likelihood

            plot_likelihood(log_likelihood_fn(records), rating, out / "likelihood.png")
    return result
