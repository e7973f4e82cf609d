import json
import warnings

import numpy as np
import pytest

import helpers
from cpharness.contest import cmd_rate, cmd_simulate_contest, simulate_contest, submit_k
from cpharness.domain import ContestRecord, Participant, ProblemResult
from cpharness.loaders import load_standings, write_standings


def standings_record(n_humans=20, solved_by=None):
    """Humans h0..h{n-1}; problem F1 solved by the first `solved_by` with score 1000 + 10*i."""
    solved_by = n_humans // 2 if solved_by is None else solved_by
    people = []
    for i in range(n_humans):
        solved = i < solved_by
        score = 1000 + 10 * i if solved else 0.0
        people.append(Participant(f"h{i}", 1200.0 + 20 * i, score + 1.0,
                                  {"F1": ProblemResult(solved, 0, score),
                                   "H": ProblemResult(False)}))
    return ContestRecord("1909", tuple(people), problem_ids=("F1", "H"))


def make_contest(tmp_path, problems, n_humans=20, solved_by=None):
    root = tmp_path / "contest"
    (root / "judgments").mkdir(parents=True)
    entries = []
    for pid, flags, ranked in problems:
        (root / "judgments" / f"{pid}.txt").write_text("\n".join("1" if f else "0" for f in flags))
        entries.append({"id": pid, "rating": 2200, "judgments": f"judgments/{pid}.txt",
                        "ranked": ranked})
    (root / "contest.json").write_text(json.dumps({"id": "1909", "problems": entries}))
    csv_path = write_standings(standings_record(n_humans, solved_by), tmp_path / "standings.csv")
    return root, csv_path


def judgments(n, c, rng):
    flags = np.zeros(n, bool)
    flags[rng.choice(n, c, replace=False)] = True
    return flags.tolist()


class TestSimulateContest:
    def test_table_cell_1909_f1(self, tmp_path):
        rng = np.random.default_rng(0)
        root, csv_path = make_contest(tmp_path, [("F1", judgments(1162, 57, rng), False),
                                                 ("H", [False] * 1162, False)])
        rep = cmd_simulate_contest(root, csv_path, n=1162, k=10, out_dir=tmp_path / "out")
        f1 = rep["rows"][0]
        assert f1["pass@1"] == "57 / 1162" and f1["pass@k"] == 0.40
        assert (tmp_path / "out" / "table.tsv").exists()
        assert (tmp_path / "out" / "pass_at_k.png").stat().st_size > 0

    def test_k1_monte_carlo(self, tmp_path):
        rng = np.random.default_rng(1)
        flags = judgments(40, 13, rng)
        root, csv_path = make_contest(tmp_path, [("F1", flags, False)])
        standings = load_standings(csv_path)
        hits = sum(simulate_contest(root, standings, k=1, seed=s)["rows"][0]["solved"] == "solved"
                   for s in range(600))
        assert hits / 600 == pytest.approx(13 / 40, abs=0.06)

    def test_ranked_order(self):
        assert submit_k([False, False, True], 10, True, np.random.default_rng()) == (True, 2)
        assert submit_k([False, False, True], 2, True, np.random.default_rng()) == (False, 2)

    def test_zero_solved_is_last(self, tmp_path):
        root, csv_path = make_contest(tmp_path, [("F1", [False] * 50, False)])
        rep = cmd_simulate_contest(root, csv_path, k=10)
        assert rep["total"] == 0.0
        assert rep["rank"] == rep["participants"] + 1

    def test_imputed_score(self, tmp_path):
        root, csv_path = make_contest(tmp_path, [("F1", [True] * 5, True)], n_humans=5, solved_by=3)
        rep = cmd_simulate_contest(root, csv_path, k=10)
        # solvers with 0 failures scored 1000, 1010, 1020
        assert rep["total"] == 1010.0

    def test_unimputable_warns(self, tmp_path):
        root, csv_path = make_contest(tmp_path, [("H", [True] * 5, True)])
        with pytest.warns(UserWarning):
            rep = cmd_simulate_contest(root, csv_path)
        assert rep["rows"][0]["note"] == "unimputable"

    def test_missing_standings(self, tmp_path):
        root, _ = make_contest(tmp_path, [("F1", [True], False)])
        with pytest.raises(FileNotFoundError):
            cmd_simulate_contest(root, tmp_path / "nope.csv")

    def test_seeded(self, tmp_path):
        rng = np.random.default_rng(2)
        root, csv_path = make_contest(tmp_path, [("F1", judgments(100, 10, rng), False)])
        assert cmd_simulate_contest(root, csv_path, seed=3) == cmd_simulate_contest(root, csv_path, seed=3)


def write_report(tmp_path, contest, name):
    csv_path = write_standings(contest, tmp_path / f"{name}.csv")
    rep = {"contest_id": contest.contest_id, "total": contest.model.score,
           "standings": str(csv_path), "model_problems": {}}
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(rep))
    return path


class TestRate:
    def test_symmetric_without_leaderboard(self, tmp_path):
        path = write_report(tmp_path, helpers.symmetric_contest(), "sym")
        with pytest.warns(UserWarning, match="percentile"):
            res = cmd_rate([path], out_dir=tmp_path / "out")
        assert res["rating"] == pytest.approx(1500, abs=1)
        assert "percentile" not in res
        assert (tmp_path / "out" / "likelihood.png").exists()

    def test_synthetic_2724(self, tmp_path):
        contests = helpers.synthetic_contests(2724, 12, 500, np.random.default_rng(11))
        paths = [write_report(tmp_path, c, f"c{i}") for i, c in enumerate(contests)]
        board = tmp_path / "board.csv"
        # 80 entries at or below 2600 and 20 above 2800, so any estimate within 50 gives 80
        ratings = [1000 + 20 * i for i in range(81)][1:] + [2800 + 10 * i for i in range(1, 21)]
        board.write_text("handle,rating\n" + "".join(f"u{i},{r}\n" for i, r in enumerate(ratings)))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            res = cmd_rate(paths, board, figures=False)
        assert abs(res["rating"] - 2724) <= 50
        assert res["percentile_display"] == "80.0"
