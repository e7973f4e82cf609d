"""Readers and writers for problem directories and standings files.

Problem directory layout::

    manifest.json
    statement.md
    tests/<subtask>/<case>.in
    tests/<subtask>/<case>.ans
    public/<case>.in, public/<case>.ans     (optional)
    checker/checker.cpp                     (optional)

``manifest.json``::

    {"id": "tree", "contest_id": "ioi2024",
     "limits": {"time_ms": 1000, "memory_mib": 256},
     "checker": "checker/checker.cpp",
     "subtasks": [{"id": "s1", "points": 10, "constraints": "N <= 10",
                   "supersets": [], "tests": "tests/s1"}],
     "public_tests": [{"input": "public/1.in", "output": "public/1.ans",
                       "subtasks": ["s1"]}]}

``tests`` may also be an explicit list of ``{"input": ..., "output": ...}``
entries. Test ordering is the sorted case-file order.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .domain import (ContestRecord, Limits, ModelResult, Participant, ProblemError,
                     ProblemResult, ProblemSpec, Subtask, TestCase)


def _read_tests(root: Path, spec, checker: str | None) -> tuple[TestCase, ...]:
    if spec is None:
        return ()
    if isinstance(spec, str):
        folder = root / spec
        if not folder.is_dir():
            raise ProblemError(f"test directory {folder} does not exist")
        tests = []
        for inp in sorted(folder.glob("*.in")):
            ans = inp.with_suffix(".ans")
            if ans.exists():
                tests.append(TestCase(inp.read_bytes(), expected_output=ans.read_bytes()))
            elif checker:
                tests.append(TestCase(inp.read_bytes(), checker=checker))
            else:
                raise ProblemError(f"{inp} has no .ans file and the problem has no checker")
        return tuple(tests)
    tests = []
    for entry in spec:
        inp = (root / entry["input"]).read_bytes()
        subtasks = tuple(entry.get("subtasks", ()))
        if "output" in entry:
            tests.append(TestCase(inp, expected_output=(root / entry["output"]).read_bytes(),
                                  subtasks=subtasks))
        else:
            tests.append(TestCase(inp, checker=entry.get("checker", checker), subtasks=subtasks))
    return tuple(tests)


def load_problem(path) -> ProblemSpec:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ProblemError(f"{root} has no manifest.json")
    m = json.loads(manifest_path.read_text())
    statement_file = root / m.get("statement", "statement.md")
    statement = statement_file.read_text() if statement_file.exists() else ""
    checker = m.get("checker")
    checker_source = (root / checker).read_text() if checker else None
    subtasks = []
    for s in m["subtasks"]:
        subtasks.append(Subtask(
            id=str(s["id"]),
            points=float(s["points"]),
            constraints_text=s.get("constraints", ""),
            tests=_read_tests(root, s.get("tests"), checker),
            supersets=frozenset(str(x) for x in s.get("supersets", ())),
        ))
    lim = m.get("limits", {})
    return ProblemSpec(
        id=str(m["id"]),
        statement=statement,
        subtasks=tuple(subtasks),
        limits=Limits(int(lim.get("time_ms", 1000)), int(lim.get("memory_mib", 256))),
        public_tests=_read_tests(root, m.get("public_tests"), checker),
        contest_id=str(m.get("contest_id", "")),
        checker_source=checker_source,
    )


def write_problem(problem: ProblemSpec, path) -> Path:
    """Inverse of load_problem; used to build fixtures."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    (root / "statement.md").write_text(problem.statement)
    manifest = {
        "id": problem.id,
        "contest_id": problem.contest_id,
        "limits": {"time_ms": problem.limits.time_ms, "memory_mib": problem.limits.memory_mib},
        "subtasks": [],
    }
    if problem.checker_source is not None:
        (root / "checker").mkdir(exist_ok=True)
        (root / "checker" / "checker.cpp").write_text(problem.checker_source)
        manifest["checker"] = "checker/checker.cpp"
    for s in problem.subtasks:
        folder = root / "tests" / s.id
        folder.mkdir(parents=True, exist_ok=True)
        for i, t in enumerate(s.tests):
            (folder / f"{i:03d}.in").write_bytes(t.input)
            if t.expected_output is not None:
                (folder / f"{i:03d}.ans").write_bytes(t.expected_output)
        manifest["subtasks"].append({
            "id": s.id, "points": s.points, "constraints": s.constraints_text,
            "supersets": sorted(s.supersets), "tests": f"tests/{s.id}",
        })
    public = []
    if problem.public_tests:
        (root / "public").mkdir(exist_ok=True)
    for i, t in enumerate(problem.public_tests):
        (root / "public" / f"{i:03d}.in").write_bytes(t.input)
        entry = {"input": f"public/{i:03d}.in", "subtasks": list(t.subtasks)}
        if t.expected_output is not None:
            (root / "public" / f"{i:03d}.ans").write_bytes(t.expected_output)
            entry["output"] = f"public/{i:03d}.ans"
        public.append(entry)
    manifest["public_tests"] = public
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return root


# --- standings ------------------------------------------------------------

def _flag(value: str) -> bool:
    return value.strip().lower() in ("1", "true", "yes", "y")


def load_standings(path, contest_id: str | None = None) -> ContestRecord:
    """Read a standings CSV.

    Columns: ``handle, rating, score`` then, per problem ``P``,
    ``P_solved, P_failed, P_score``. A row with handle ``@model`` (optional)
    carries the model's own per-problem results.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = {"handle", "rating", "score"} - set(cols)
        if missing:
            raise ProblemError(f"{path}: standings missing columns {sorted(missing)}")
        problem_ids = [c[: -len("_solved")] for c in cols if c.endswith("_solved")]
        participants = []
        model = ModelResult()
        for row in reader:
            results = {}
            for pid in problem_ids:
                results[pid] = ProblemResult(
                    solved=_flag(row[f"{pid}_solved"]),
                    failed_attempts=int(row.get(f"{pid}_failed") or 0),
                    score=float(row.get(f"{pid}_score") or 0),
                )
            if row["handle"] == "@model":
                model = ModelResult(problems=results)
                continue
            participants.append(Participant(row["handle"], float(row["rating"]),
                                            float(row["score"]), results))
    return ContestRecord(contest_id or path.stem, tuple(participants), model, tuple(problem_ids))


def write_standings(record: ContestRecord, path) -> Path:
    path = Path(path)
    pids = list(record.problem_ids)
    header = ["handle", "rating", "score"]
    for pid in pids:
        header += [f"{pid}_solved", f"{pid}_failed", f"{pid}_score"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for p in record.participants:
            row = [p.handle, p.rating, p.score]
            for pid in pids:
                r = p.problems.get(pid, ProblemResult(False))
                row += [int(r.solved), r.failed_attempts, r.score]
            w.writerow(row)
    return path


def load_leaderboard(path) -> list[float]:
    with open(path, newline="") as fh:
        return [float(row["rating"]) for row in csv.DictReader(fh)]
