"""Problems, subtasks, tests, and the IOI / CodeForces scoring rules."""

from __future__ import annotations

import re
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

# Hard caps that no problem manifest may exceed.
MAX_TIME_MS = 60_000
MAX_MEMORY_MIB = 4096


class ProblemError(ValueError):
    """A problem manifest or a scoring request is inconsistent."""


class ImputationError(ValueError):
    """No human solved the problem, so a model score cannot be imputed."""


@dataclass(frozen=True)
class Limits:
    time_ms: int
    memory_mib: int

    def __post_init__(self):
        if self.time_ms <= 0 or self.memory_mib <= 0:
            raise ProblemError(f"limits must be positive: {self}")
        if self.time_ms > MAX_TIME_MS or self.memory_mib > MAX_MEMORY_MIB:
            raise ProblemError(f"limits exceed hard caps ({MAX_TIME_MS} ms, {MAX_MEMORY_MIB} MiB): {self}")


@dataclass(frozen=True)
class TestCase:
    input: bytes
    expected_output: bytes | None = None
    checker: str | None = None
    # Public tests may be restricted to the subtasks whose constraints they satisfy.
    subtasks: tuple[str, ...] = ()

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if (self.expected_output is None) == (self.checker is None):
            raise ProblemError("a judged test needs exactly one of expected_output or checker")


@dataclass(frozen=True)
class Subtask:
    id: str
    points: float
    constraints_text: str = ""
    tests: tuple[TestCase, ...] = ()
    supersets: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.points < 0:
            raise ProblemError(f"subtask {self.id!r} has negative points")
        if self.id in self.supersets:
            raise ProblemError(f"subtask {self.id!r} cannot strictly contain itself")


@dataclass(frozen=True)
class ProblemSpec:
    id: str
    statement: str
    subtasks: tuple[Subtask, ...]
    limits: Limits
    public_tests: tuple[TestCase, ...] = ()
    contest_id: str = ""
    checker_source: str | None = None

    def __post_init__(self):
        if not self.subtasks:
            raise ProblemError(f"problem {self.id!r} has no subtasks")
        ids = [s.id for s in self.subtasks]
        if len(set(ids)) != len(ids):
            raise ProblemError(f"problem {self.id!r} has duplicate subtask ids")
        known = set(ids)
        for s in self.subtasks:
            unknown = s.supersets - known
            if unknown:
                raise ProblemError(f"subtask {s.id!r} contains unknown subtasks {sorted(unknown)}")
        # acyclicity: contained_in() raises on a cycle
        for s in self.subtasks:
            self.contained_in(s.id)

    @property
    def total_points(self) -> float:
        return sum(s.points for s in self.subtasks)

    def subtask(self, subtask_id: str) -> Subtask:
        for s in self.subtasks:
            if s.id == subtask_id:
                return s
        raise ProblemError(f"unknown subtask {subtask_id!r} in problem {self.id!r}")

    def contained_in(self, subtask_id: str) -> frozenset[str]:
        """Transitive closure of the subtasks strictly contained in `subtask_id`."""
        by_id = {s.id: s for s in self.subtasks}
        seen: set[str] = set()
        stack = [(subtask_id, (subtask_id,))]
        while stack:
            sid, path = stack.pop()
            for child in by_id[sid].supersets:
                if child in path:
                    raise ProblemError(f"superset relation has a cycle through {child!r}")
                if child not in seen:
                    seen.add(child)
                stack.append((child, path + (child,)))
        return frozenset(seen)

    def superset_depth(self, subtask_id: str) -> int:
        """Length of the longest chain of strictly contained subtasks below `subtask_id`."""
        by_id = {s.id: s for s in self.subtasks}

        def depth(sid):
            children = by_id[sid].supersets
            return 0 if not children else 1 + max(depth(c) for c in children)

        return depth(subtask_id)


@dataclass(frozen=True)
class SubmissionOutcome:
    problem_id: str
    per_subtask_score: Mapping[str, float]
    submission_index: int = 0


def ioi_total_score(outcomes: Iterable[SubmissionOutcome],
                    problems: Mapping[str, ProblemSpec] | Sequence[ProblemSpec] | None = None) -> float:
    """Sum over problems and subtasks of the best score any submission got.

    When `problems` is given, every subtask id is checked and per-subtask scores
    must lie in ``[0, points]``.
    """
    if problems is not None and not isinstance(problems, Mapping):
        problems = {p.id: p for p in problems}
    best: dict[tuple[str, str], float] = {}
    for out in outcomes:
        if problems is not None:
            if out.problem_id not in problems:
                raise ProblemError(f"unknown problem {out.problem_id!r}")
            prob = problems[out.problem_id]
        for sid, score in out.per_subtask_score.items():
            if problems is not None:
                pts = prob.subtask(sid).points
                if not 0 <= score <= pts:
                    raise ProblemError(f"score {score} for subtask {sid!r} outside [0, {pts}]")
            key = (out.problem_id, sid)
            if score > best.get(key, 0.0):
                best[key] = score
    return float(sum(best.values()))


def build_subtask_document(problem: ProblemSpec, subtask_id: str) -> str:
    """Statement with every other subtask's constraint text removed.

    A constraint text occupying whole lines (optionally behind a list marker)
    is removed together with those lines; otherwise the bare text is cut out.
    Occurrences of the target's own constraint text are never touched.
    """
    target = problem.subtask(subtask_id)
    keep = target.constraints_text.strip()
    doc = problem.statement
    if keep:
        doc, n = _line_pattern(keep, prefix_group=True).subn(lambda m: m.group(1) + _SHIELD, doc)
        if not n:
            doc = doc.replace(keep, _SHIELD)
    for s in problem.subtasks:
        text = s.constraints_text.strip()
        if s.id == subtask_id or not text or text == keep:
            continue
        doc = _remove_constraint(doc, text)
    return doc.replace(_SHIELD, keep) if keep else doc


_MARKER = r"[ \t]*(?:[-*+]|\d+[.)])?[ \t]*"
_SHIELD = "\x00keep\x00"


def _line_pattern(text: str, prefix_group: bool = False) -> re.Pattern:
    if prefix_group:
        return re.compile(r"(?m)^(" + _MARKER + ")" + re.escape(text) + r"(?=[ \t]*(?:\n|\Z))")
    return re.compile(r"(?m)^" + _MARKER + re.escape(text) + r"[ \t]*(?:\n|\Z)")


def _remove_constraint(doc: str, text: str) -> str:
    doc, count = _line_pattern(text).subn("", doc)
    if count:
        return doc
    return doc.replace(text, "")


# --- CodeForces side ---------------------------------------------------------

@dataclass(frozen=True)
class ProblemResult:
    solved: bool
    failed_attempts: int = 0
    score: float = 0.0


@dataclass(frozen=True)
class Participant:
    handle: str
    rating: float
    score: float
    problems: Mapping[str, ProblemResult] = field(default_factory=dict)


@dataclass(frozen=True)
class ModelResult:
    problems: Mapping[str, ProblemResult] = field(default_factory=dict)
    score: float | None = None


@dataclass(frozen=True)
class ContestRecord:
    contest_id: str
    participants: tuple[Participant, ...]
    model: ModelResult = ModelResult()
    problem_ids: tuple[str, ...] = ()

    def __post_init__(self):
        for p in self.participants:
            if p.rating != p.rating or p.rating in (float("inf"), float("-inf")):
                raise ProblemError(f"participant {p.handle!r} has a non-finite rating")
            if p.score < 0:
                raise ProblemError(f"participant {p.handle!r} has a negative score")


def median(values: Sequence[float]) -> float:
    # statistics.median already averages the middle pair for even lengths
    return float(statistics.median(values))


def cf_problem_score(problem_id: str, standings: ContestRecord, failed_attempts: int) -> float:
    """Score a model earns on a solved problem, imputed from human solvers.

    Median over humans who solved it with the same number of failed attempts;
    if nobody matches that count, the median over all solvers.
    """
    solvers = [p.problems[problem_id] for p in standings.participants
               if problem_id in p.problems and p.problems[problem_id].solved]
    if not solvers:
        raise ImputationError(f"no human solved {problem_id!r} in contest {standings.contest_id!r}")
    same = [r.score for r in solvers if r.failed_attempts == failed_attempts]
    return median(same if same else [r.score for r in solvers])


def model_contest_score(standings: ContestRecord) -> float:
    """Model total: imputed scores summed over the problems it solved."""
    if standings.model.score is not None:
        return standings.model.score
    return sum(cf_problem_score(pid, standings, r.failed_attempts)
               for pid, r in standings.model.problems.items() if r.solved)
