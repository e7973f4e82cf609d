"""Fixture builders shared by several test modules."""

from pathlib import Path

import numpy as np

import guests
from cpharness.config import Config, ModelConfig, SandboxConfig, render_prompt
from cpharness.domain import (ContestRecord, Limits, ModelResult, Participant, ProblemSpec,
                              Subtask, TestCase, build_subtask_document)
from cpharness.loaders import write_problem
from cpharness.models import MockModelClient
from cpharness.rank import Candidate
from cpharness.submit import JudgedProblem, SubtaskPool

TRI_STATEMENT = """# Triangle sums

Given an integer N, print 1 + 2 + ... + N modulo 1000000007.

## Input

A single integer N.

## Subtasks

- 1 <= N <= 10
- 1 <= N <= 1000
- 1 <= N <= 10^18
"""

TRI_BOUNDS = {"s1": ("10", "1 <= N <= 10"), "s2": ("1000", "1 <= N <= 1000"),
              "s3": ("1000000000000000000", "1 <= N <= 10^18")}
TRI_HIDDEN = {"s1": [1, 5, 10], "s2": [999, 1000, 500],
              "s3": [10**18, 123456789012345678, 3_000_000_019]}
TRI_POINTS = {"s1": 10, "s2": 30, "s3": 60}

# candidate pool sampled for every subtask, in sample order
TRI_POOL = [guests.TRI_OVERFLOW, guests.TRI_CORRECT, guests.TRI_NAIVE, guests.TRI_WRONG,
            guests.TRI_BROKEN, guests.TRI_CORRECT_ALT]


def tri_problem() -> ProblemSpec:
    subtasks = []
    chain = {"s1": frozenset(), "s2": frozenset({"s1"}), "s3": frozenset({"s2"})}
    for sid in ("s1", "s2", "s3"):
        tests = tuple(TestCase(f"{n}\n".encode(), expected_output=f"{guests.tri(n)}\n".encode())
                      for n in TRI_HIDDEN[sid])
        subtasks.append(Subtask(sid, TRI_POINTS[sid], TRI_BOUNDS[sid][1], tests, chain[sid]))
    return ProblemSpec("tri", TRI_STATEMENT, tuple(subtasks), Limits(1000, 256),
                       public_tests=(TestCase(b"3\n", expected_output=b"6\n"),),
                       contest_id="fixture")


def build_tri_fixture(root: Path, cache_dir: Path, seed: int = 0, pool=None):
    """Problem directory, config and mock fixtures for the end-to-end pipeline."""
    root = Path(root)
    problem = tri_problem()
    problem_dir = write_problem(problem, root / "problem")
    cfg = Config(seed=seed, budget=50, pool_size=8, num_generators=2, num_validators=3,
                 inputs_target=12,
                 sandbox=SandboxConfig(cache_dir=str(cache_dir)),
                 model=ModelConfig(kind="mock", fixtures=str(root / "mock")))
    mock = MockModelClient(root / "mock")
    pool = TRI_POOL if pool is None else pool
    for sid in ("s1", "s2", "s3"):
        doc = build_subtask_document(problem, sid)
        maxn = TRI_BOUNDS[sid][0]
        mock.record(render_prompt("solution", doc, cfg),
                    [(guests.fenced(src), 1000 + 10 * i) for i, src in enumerate(pool)])
        mock.record(render_prompt("generator", doc, cfg),
                    [guests.fenced(guests.tri_generator(maxn)), guests.fenced(guests.TRI_BROKEN)])
        mock.record(render_prompt("validator", doc, cfg),
                    [guests.fenced(guests.tri_validator(maxn)), guests.fenced(guests.VAL_ACCEPT),
                     guests.fenced(guests.tri_validator(maxn))])
    return problem_dir, cfg


# --- synthetic judged pools ---------------------------------------------------

def random_judged_problem(rng: np.random.Generator, n_subtasks=None, pool_size=None,
                          alphabet=3) -> JudgedProblem:
    """Random problem with a containment chain and consistent judgments.

    Each candidate has a latent skill level; it fully solves the first `level`
    subtasks of the chain. Signatures agree with the reference on a subtask
    iff the candidate solves it.
    """
    k = n_subtasks or int(rng.integers(1, 5))
    ids = [f"t{i}" for i in range(k)]
    points = [float(rng.integers(1, 6) * 10) for _ in ids]
    subtasks = tuple(Subtask(sid, p, supersets=frozenset({ids[i - 1]}) if i else frozenset())
                     for i, (sid, p) in enumerate(zip(ids, points)))
    problem = ProblemSpec("rand", "", subtasks, Limits(1000, 256))
    m = pool_size or int(rng.integers(2, 30))
    n_inputs = 4
    pools, judgments, levels = {}, {}, {}
    for sid in ids:
        cands = []
        for j in range(m):
            cid = f"{sid}/{j}"
            level = int(rng.integers(0, k + 1))
            levels[cid] = level
            judgments[cid] = {t: (points[i] if i < level else 0.0) for i, t in enumerate(ids)}
            if ids.index(sid) < level:
                sig = tuple(["ref"] * n_inputs)
            else:
                sig = tuple(f"v{rng.integers(0, alphabet)}" for _ in range(n_inputs))
            cands.append(Candidate(cid, j, sid, int(rng.integers(0, 1000)),
                                   float(rng.random()), float(rng.random() * 0.5),
                                   float(rng.random() * 0.5), sig))
        pools[sid] = SubtaskPool(sid, cands)
    wrong = {cid: f"w{rng.integers(0, 2)}" for cid in levels}
    probes = {}
    for i, sid in enumerate(ids):
        probes[sid] = {}
        for cid, level in levels.items():
            probes[sid][cid] = ("ref",) * n_inputs if i < level else (wrong[cid],) * n_inputs
    return JudgedProblem(problem, pools, judgments, probes)


def rigged_judged_problem(bad_size=60, good_size=5) -> JudgedProblem:
    """One subtask; a large, confidently scored wrong cluster hides a correct one."""
    problem = ProblemSpec("rigged", "", (Subtask("only", 100.0),), Limits(1000, 256))
    cands, judgments = [], {}
    for j in range(bad_size):
        cid = f"only/{j}"
        cands.append(Candidate(cid, j, "only", 0, 1.0, 0.0, 0.0, ("bad",)))
        judgments[cid] = {"only": 0.0}
    for j in range(bad_size, bad_size + good_size):
        cid = f"only/{j}"
        cands.append(Candidate(cid, j, "only", 0, 0.5, 0.0, 0.0, ("good",)))
        judgments[cid] = {"only": 100.0}
    return JudgedProblem(problem, {"only": SubtaskPool("only", cands)}, judgments, {})


# --- synthetic contests --------------------------------------------------------

def synthetic_contests(true_rating: float, n_contests: int, n_participants: int,
                       rng: np.random.Generator, center=1500.0, spread=500.0) -> list[ContestRecord]:
    """Contests whose model-vs-human outcomes are drawn from the win probability."""
    out = []
    for ci in range(n_contests):
        ratings = np.clip(rng.normal(center, spread, n_participants), 0, 4500)
        p_model = 1.0 / (1.0 + 10.0 ** ((ratings - true_rating) / 400.0))
        beats = rng.random(n_participants) < p_model
        people = tuple(Participant(f"h{ci}_{i}", float(r), 0.0 if b else 2.0)
                       for i, (r, b) in enumerate(zip(ratings, beats)))
        out.append(ContestRecord(f"c{ci}", people, ModelResult({}, 1.0)))
    return out


def symmetric_contest(center=1500.0, half=50, step=20.0) -> ContestRecord:
    """Model beats exactly the lower half of humans rated symmetrically around `center`."""
    people = []
    for i in range(half):
        off = step * (i + 1)
        people.append(Participant(f"lo{i}", center - off, 0.0))
        people.append(Participant(f"hi{i}", center + off, 2.0))
    return ContestRecord("sym", tuple(people), ModelResult({}, 1.0))
