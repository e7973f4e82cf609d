"""Budgeted submission simulation over clustered, scored candidate pools."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Mapping

from .cluster import Cluster, Signature, cluster_candidates
from .domain import ProblemSpec, SubmissionOutcome, ioi_total_score
from .rank import Candidate, SampleScore, ScoreWeights, rescore, score_cluster

DEFAULT_BUDGET = 50
_EPS = 1e-9

Judge = Callable[[str], Mapping[str, float]]
Probe = Callable[[str, str], Signature]


@dataclass
class SubtaskPool:
    subtask_id: str
    candidates: list[Candidate]
    clusters: list[Cluster] = field(default=None)

    def __post_init__(self):
        if self.clusters is None:
            self.clusters = cluster_candidates({c.id: c.signature for c in self.candidates})

    def to_json(self) -> dict:
        return {"subtask_id": self.subtask_id,
                "candidates": [{**asdict(c), "signature": list(c.signature)} for c in self.candidates]}

    @classmethod
    def from_json(cls, d: dict) -> "SubtaskPool":
        cands = [Candidate(**{**c, "signature": tuple(c["signature"])}) for c in d["candidates"]]
        return cls(d["subtask_id"], cands)


def order_subtasks(problem: ProblemSpec) -> list[str]:
    """Hardest first: most points, then deepest containment chain, then manifest order."""
    idx = {s.id: i for i, s in enumerate(problem.subtasks)}
    return sorted(idx, key=lambda sid: (-problem.subtask(sid).points,
                                        -problem.superset_depth(sid), idx[sid]))


def superset_filter(pool: Iterable[str], solved_signature: Signature,
                    signature_for: Callable[[str], Signature]) -> list[str]:
    """Keep the candidates whose outputs on a solved subtask's inputs match the solver's."""
    target = tuple(solved_signature)
    return [cid for cid in pool if tuple(signature_for(cid)) == target]


@dataclass
class SubmissionState:
    problem: ProblemSpec
    pools: dict[str, SubtaskPool]
    sample_scores: dict[str, SampleScore]
    budget: int = DEFAULT_BUDGET
    order: list[str] = field(default_factory=list)
    cursor: int = 0
    alive: dict[str, set] = field(default_factory=dict)
    attempts: dict[tuple, int] = field(default_factory=dict)
    best: dict[str, float] = field(default_factory=dict)
    solved: dict[str, str | None] = field(default_factory=dict)
    submitted: set = field(default_factory=set)
    used: int = 0
    outcomes: list[SubmissionOutcome] = field(default_factory=list)
    trajectory: list[dict] = field(default_factory=list)

    @classmethod
    def start(cls, problem, pools, weights: ScoreWeights, budget=DEFAULT_BUDGET):
        scores = {}
        for pool in pools.values():
            for c in pool.candidates:
                scores[c.id] = rescore(c, weights)
        st = cls(problem, dict(pools), scores, budget, order_subtasks(problem))
        for sid, pool in st.pools.items():
            st.alive[sid] = {c.id for c in pool.candidates}
        for s in problem.subtasks:
            st.best[s.id] = 0.0
            if s.points <= 0:
                st.solved[s.id] = None
        return st

    @property
    def exhausted_budget(self) -> bool:
        return self.used >= self.budget

    def total(self) -> float:
        return sum(self.best.values())


def _pick_in_subtask(state: SubmissionState, sid: str, weights: ScoreWeights):
    pool = state.pools.get(sid)
    if pool is None:
        return None
    alive = state.alive[sid]
    index = {c.id: c.sample_index for c in pool.candidates}
    best_key, best = None, None
    for cl in pool.clusters:
        members = [m for m in cl.members if m in alive]
        fresh = [m for m in members if m not in state.submitted]
        if not fresh:
            continue
        score = score_cluster(cl, state.sample_scores, state.attempts.get((sid, cl.id), 0),
                              weights, members)
        # larger cluster wins a tie, then the earliest-seen cluster
        key = (score, len(members), -min(index[m] for m in members))
        if best_key is None or key > best_key:
            best_key, best = key, (cl, fresh)
    if best is None:
        return None
    cl, fresh = best
    cand = max(fresh, key=lambda m: (state.sample_scores[m].combined, -index[m]))
    return cl, cand


def next_submission(state: SubmissionState, weights: ScoreWeights):
    """Pick the next (subtask id, candidate id, cluster id), or None when exhausted.

    Round-robin over unsolved subtasks in hardness order; increments the
    chosen cluster's attempt counter and the budget use.
    """
    if state.exhausted_budget:
        return None
    n = len(state.order)
    for step in range(n):
        sid = state.order[(state.cursor + step) % n]
        if sid in state.solved:
            continue
        picked = _pick_in_subtask(state, sid, weights)
        if picked is None:
            continue
        cl, cand = picked
        state.cursor = (state.cursor + step + 1) % n
        state.attempts[(sid, cl.id)] = state.attempts.get((sid, cl.id), 0) + 1
        state.submitted.add(cand)
        state.used += 1
        return sid, cand, cl.id
    return None


def record_result(state: SubmissionState, sid: str, cand: str, cluster_id: int,
                  scores: Mapping[str, float], probe: Probe | None):
    problem = state.problem
    clean = {}
    for s in problem.subtasks:
        v = float(scores.get(s.id, 0.0))
        clean[s.id] = min(max(v, 0.0), s.points)
    state.outcomes.append(SubmissionOutcome(problem.id, clean, len(state.outcomes)))
    newly = []
    for s in problem.subtasks:
        if clean[s.id] > state.best[s.id]:
            state.best[s.id] = clean[s.id]
        if s.id not in state.solved and state.best[s.id] >= s.points - _EPS:
            state.solved[s.id] = cand
            newly.append(s.id)
    if probe is not None:
        for solved_id in newly:
            reference = probe(solved_id, cand)
            for t in problem.subtasks:
                if t.id in state.solved or t.id not in state.alive:
                    continue
                if solved_id in problem.contained_in(t.id):
                    state.alive[t.id] = set(superset_filter(
                        sorted(state.alive[t.id]), reference,
                        lambda cid, _s=solved_id: probe(_s, cid)))
    state.trajectory.append({
        "step": len(state.trajectory),
        "subtask": sid,
        "cluster": cluster_id,
        "candidate": cand,
        "verdicts": clean,
        "newly_solved": newly,
        "cumulative": state.total(),
    })


@dataclass
class SimulationResult:
    outcomes: list[SubmissionOutcome]
    trajectory: list[dict]
    total: float


def simulate(problem: ProblemSpec, pools: Mapping[str, SubtaskPool], weights: ScoreWeights,
             judge: Judge, probe: Probe | None = None, budget: int = DEFAULT_BUDGET) -> SimulationResult:
    """Run submissions until the budget is spent or nothing is left to try.

    `judge(candidate_id)` returns per-subtask scores against the hidden tests;
    `probe(subtask_id, candidate_id)` returns the candidate's signature on that
    subtask's generated inputs and drives superset filtering.
    """
    state = SubmissionState.start(problem, pools, weights, budget)
    while True:
        pick = next_submission(state, weights)
        if pick is None:
            break
        sid, cand, cl = pick
        record_result(state, sid, cand, cl, judge(cand), probe)
    return SimulationResult(state.outcomes, state.trajectory, ioi_total_score(state.outcomes))


# --- pools with precomputed judgments ----------------------------------------

@dataclass
class JudgedProblem:
    """Pools plus every judgment the simulator could ask for; no execution needed."""

    problem: ProblemSpec
    pools: dict[str, SubtaskPool]
    judgments: dict[str, dict[str, float]]
    probes: dict[str, dict[str, Signature]] = field(default_factory=dict)

    def judge(self, cand: str) -> Mapping[str, float]:
        return self.judgments[cand]

    def probe(self, sid: str, cand: str) -> Signature:
        table = self.probes.get(sid, {})
        if cand in table:
            return table[cand]
        pool = self.pools.get(sid)
        if pool is not None:
            for c in pool.candidates:
                if c.id == cand:
                    return c.signature
        raise KeyError(f"no stored outputs for candidate {cand!r} on subtask {sid!r}")

    def to_json(self) -> dict:
        p = self.problem
        return {
            "problem": {"id": p.id, "limits": asdict(p.limits),
                        "subtasks": [{"id": s.id, "points": s.points,
                                      "supersets": sorted(s.supersets)} for s in p.subtasks]},
            "pools": [pool.to_json() for pool in self.pools.values()],
            "judgments": self.judgments,
            "probes": {sid: {c: list(sig) for c, sig in t.items()} for sid, t in self.probes.items()},
        }

    @classmethod
    def from_json(cls, d: dict) -> "JudgedProblem":
        from .domain import Limits, Subtask

        pd = d["problem"]
        problem = ProblemSpec(
            id=pd["id"], statement="",
            subtasks=tuple(Subtask(s["id"], float(s["points"]),
                                   supersets=frozenset(s.get("supersets", ())))
                           for s in pd["subtasks"]),
            limits=Limits(**pd.get("limits", {"time_ms": 1000, "memory_mib": 256})))
        pools = {}
        for pj in d["pools"]:
            pool = SubtaskPool.from_json(pj)
            pools[pool.subtask_id] = pool
        probes = {sid: {c: tuple(sig) for c, sig in t.items()}
                  for sid, t in d.get("probes", {}).items()}
        return cls(problem, pools, d["judgments"], probes)

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path) -> "JudgedProblem":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def simulate_judged(jp: JudgedProblem, weights: ScoreWeights,
                    budget: int = DEFAULT_BUDGET) -> SimulationResult:
    return simulate(jp.problem, jp.pools, weights, jp.judge, jp.probe, budget)
