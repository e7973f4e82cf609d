"""End-to-end IOI pipeline: documents, sampling, test generation, clustering, ranking, submission.

Run directory layout::

    runs/<id>/manifest.json
    runs/<id>/pools/<subtask>.json      candidates, features, sources, accepted inputs
    runs/<id>/clusters/<subtask>.json   cluster report
    runs/<id>/trajectory.jsonl          one line per submission
    runs/<id>/report.json               outcomes and totals
"""

from __future__ import annotations

import base64
import contextlib
import hashlib
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .cluster import SENTINELS, cluster_report, signature_of
from .config import Config, derive_seed, make_model, make_sandbox, render_prompt
from .domain import ProblemSpec, build_subtask_document
from .loaders import load_problem
from .rank import Candidate, PublicTestScorer, ScoreWeights, failure_rate, tune_weights
from .sandbox import Artifact, GuestProgram, Sandbox
from .submit import JudgedProblem, SimulationResult, SubtaskPool, simulate
from .testgen import (GeneratorSet, TestGenError, collect_generators, collect_validators,
                      extract_program, filter_inputs, generate_inputs)

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, e) from e


def _dump(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


@dataclass
class PreparedSubtask:
    subtask_id: str
    document: str
    pool: SubtaskPool
    artifacts: dict[str, Artifact]
    sources: dict[str, GuestProgram]
    inputs: list[bytes]


class LiveJudge:
    """Judges and probes candidates through the sandbox, memoizing results."""

    def __init__(self, problem: ProblemSpec, sandbox: Sandbox, prepared: dict[str, PreparedSubtask],
                 checker: Artifact | None = None):
        self.problem = problem
        self.sandbox = sandbox
        self.prepared = prepared
        self.checker = checker
        self.artifacts = {cid: a for p in prepared.values() for cid, a in p.artifacts.items()}
        self._judged: dict[str, dict] = {}
        self._probed: dict[tuple, tuple] = {}

    def judge(self, cid: str) -> dict[str, float]:
        if cid not in self._judged:
            art = self.artifacts[cid]
            self._judged[cid] = {
                s.id: (self.sandbox.judge_subtask(art, s, self.problem.limits, self.checker)
                       if s.tests else 0.0)
                for s in self.problem.subtasks}
        return self._judged[cid]

    def probe(self, sid: str, cid: str) -> tuple:
        key = (sid, cid)
        if key not in self._probed:
            prep = self.prepared.get(sid)
            if prep is None:
                self._probed[key] = ()
            else:
                own = {c.id: c.signature for c in prep.pool.candidates}
                self._probed[key] = own[cid] if cid in own else signature_of(
                    self.artifacts[cid], prep.inputs, self.problem.limits, self.sandbox)
        return self._probed[key]


def compile_checker(problem: ProblemSpec, sandbox: Sandbox) -> Artifact | None:
    if problem.checker_source is None:
        return None
    art = sandbox.compile(GuestProgram(problem.checker_source, "cpp", "checker"))
    if not art.ok:
        raise RuntimeError(f"checker for {problem.id} does not compile:\n{art.diagnostics}")
    return art


def prepare_subtask(problem: ProblemSpec, sid: str, cfg: Config, model, sandbox: Sandbox,
                    checker: Artifact | None = None) -> PreparedSubtask:
    limits = problem.limits
    with stage("document"):
        doc = build_subtask_document(problem, sid)

    with stage("sampling"):
        prompt = render_prompt("solution", doc, cfg)
        samples = model.sample(prompt, cfg.pool_size)
        prompt_hash = hashlib.sha256(prompt.encode()).hexdigest()[:16]
        sources, artifacts, computes = {}, {}, {}
        for i, (text, compute) in enumerate(samples):
            cid = f"{sid}/{i}"
            try:
                prog = extract_program(text, cfg.model.language)
            except ValueError:
                continue
            art = sandbox.compile(prog)
            if not art.ok:
                log.info("%s: candidate %d does not compile, dropped", sid, i)
                continue
            sources[cid], artifacts[cid], computes[cid] = prog, art, compute
        if not artifacts:
            raise RuntimeError(f"subtask {sid}: no candidate compiled out of {len(samples)}")

    with stage("testgen"):
        gens = collect_generators(model, render_prompt("generator", doc, cfg), cfg.num_generators,
                                  sandbox, sid, cfg.model.language)
        try:
            vals = collect_validators(model, render_prompt("validator", doc, cfg),
                                      cfg.num_validators, sandbox, sid, cfg.model.language)
        except TestGenError:
            vals = []
        gset = GeneratorSet(sid, gens, vals, seed_start=cfg.seed * 1_000_000)
        inputs = generate_inputs(gset, sandbox, cfg.inputs_target)
        accepted = filter_inputs(inputs, vals, sandbox, cfg.validator_threshold, sid)

    with stage("cluster"):
        public = [t for t in problem.public_tests if not t.subtasks or sid in t.subtasks]
        scorer = PublicTestScorer()
        candidates = []
        for cid, art in artifacts.items():
            sig = signature_of(art, accepted.inputs, limits, sandbox)
            passed = [sandbox.check_test(art, t, limits, checker)[1] >= 1.0 for t in public]
            gen_ok = [tok not in SENTINELS for tok in sig]
            public_fail, gen_err = failure_rate(passed), failure_rate(gen_ok)
            index = int(cid.rsplit("/", 1)[1])
            draft = Candidate(cid, index, sid, computes[cid], 0.0, gen_err, public_fail, sig,
                              prompt_hash)
            value = scorer.evaluate(draft, {"public_test_fail_rate": public_fail,
                                            "gen_test_error_rate": gen_err})
            candidates.append(Candidate(cid, index, sid, computes[cid], value, gen_err,
                                        public_fail, sig, prompt_hash))
        pool = SubtaskPool(sid, candidates)
    return PreparedSubtask(sid, doc, pool, artifacts, sources, accepted.inputs)


def default_run_id(problem: ProblemSpec, cfg: Config, budget: int, weights: ScoreWeights) -> str:
    key = json.dumps([problem.id, cfg.seed, budget, asdict(weights), cfg.pool_size,
                      cfg.inputs_target], sort_keys=True)
    return f"{problem.id}-{hashlib.sha256(key.encode()).hexdigest()[:10]}"


def write_trajectory(path: Path, trajectory):
    with open(path, "w") as fh:
        for entry in trajectory:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def cmd_ioi_run(problem_dir, cfg: Config, out_root="runs", budget: int | None = None,
                weights: ScoreWeights | None = None, run_id: str | None = None,
                model=None, sandbox: Sandbox | None = None) -> Path:
    with stage("load"):
        problem = load_problem(problem_dir)
    budget = cfg.budget if budget is None else budget
    weights = cfg.weights if weights is None else weights
    model = model if model is not None else make_model(cfg)
    sandbox = sandbox if sandbox is not None else make_sandbox(cfg)
    with stage("checker"):
        checker = compile_checker(problem, sandbox)

    prepared = {}
    for s in problem.subtasks:
        prepared[s.id] = prepare_subtask(problem, s.id, cfg, model, sandbox, checker)

    live = LiveJudge(problem, sandbox, prepared, checker)
    with stage("submit"):
        result = simulate(problem, {sid: p.pool for sid, p in prepared.items()}, weights,
                          live.judge, live.probe, budget)

    run_dir = Path(out_root) / (run_id or default_run_id(problem, cfg, budget, weights))
    write_run(run_dir, problem_dir, problem, cfg, budget, weights, prepared, result)
    return run_dir


def write_run(run_dir: Path, problem_dir, problem, cfg, budget, weights, prepared, result):
    run_dir.mkdir(parents=True, exist_ok=True)
    for sid, prep in prepared.items():
        pool_json = prep.pool.to_json()
        pool_json["sources"] = {cid: {"source": p.source, "language": p.language}
                                for cid, p in prep.sources.items()}
        pool_json["inputs"] = [base64.b64encode(x).decode("ascii") for x in prep.inputs]
        _dump(run_dir / "pools" / f"{sid}.json", pool_json)
        _dump(run_dir / "clusters" / f"{sid}.json", cluster_report(prep.pool.clusters))
    write_trajectory(run_dir / "trajectory.jsonl", result.trajectory)
    _dump(run_dir / "report.json", run_report(problem, result, budget, weights))
    _dump(run_dir / "manifest.json", {
        "run_id": run_dir.name,
        "kind": "ioi-run",
        "problem_dir": str(Path(problem_dir).resolve()),
        "problem_id": problem.id,
        "config": cfg.to_json(),
        "budget": budget,
        "weights": weights.to_json(),
        "seeds": {"config": cfg.seed, "generator_seed_start": cfg.seed * 1_000_000,
                  "sampling": derive_seed(cfg.seed, "sampling")},
        "pool_sizes": {sid: len(p.pool.candidates) for sid, p in prepared.items()},
        "version": __version__,
        "artifacts": {"pools": "pools/", "clusters": "clusters/",
                      "trajectory": "trajectory.jsonl", "report": "report.json"},
    })


def run_report(problem: ProblemSpec, result: SimulationResult, budget, weights) -> dict:
    best = {s.id: 0.0 for s in problem.subtasks}
    for out in result.outcomes:
        for sid, v in out.per_subtask_score.items():
            best[sid] = max(best[sid], v)
    return {
        "problem": problem.id,
        "total": result.total,
        "max_points": problem.total_points,
        "budget": budget,
        "submissions": len(result.outcomes),
        "weights": weights.to_json(),
        "best": best,
        "outcomes": [{"index": o.submission_index, "scores": dict(o.per_subtask_score)}
                     for o in result.outcomes],
    }


def load_run_pools(run_dir: Path):
    pools, sources, inputs = {}, {}, {}
    for path in sorted((run_dir / "pools").glob("*.json")):
        d = json.loads(path.read_text())
        pool = SubtaskPool.from_json(d)
        pools[pool.subtask_id] = pool
        for cid, s in d.get("sources", {}).items():
            sources[cid] = GuestProgram(s["source"], s["language"])
        inputs[pool.subtask_id] = [base64.b64decode(x) for x in d.get("inputs", [])]
    return pools, sources, inputs


def cmd_replay(run_dir, budget: int | None = None, weights: ScoreWeights | None = None,
               sandbox: Sandbox | None = None):
    """Re-run the submission simulation from a run directory and its sandbox cache.

    Returns ``(result, matches_log)``; `matches_log` is None when budget or
    weights differ from the logged run.
    """
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    cfg = Config.from_dict(manifest["config"])
    problem = load_problem(manifest["problem_dir"])
    sandbox = sandbox if sandbox is not None else make_sandbox(cfg)
    logged_weights = ScoreWeights(**manifest["weights"])
    budget = manifest["budget"] if budget is None else budget
    weights = logged_weights if weights is None else weights
    pools, sources, inputs = load_run_pools(run_dir)
    checker = compile_checker(problem, sandbox)
    prepared = {}
    for sid, pool in pools.items():
        arts = {c.id: sandbox.compile(sources[c.id]) for c in pool.candidates}
        prepared[sid] = PreparedSubtask(sid, "", pool, arts, {}, inputs[sid])
    live = LiveJudge(problem, sandbox, prepared, checker)
    result = simulate(problem, pools, weights, live.judge, live.probe, budget)
    matches = None
    if budget == manifest["budget"] and weights == logged_weights:
        logged = [json.loads(line) for line in (run_dir / "trajectory.jsonl").read_text().splitlines()]
        replayed = json.loads(json.dumps(result.trajectory, sort_keys=True))
        matches = logged == replayed
    return result, matches


def export_judged(run_dir, sandbox: Sandbox | None = None) -> JudgedProblem:
    """Judge every candidate of a run so the pools can be used for tuning."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    cfg = Config.from_dict(manifest["config"])
    problem = load_problem(manifest["problem_dir"])
    sandbox = sandbox if sandbox is not None else make_sandbox(cfg)
    pools, sources, inputs = load_run_pools(run_dir)
    checker = compile_checker(problem, sandbox)
    prepared = {sid: PreparedSubtask(sid, "", pool,
                                     {c.id: sandbox.compile(sources[c.id]) for c in pool.candidates},
                                     {}, inputs[sid])
                for sid, pool in pools.items()}
    live = LiveJudge(problem, sandbox, prepared, checker)
    all_ids = [c.id for p in pools.values() for c in p.candidates]
    judgments = {cid: live.judge(cid) for cid in all_ids}
    probes = {}
    for s in problem.subtasks:
        if any(s.id in problem.contained_in(t.id) for t in problem.subtasks):
            probes[s.id] = {cid: live.probe(s.id, cid) for cid in all_ids}
    return JudgedProblem(problem, pools, judgments, probes)


def cmd_tune(historical_dir, budget: int, seed: int, out_path, submissions: int = 50,
             cfg: Config | None = None) -> Path:
    cfg = cfg or Config()
    files = sorted(Path(historical_dir).glob("*.json"))
    historical = [JudgedProblem.load(f) for f in files]
    ranges = {k: tuple(v) for k, v in cfg.ranges.items()}
    best, report = tune_weights(historical, budget, seed, ranges, submissions, cfg.weights)
    out_path = Path(out_path)
    report["historical"] = [f.name for f in files]
    _dump(out_path, best.to_json())
    _dump(out_path.with_name(out_path.stem + ".report.json"), report)
    return out_path
