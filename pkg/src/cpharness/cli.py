"""Command-line entry point: ``cpharness <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .rank import ScoreWeights


def _weights(path):
    if path is None:
        return None
    return ScoreWeights(**json.loads(Path(path).read_text()))


def cmd_ioi_run(args):
    from .pipeline import cmd_ioi_run

    cfg = load_config(args.config)
    run_dir = cmd_ioi_run(args.problem, cfg, args.out, budget=args.budget,
                          weights=_weights(args.weights), run_id=args.run_id)
    report = json.loads((run_dir / "report.json").read_text())
    print(f"{report['problem']}\t{report['total']:g}/{report['max_points']:g}\t"
          f"{report['submissions']} submissions\t{run_dir}")


def cmd_replay(args):
    from .pipeline import cmd_replay, export_judged

    if args.export_judged:
        export_judged(args.run).dump(args.export_judged)
        print(f"judged\t{args.export_judged}")
    result, matches = cmd_replay(args.run, budget=args.budget, weights=_weights(args.weights))
    print(f"total\t{result.total:g}")
    print(f"submissions\t{len(result.trajectory)}")
    if matches is not None:
        print(f"matches_log\t{matches}")
        if not matches:
            sys.exit(1)


def cmd_simulate_contest(args):
    from .contest import cmd_simulate_contest

    report = cmd_simulate_contest(args.contest, args.standings, args.n, args.k, args.seed,
                                  args.out, figures=not args.no_figures)
    print("\t".join(["problem", "rating", "pass@1", f"pass@{args.k}", "failed", "solved"]))
    for r in report["rows"]:
        print(f"{r['problem']}\t{r['problem_rating']}\t{r['pass@1']}\t{r['pass@k']:.2f}\t"
              f"{r['failed_submissions']}\t{r['solved']}")
    print(f"# score {report['total']:g}, rank {report['rank']} of {report['participants'] + 1}")


def cmd_rate(args):
    from .contest import cmd_rate

    res = cmd_rate(args.reports, args.leaderboard, args.out, figures=not args.no_figures)
    print(f"rating\t{res['rating']:.1f}")
    if "percentile" in res:
        print(f"percentile\t{res['percentile_display']}")
    print(f"solve_rate\t{res['solve_rate']:.3f}")
    for c in res["contests"]:
        print(f"rank\t{c['contest_id']}\t{c['rank']}/{c['participants'] + 1}")


def cmd_tune(args):
    from .pipeline import cmd_tune

    cfg = load_config(args.config)
    out = cmd_tune(args.historical, args.budget, args.seed, args.out, args.submissions, cfg)
    print(out.read_text(), end="")


def cmd_report(args):
    from . import plotting
    from .contest import write_table

    target = Path(args.dir)
    written = []
    if (target / "trajectory.jsonl").exists():
        traj = [json.loads(x) for x in (target / "trajectory.jsonl").read_text().splitlines()]
        rep = json.loads((target / "report.json").read_text())
        cols = ["step", "subtask", "cluster", "candidate", "cumulative"]
        with open(target / "trajectory.tsv", "w") as fh:
            fh.write("\t".join(cols) + "\n")
            for e in traj:
                fh.write("\t".join(str(e[c]) for c in cols) + "\n")
        written += [target / "trajectory.tsv",
                    plotting.plot_trajectory(traj, target / "trajectory.png", rep["max_points"],
                                             rep["problem"])]
    elif (target / "report.json").exists():
        rep = json.loads((target / "report.json").read_text())
        write_table(rep["rows"], target / "table.tsv")
        written += [target / "table.tsv",
                    plotting.plot_pass_at_k(rep["rows"], target / "pass_at_k.png",
                                            f"Contest {rep['contest_id']}")]
    else:
        raise SystemExit(f"{target}: nothing to report")
    for p in written:
        print(p)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpharness", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ioi-run", help="run the IOI selection pipeline on one problem")
    s.add_argument("problem", help="problem directory")
    s.add_argument("-c", "--config", help="config file (JSON or TOML)")
    s.add_argument("-o", "--out", default="runs")
    s.add_argument("-b", "--budget", type=int)
    s.add_argument("-w", "--weights", help="weights JSON (e.g. from `tune`)")
    s.add_argument("--run-id")
    s.set_defaults(func=cmd_ioi_run)

    s = sub.add_parser("replay", help="re-simulate a run from its pools and the sandbox cache")
    s.add_argument("run", help="run directory")
    s.add_argument("-b", "--budget", type=int)
    s.add_argument("-w", "--weights")
    s.add_argument("--export-judged", metavar="PATH",
                   help="also judge every candidate and write a pool file for `tune`")
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("simulate-contest", help="pass@k table and imputed score for one contest")
    s.add_argument("contest", help="contest directory")
    s.add_argument("standings", help="standings CSV")
    s.add_argument("-n", type=int, help="samples per problem (default: all)")
    s.add_argument("-k", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--out")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_simulate_contest)

    s = sub.add_parser("rate", help="estimate a rating from contest reports")
    s.add_argument("reports", nargs="+", help="report.json files from simulate-contest")
    s.add_argument("-l", "--leaderboard", help="leaderboard CSV (handle, rating)")
    s.add_argument("-o", "--out")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_rate)

    s = sub.add_parser("tune", help="random-search the ranking weights on judged pools")
    s.add_argument("historical", help="directory of judged pool JSON files")
    s.add_argument("-b", "--budget", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--submissions", type=int, default=50)
    s.add_argument("-c", "--config")
    s.add_argument("-o", "--out", default="weights.json")
    s.set_defaults(func=cmd_tune)

    s = sub.add_parser("report", help="render tables and figures for a run or contest directory")
    s.add_argument("dir")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.func(args)


if __name__ == "__main__":
    main()
