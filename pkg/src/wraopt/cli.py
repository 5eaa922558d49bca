"""Command-line front end: run, bench, eval, list.

The harness writes one trace CSV per trial (header
``fcalls,iteration,gap,best_approx_F,restarts``) plus a machine-readable
summary, and a one-row-per-configuration summary CSV for sweeps.  Output
files contain no timestamps or timings, so identical configurations
reproduce byte-identical files.  Floats are rendered with the shortest
round-trip representation.
"""

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys

import numpy as np

from .config import (
    build_problem,
    build_run_kwargs,
    load_config,
    sweep_points,
)
from .drivers import run_algorithm
from .elitist import multistart_maximize
from .evaluation import aggregate
from .exceptions import InvalidInputError, UnsupportedError
from .problems import EvalCounter, list_problems, make_problem
from .rng import Rng

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_UNSUPPORTED = 3

TRACE_HEADER = "fcalls,iteration,gap,best_approx_F,restarts"
SUMMARY_HEADER = (
    "problem,algorithm,b,dx,dy,n_success,n_trials,"
    "median_fcalls,q25_fcalls,q75_fcalls"
)


def _fmt(x):
    """Shortest round-trip decimal for floats; plain text otherwise."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def trial_seed(master_seed, index):
    """Per-trial seed: master XOR trial index (64-bit)."""
    return (int(master_seed) ^ int(index)) & 0xFFFFFFFFFFFFFFFF


def _run_one_trial(config, index):
    problem = build_problem(config)
    kwargs = build_run_kwargs(config)
    return run_algorithm(
        config.algorithm, problem, config.budget,
        trial_seed(config.seed, index), **kwargs,
    )


def run_batch(config, jobs=1):
    """All trials of one configuration, optionally across processes.

    Per-trial determinism makes the parallel and serial results
    identical; output order follows the trial index either way.
    """
    indices = list(range(config.n_trials))
    if jobs <= 1 or config.n_trials == 1:
        return [_run_one_trial(config, i) for i in indices]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_one_trial, config, i) for i in indices]
        return [f.result() for f in futures]


def write_trace_csv(record, path):
    with open(path, "w", encoding="utf-8") as out:
        out.write(TRACE_HEADER + "\n")
        for fcalls, iteration, gap, best, restarts in record.rows():
            out.write(
                f"{fcalls},{iteration},{_fmt(gap)},{_fmt(best)},{restarts}\n"
            )


def _summary_payload(config, records):
    summary = aggregate(records)
    return {
        "problem": config.problem,
        "algorithm": config.algorithm,
        "budget": config.budget,
        "n_trials": summary.n_trials,
        "n_success": summary.n_success,
        "median_fcalls": _nan_to_none(summary.median_fcalls),
        "q25_fcalls": _nan_to_none(summary.q25_fcalls),
        "q75_fcalls": _nan_to_none(summary.q75_fcalls),
        "per_trial": [
            {
                "seed": r.seed,
                "success": r.success,
                "fcalls_to_success": r.fcalls_to_success,
                "fcalls_total": r.fcalls_total,
                "restarts": r.restarts,
                "termination": r.termination,
            }
            for r in records
        ],
    }


def _nan_to_none(x):
    return None if x != x else x


def _write_json(payload, path):
    with open(path, "w", encoding="utf-8") as out:
        json.dump(payload, out, indent=2, sort_keys=True)
        out.write("\n")


def _point_slug(config):
    spec = {"problem": config.problem, "algorithm": config.algorithm,
            "params": config.params}
    blob = json.dumps(spec, sort_keys=True)
    digest = hashlib.sha1(blob.encode()).hexdigest()[:10]
    return (
        f"{config.problem['id']}_{config.algorithm}"
        f"_b{_fmt(config.problem['b'])}"
        f"_dx{config.problem['dx']}_dy{config.problem['dy']}_{digest}"
    )


def cmd_run(config, out_dir, jobs, fmt):
    os.makedirs(out_dir, exist_ok=True)
    records = run_batch(config, jobs)
    slug = _point_slug(config)
    for i, record in enumerate(records):
        write_trace_csv(record, os.path.join(out_dir, f"trace_{slug}_t{i}.csv"))
    _write_json(_summary_payload(config, records),
                os.path.join(out_dir, f"summary_{slug}.json"))
    print(f"wrote {len(records)} trace files and summary_{slug}.json in {out_dir}")
    return EXIT_OK


def summary_row(config, records):
    summary = aggregate(records)
    return ",".join([
        config.problem["id"],
        config.algorithm,
        _fmt(config.problem["b"]),
        str(config.problem["dx"]),
        str(config.problem["dy"]),
        str(summary.n_success),
        str(summary.n_trials),
        _fmt(summary.median_fcalls),
        _fmt(summary.q25_fcalls),
        _fmt(summary.q75_fcalls),
    ])


def cmd_bench(config, out_dir, jobs, fmt):
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for point in sweep_points(config):
        sub = config.with_overrides(**point)
        slug = _point_slug(sub)
        point_path = os.path.join(out_dir, f"point_{slug}.json")
        if os.path.exists(point_path):
            with open(point_path, "r", encoding="utf-8") as handle:
                payload = json.load(handle)
            rows.append(payload["summary_row"])
            print(f"skip {slug} (already done)")
            continue
        records = run_batch(sub, jobs)
        row = summary_row(sub, records)
        payload = _summary_payload(sub, records)
        payload["summary_row"] = row
        _write_json(payload, point_path)
        rows.append(row)
        print(f"done {slug}: {row}")
    csv_path = os.path.join(out_dir, "bench_summary.csv")
    with open(csv_path, "w", encoding="utf-8") as out:
        out.write(SUMMARY_HEADER + "\n")
        for row in rows:
            out.write(row + "\n")
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return EXIT_OK


def _problem_from_args(args):
    return make_problem(
        args.problem, dx=args.dx, dy=args.dy, b=args.b, matrix=args.matrix,
        by=args.by, bounded=not args.unbounded, gamma=args.gamma,
    )


def cmd_eval(args):
    if not os.path.exists(args.solution):
        print(f"error: solution file {args.solution!r} not found", file=sys.stderr)
        return EXIT_INVALID
    x = np.loadtxt(args.solution, dtype=np.float64).reshape(-1)
    problem = _problem_from_args(args)
    if x.shape[0] != problem.dx:
        print(
            f"error: solution has dimension {x.shape[0]}, expected {problem.dx}",
            file=sys.stderr,
        )
        return EXIT_INVALID
    payload = {"problem": problem.name, "dx": problem.dx, "dy": problem.dy}
    closed = problem.worst_case_value(x)
    payload["closed_form_worst_case"] = closed
    _, f_star = problem.optimum()
    payload["gap"] = abs(closed - f_star)
    if args.protocol == "multistart":
        counter = EvalCounter()
        _, value = multistart_maximize(
            lambda y: problem.evaluate(x, y, counter),
            problem.y_domain, args.starts, args.budget_per_start,
            Rng(args.seed),
        )
        payload["multistart_worst_case"] = value
        payload["protocol_delta"] = abs(value - closed)
        payload["multistart_fcalls"] = counter.n
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for key, value in payload.items():
            print(f"{key}: {_fmt(value)}")
    return EXIT_OK


def cmd_list(args):
    rows = list_problems()
    if args.format == "json":
        print(json.dumps(rows, indent=2, sort_keys=True))
        return EXIT_OK
    print(f"{'id':<5}{'category':<10}{'dx':<5}{'dy':<5}{'matrix kinds':<15}unbounded")
    for row in rows:
        print(
            f"{row['id']:<5}{row['saddle_category']:<10}"
            f"{row['default_dx']:<5}{row['default_dy']:<5}"
            f"{','.join(row['matrix_kinds']):<15}"
            f"{'yes' if row['unbounded_ok'] else 'no'}"
        )
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wraopt",
        description="Derivative-free min-max optimization benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("run", "run one experiment configuration"),
        ("bench", "run the Cartesian sweep of a configuration"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="YAML configuration file")
        cmd.add_argument("--jobs", type=int, default=1, help="parallel trials")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the master seed")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--format", choices=("csv", "json"), default=None)

    ev = sub.add_parser("eval", help="certify a solution vector file")
    ev.add_argument("--solution", required=True, help="whitespace-separated floats")
    ev.add_argument("--problem", required=True)
    ev.add_argument("--dx", type=int, default=20)
    ev.add_argument("--dy", type=int, default=20)
    ev.add_argument("--b", type=float, default=1.0)
    ev.add_argument("--by", type=float, default=3.0)
    ev.add_argument("--gamma", type=float, default=1.0)
    ev.add_argument("--matrix", choices=("diag", "band"), default="diag")
    ev.add_argument("--unbounded", action="store_true")
    ev.add_argument("--protocol", choices=("closed-form", "multistart"),
                    default="closed-form")
    ev.add_argument("--starts", type=int, default=100)
    ev.add_argument("--budget-per-start", type=int, default=2000)
    ev.add_argument("--seed", type=int, default=1)
    ev.add_argument("--format", choices=("text", "json"), default="text")

    ls = sub.add_parser("list", help="list the test problems")
    ls.add_argument("--format", choices=("text", "json"), default="text")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("run", "bench"):
            config = load_config(args.config)
            if args.seed is not None:
                from dataclasses import replace

                config = replace(config, seed=args.seed)
            out_dir = args.out or config.output["dir"]
            fmt = args.format or config.output["format"]
            if args.command == "run":
                return cmd_run(config, out_dir, args.jobs, fmt)
            return cmd_bench(config, out_dir, args.jobs, fmt)
        if args.command == "eval":
            return cmd_eval(args)
        return cmd_list(args)
    except UnsupportedError as exc:
        print(f"error: unsupported configuration: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
