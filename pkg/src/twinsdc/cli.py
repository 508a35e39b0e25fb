"""Command-line harness for the protection pipeline and the cost model."""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import analysis
from .bench import bench_chain, bench_fib, bench_nondeterministic, bench_perfect_tree
from .errors import TwinError
from .pipeline import run_repetitions, to_csv, to_json_document
from .replay import DEFAULT_MAX_ROUNDS
from .trace import parse_path

EXIT_ERROR = 1
EXIT_INCORRECT = 3

ANALYSIS_FIELDS = ("h", "total_tasks", "closed", "exact", "mc_mean", "mc_stderr",
                   "path_only")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="twinsdc",
        description="Run fork-join benchmarks under twin replication with SDC "
                    "injection, detection and recovery.",
    )
    p.add_argument("--bench", choices=["fib", "chain", "tree", "nondet"], default="fib")
    p.add_argument("--n", type=int, default=30, help="fib argument")
    p.add_argument("--cutoff", type=int, default=15, help="fib sequential cutoff")
    p.add_argument("--naive-leaves", action="store_true",
                   help="evaluate fib below the cutoff with the exponential recursion")
    p.add_argument("--height", type=int, default=10, help="tree/chain/nondet height")
    p.add_argument("--width", type=int, default=2, help="chain fan-out")
    p.add_argument("--work-units", type=int, default=0, help="busy work per tree task")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--steal-seed", type=int, default=0)
    p.add_argument("--sdc-count", type=int, default=0)
    p.add_argument("--sdc-seed", type=int, default=0)
    p.add_argument("--sdc-bits", type=int, default=1)
    p.add_argument("--sdc-replica", choices=["original", "twin", "reprocess"],
                   default="original")
    p.add_argument("--sdc-path", action="append", default=[], metavar="PATH",
                   help="explicit target such as 0.1.0 (repeatable); overrides --sdc-count")
    p.add_argument("--reprocess-sdc-count", type=int, default=0,
                   help="additional faults injected into marked tasks during reprocessing")
    p.add_argument("--max-rounds", type=int, default=DEFAULT_MAX_ROUNDS)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--report", choices=["json", "csv"], default="json")
    p.add_argument("--dump-trace", metavar="PATH",
                   help="write the first repetition's original trace to PATH "
                        "and its twin trace to PATH.twin")
    p.add_argument("--analyze", type=int, metavar="H",
                   help="print the expected-cost table for heights 0..H as CSV and exit")
    p.add_argument("--mc-trials", type=int, default=100_000)
    p.add_argument("--mc-seed", type=int, default=0)
    return p


def make_benchmark(args):
    if args.bench == "fib":
        return bench_fib(args.n, args.cutoff, args.naive_leaves)
    if args.bench == "chain":
        return bench_chain(args.height, args.width)
    if args.bench == "tree":
        return bench_perfect_tree(args.height, args.work_units)
    return bench_nondeterministic(args.height)


def analysis_table(max_h: int, trials: int, seed: int, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ANALYSIS_FIELDS)
    for h in range(max_h + 1):
        mean, err = analysis.monte_carlo_reprocessed(h, trials, seed + h)
        writer.writerow([
            h,
            analysis.BinaryTreeModel(h).total_tasks,
            f"{float(analysis.expected_reprocessed_closed(h)):.12g}",
            f"{float(analysis.expected_reprocessed_exact(h)):.12g}",
            f"{mean:.12g}",
            f"{err:.6g}",
            f"{float(analysis.expected_marked_path_only(h)):.12g}",
        ])


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.analyze is not None:
        if args.analyze < 0:
            print("error: --analyze needs a non-negative height", file=sys.stderr)
            return EXIT_ERROR
        analysis_table(args.analyze, args.mc_trials, args.mc_seed, sys.stdout)
        return 0

    try:
        paths = [parse_path(text) for text in args.sdc_path]
        bench = make_benchmark(args)
        reports = run_repetitions(
            bench,
            args.reps,
            workers=args.workers,
            steal_seed=args.steal_seed,
            max_rounds=args.max_rounds,
            sdc_count=args.sdc_count,
            sdc_seed=args.sdc_seed,
            sdc_bits=args.sdc_bits,
            sdc_replica=args.sdc_replica,
            sdc_paths=paths,
            reprocess_count=args.reprocess_sdc_count,
        )
    except TwinError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    if args.dump_trace and reports:
        original, twin = reports[0].traces
        with open(args.dump_trace, "w") as fp:
            original.dump(fp)
        with open(args.dump_trace + ".twin", "w") as fp:
            twin.dump(fp)

    if args.report == "json":
        json.dump(to_json_document(reports), sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        sys.stdout.write(to_csv(reports))

    bad = [r.repetition for r in reports if not r.correct]
    if bad:
        print(f"error: recovered result wrong in repetition(s) {bad}", file=sys.stderr)
        return EXIT_INCORRECT
    return 0


if __name__ == "__main__":
    sys.exit(main())
