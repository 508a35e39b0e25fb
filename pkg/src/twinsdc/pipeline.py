"""End-to-end protection pipeline: replicate, detect, mark, replay, report."""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .bench import Benchmark
from .detect import EMPTY, Verdict, detect, mark_corrupted
from .faults import FaultPlan, arm
from .replay import DEFAULT_MAX_ROUNDS, replay
from .runtime import RuntimeConfig, run, run_replicated
from .seeding import derive_seed
from .trace import Trace, format_path

PHASES = ("original", "twin", "traversal", "reprocessing")


@dataclass
class RecoveryReport:
    benchmark: str
    params: Dict[str, int]
    workers: int
    steal_seed: int
    sdc_count: int
    sdc_seed: Optional[int]
    sdc_bits: int
    sdc_replica: str
    injected: List[str]
    durations: Dict[str, float]
    verdict: str
    marked: int
    visited_comparisons: int
    rounds: int
    recomputed: int
    reused: int
    correct: bool
    final: str
    expected: str
    repetition: int = 0
    traces: Optional[Tuple[Trace, Trace]] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        out = asdict(replace(self, traces=None))
        del out["traces"]
        return out


def clean_oracle(bench: Benchmark) -> Tuple[bytes, Trace]:
    """Fault-free sequential run: the reference result and tree shape."""
    return run(bench.body, bench.input, RuntimeConfig(workers=1))


def run_pipeline(
    bench: Benchmark,
    config: RuntimeConfig = RuntimeConfig(),
    fault_plans: Sequence[FaultPlan] = (),
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    *,
    oracle: Optional[Tuple[bytes, Trace]] = None,
    repetition: int = 0,
) -> RecoveryReport:
    """Protect one execution of ``bench`` and report what recovery did.

    Count-based plans for the original or twin replica select among the
    tasks of the clean oracle run; those for the reprocessing replica select
    among the marked tasks.  ``oracle`` may be passed to skip the clean run.
    """
    expected, reference = oracle if oracle is not None else clean_oracle(bench)
    replica_cfg = replace(config, tracking=True, fault_plans=())
    injected = []
    for plan in fault_plans:
        if plan.replica != "reprocess":
            replica_cfg = arm(plan, replica_cfg, reference=reference)
            injected.extend(replica_cfg.fault_plans[-1].targets())

    original, twin = run_replicated(bench.body, bench.input, replica_cfg)

    durations = dict.fromkeys(PHASES, 0.0)
    durations["original"] = original.elapsed
    durations["twin"] = twin.elapsed
    start = time.perf_counter()
    verdict = detect(original, twin)
    marked = EMPTY
    if verdict is Verdict.DISAGREE:
        marked = mark_corrupted(original, twin)
        durations["traversal"] = time.perf_counter() - start

    final = original.final_result
    rounds = recomputed = reused = 0
    if marked.paths:
        replay_cfg = replace(config, fault_plans=())
        for plan in fault_plans:
            if plan.replica == "reprocess":
                replay_cfg = arm(plan, replay_cfg, reference=marked.paths)
                injected.extend(replay_cfg.fault_plans[-1].targets())
        outcome = replay(
            bench.body, bench.input, original, twin, marked, replay_cfg, max_rounds
        )
        durations["reprocessing"] = outcome.elapsed
        final = outcome.final
        rounds, recomputed, reused = outcome.rounds, outcome.recomputed, outcome.reused

    lead = fault_plans[0] if fault_plans else None
    return RecoveryReport(
        benchmark=bench.name,
        params=dict(bench.params),
        workers=config.workers,
        steal_seed=config.steal_seed,
        sdc_count=len(injected),
        sdc_seed=lead.selection_seed if lead is not None and lead.paths is None else None,
        sdc_bits=lead.bits_per_fault if lead is not None else 0,
        sdc_replica=lead.replica if lead is not None else "none",
        injected=[format_path(p) for p in injected],
        durations=durations,
        verdict=verdict.value,
        marked=len(marked),
        visited_comparisons=marked.visited_comparisons,
        rounds=rounds,
        recomputed=recomputed,
        reused=reused,
        correct=final == expected,
        final=final.hex(),
        expected=expected.hex(),
        repetition=repetition,
        traces=(original, twin),
    )


def repetition_plans(
    rep: int,
    *,
    sdc_count: int = 0,
    sdc_seed: int = 0,
    sdc_bits: int = 1,
    sdc_replica: str = "original",
    sdc_paths: Sequence[Tuple[int, ...]] = (),
    reprocess_count: int = 0,
) -> List[FaultPlan]:
    """Fault plans for repetition ``rep``, seeded from the master ``sdc_seed``."""
    bit_seed = derive_seed(sdc_seed, "bits", rep)
    plans = []
    if sdc_paths:
        plans.append(FaultPlan(sdc_replica, paths=tuple(sdc_paths),
                               bits_per_fault=sdc_bits, bit_seed=bit_seed))
    elif sdc_count:
        plans.append(FaultPlan(sdc_replica, count=sdc_count,
                               selection_seed=derive_seed(sdc_seed, "select", rep),
                               bits_per_fault=sdc_bits, bit_seed=bit_seed))
    if reprocess_count:
        plans.append(FaultPlan("reprocess", count=reprocess_count,
                               selection_seed=derive_seed(sdc_seed, "reselect", rep),
                               bits_per_fault=sdc_bits,
                               bit_seed=derive_seed(sdc_seed, "rebits", rep)))
    return plans


def run_repetitions(
    bench: Benchmark,
    reps: int,
    *,
    workers: int = 1,
    steal_seed: int = 0,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    oracle: Optional[Tuple[bytes, Trace]] = None,
    **fault_args,
) -> List[RecoveryReport]:
    oracle = oracle or clean_oracle(bench)
    reports = []
    for rep in range(reps):
        config = RuntimeConfig(workers=workers, steal_seed=derive_seed(steal_seed, "rep", rep))
        plans = repetition_plans(rep, **fault_args)
        reports.append(
            run_pipeline(bench, config, plans, max_rounds, oracle=oracle, repetition=rep)
        )
    return reports


_MEAN_FIELDS = ("sdc_count", "marked", "visited_comparisons", "rounds", "recomputed", "reused")


def aggregate(reports: Iterable[RecoveryReport]) -> dict:
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to aggregate")
    out = {
        "benchmark": reports[0].benchmark,
        "params": dict(reports[0].params),
        "workers": reports[0].workers,
        "repetitions": len(reports),
        "disagreements": sum(r.verdict == Verdict.DISAGREE.value for r in reports),
        "correct_fraction": sum(r.correct for r in reports) / len(reports),
    }
    for name in _MEAN_FIELDS:
        out[f"mean_{name}"] = statistics.fmean(getattr(r, name) for r in reports)
    out["mean_durations"] = {
        phase: statistics.fmean(r.durations[phase] for r in reports) for phase in PHASES
    }
    return out


def to_json_document(reports: Sequence[RecoveryReport]) -> dict:
    return {
        "repetitions": [r.to_dict() for r in reports],
        "aggregate": aggregate(reports),
    }


CSV_FIELDS = (
    "repetition", "benchmark", "params", "workers", "steal_seed",
    "sdc_count", "sdc_seed", "sdc_bits", "sdc_replica", "injected",
    "verdict", "marked", "visited_comparisons", "rounds", "recomputed", "reused",
    "correct", "t_original", "t_twin", "t_traversal", "t_reprocessing",
)


def csv_row(report: RecoveryReport) -> dict:
    row = {name: getattr(report, name) for name in CSV_FIELDS if hasattr(report, name)}
    row["params"] = ";".join(f"{k}={v}" for k, v in sorted(report.params.items()))
    row["injected"] = " ".join(report.injected)
    row["sdc_seed"] = "" if report.sdc_seed is None else report.sdc_seed
    row["correct"] = int(report.correct)
    for phase in PHASES:
        row[f"t_{phase}"] = f"{report.durations[phase]:.9f}"
    return row


def to_csv(reports: Iterable[RecoveryReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(csv_row(r))
    return buf.getvalue()


_COUNT = {"type": "integer", "minimum": 0}
_SECONDS = {"type": "number", "minimum": 0}

REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "benchmark", "params", "workers", "steal_seed", "sdc_count", "sdc_seed",
        "sdc_bits", "sdc_replica", "injected", "durations", "verdict", "marked",
        "visited_comparisons", "rounds", "recomputed", "reused", "correct",
        "final", "expected", "repetition",
    ],
    "additionalProperties": False,
    "properties": {
        "benchmark": {"enum": ["fib", "chain", "tree", "nondet"]},
        "params": {"type": "object", "additionalProperties": {"type": "integer"}},
        "workers": {"type": "integer", "minimum": 1},
        "steal_seed": _COUNT,
        "sdc_count": _COUNT,
        "sdc_seed": {"type": ["integer", "null"], "minimum": 0},
        "sdc_bits": _COUNT,
        "sdc_replica": {"enum": ["original", "twin", "reprocess", "none"]},
        "injected": {"type": "array", "items": {"type": "string"}},
        "durations": {
            "type": "object",
            "required": list(PHASES),
            "additionalProperties": False,
            # traversal includes the final-result comparison when it ran
            "properties": {phase: _SECONDS for phase in PHASES},
        },
        "verdict": {"enum": ["agree", "disagree"]},
        "marked": _COUNT,
        "visited_comparisons": _COUNT,
        "rounds": _COUNT,
        "recomputed": _COUNT,
        "reused": _COUNT,
        "correct": {"type": "boolean"},
        "final": {"type": "string", "pattern": "^[0-9a-f]*$"},
        "expected": {"type": "string", "pattern": "^[0-9a-f]*$"},
        "repetition": _COUNT,
    },
}

AGGREGATE_SCHEMA = {
    "type": "object",
    "required": ["benchmark", "params", "workers", "repetitions", "disagreements",
                 "correct_fraction", "mean_durations"]
                + [f"mean_{name}" for name in _MEAN_FIELDS],
    "properties": {
        "repetitions": {"type": "integer", "minimum": 1},
        "correct_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "mean_durations": {
            "type": "object",
            "required": list(PHASES),
            "properties": {phase: _SECONDS for phase in PHASES},
        },
    },
}

DOCUMENT_SCHEMA = {
    "type": "object",
    "required": ["repetitions", "aggregate"],
    "properties": {
        "repetitions": {"type": "array", "items": REPORT_SCHEMA, "minItems": 1},
        "aggregate": AGGREGATE_SCHEMA,
    },
}
