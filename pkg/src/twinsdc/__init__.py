"""Silent-data-corruption protection for nested fork-join programs.

Two replicas of a computation are executed while their task trees are
recorded.  When the final results differ, both trees are walked top-down to
mark the tasks whose results diverge, and only those are recomputed while
agreed child results are reused.
"""

from .bench import (
    Benchmark,
    bench_chain,
    bench_fib,
    bench_nondeterministic,
    bench_perfect_tree,
    decode_u64,
    encode_u64,
)
from .detect import MarkedSet, Verdict, detect, mark_corrupted
from .errors import (
    ChildCountMismatch,
    ChildrenIncomplete,
    DepthOutOfRange,
    DoubleWrite,
    Incomplete,
    NonContiguousChild,
    PositionOutOfRange,
    ReuseConflict,
    RoundsExhausted,
    SpawnShapeDiverged,
    TargetPathInvalid,
    TaskPanicked,
    TwinError,
    UnknownParent,
    UnknownPath,
)
from .faults import FaultPlan, arm, corrupt
from .pipeline import RecoveryReport, run_pipeline
from .replay import ReplayOutcome, replay
from .runtime import RunStats, RuntimeConfig, SpawnContext, run, run_replicated
from .trace import ROOT, TaskPath, TaskRecord, Trace, format_path, parse_path

__version__ = "0.1.0"
