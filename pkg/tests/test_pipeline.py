import csv
import io
import json

import jsonschema
import pytest

from twinsdc import (
    ChildCountMismatch,
    FaultPlan,
    RuntimeConfig,
    Trace,
    bench_fib,
    bench_nondeterministic,
    bench_perfect_tree,
    run_pipeline,
)
from twinsdc.bench import bench_chain
from twinsdc.cli import ANALYSIS_FIELDS, main
from twinsdc.pipeline import (
    CSV_FIELDS,
    DOCUMENT_SCHEMA,
    REPORT_SCHEMA,
    aggregate,
    clean_oracle,
    run_repetitions,
    to_csv,
    to_json_document,
)


FIB = bench_fib(30, 15)


@pytest.fixture(scope="module")
def fib_oracle():
    return clean_oracle(FIB)


def test_single_sdc_recovered(fib_oracle):
    report = run_pipeline(FIB, RuntimeConfig(workers=4, steal_seed=2),
                          [FaultPlan(count=1, selection_seed=10, bit_seed=3)],
                          oracle=fib_oracle)
    assert report.verdict == "disagree"
    assert report.correct
    assert report.rounds == 1
    assert report.recomputed == report.marked
    assert len(report.injected) == 1
    jsonschema.validate(report.to_dict(), REPORT_SCHEMA)


def test_no_sdc_agrees(fib_oracle):
    report = run_pipeline(FIB, RuntimeConfig(workers=2), [], oracle=fib_oracle)
    assert report.verdict == "agree"
    assert report.durations["traversal"] == 0
    assert report.durations["reprocessing"] == 0
    assert report.correct and report.rounds == 0
    jsonschema.validate(report.to_dict(), REPORT_SCHEMA)


def test_clean_oracle_computed_when_absent():
    report = run_pipeline(bench_fib(12), RuntimeConfig(), [FaultPlan(count=2, selection_seed=1)])
    assert report.correct
    assert int.from_bytes(bytes.fromhex(report.expected), "little") == 233


def test_twin_fault_recovered():
    report = run_pipeline(bench_perfect_tree(6), RuntimeConfig(workers=2),
                          [FaultPlan("twin", count=2, selection_seed=4)])
    assert report.verdict == "disagree" and report.correct


def test_reprocess_fault_via_repetition_plans():
    reports = run_repetitions(bench_perfect_tree(6), 3, sdc_count=1, sdc_seed=5,
                              reprocess_count=1)
    for r in reports:
        assert r.correct
        assert r.rounds == 2
        assert len(r.injected) == 2


def test_nondeterministic_body_aborts():
    with pytest.raises(ChildCountMismatch) as info:
        for _ in range(5):
            run_pipeline(bench_nondeterministic(4), RuntimeConfig())
    assert isinstance(info.value.path, tuple)


def test_counts_reproducible_across_invocations():
    kwargs = dict(workers=3, steal_seed=1, sdc_count=3, sdc_seed=99)
    a = run_repetitions(bench_perfect_tree(8), 4, **kwargs)
    b = run_repetitions(bench_perfect_tree(8), 4, **kwargs)
    strip = lambda d: {k: v for k, v in d.items() if k != "mean_durations"}
    assert strip(aggregate(a)) == strip(aggregate(b))
    assert [r.injected for r in a] == [r.injected for r in b]


def test_json_document_schema():
    reports = run_repetitions(bench_chain(2, 3), 3, sdc_count=2, sdc_seed=1)
    doc = json.loads(json.dumps(to_json_document(reports)))
    jsonschema.validate(doc, DOCUMENT_SCHEMA)
    assert doc["aggregate"]["repetitions"] == 3
    assert doc["aggregate"]["correct_fraction"] == 1.0


def test_csv_layout():
    reports = run_repetitions(bench_perfect_tree(5), 2, sdc_count=1)
    rows = list(csv.DictReader(io.StringIO(to_csv(reports))))
    assert tuple(rows[0]) == CSV_FIELDS
    assert [r["repetition"] for r in rows] == ["0", "1"]
    assert all(r["correct"] == "1" for r in rows)


# -- command line ----------------------------------------------------------


def test_cli_json(capsys):
    code = main(["--bench", "tree", "--height", "6", "--sdc-count", "2",
                 "--workers", "2", "--reps", "3"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    jsonschema.validate(doc, DOCUMENT_SCHEMA)
    assert len(doc["repetitions"]) == 3


def test_cli_csv_explicit_path_and_dump(tmp_path, capsys):
    dump = tmp_path / "trace.tsv"
    code = main(["--bench", "fib", "--n", "12", "--cutoff", "4", "--sdc-path", "0.1.0",
                 "--report", "csv", "--dump-trace", str(dump)])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows[0]["injected"] == "0.1.0"
    assert rows[0]["verdict"] == "disagree"
    original = Trace.loads(dump.read_text())
    twin = Trace.loads((tmp_path / "trace.tsv.twin").read_text())
    assert original[(0, 1, 0)].result != twin[(0, 1, 0)].result
    assert dump.read_text().splitlines()[0].startswith("·\t2\t")


def test_cli_reprocess_replica_flag(capsys):
    code = main(["--bench", "tree", "--height", "5", "--sdc-count", "1",
                 "--reprocess-sdc-count", "1", "--report", "csv"])
    assert code == 0
    row = next(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert row["rounds"] == "2"


def test_cli_rounds_exhausted_exit_code(capsys):
    code = main(["--bench", "tree", "--height", "5", "--sdc-count", "1",
                 "--reprocess-sdc-count", "1", "--max-rounds", "1"])
    assert code != 0
    assert "RoundsExhausted" in capsys.readouterr().err


def test_cli_invalid_path_exit_code(capsys):
    code = main(["--bench", "fib", "--n", "5", "--cutoff", "0", "--sdc-path", "9.9"])
    assert code != 0
    assert "TargetPathInvalid" in capsys.readouterr().err


def test_cli_nondet_abort_exit_code(capsys):
    code = main(["--bench", "nondet", "--height", "4", "--reps", "5"])
    assert code != 0
    err = capsys.readouterr().err
    assert "ChildCountMismatch" in err and "task " in err


def test_cli_analyze(capsys):
    assert main(["--analyze", "4", "--mc-trials", "2000"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert tuple(rows[0]) == ANALYSIS_FIELDS
    assert [int(r["h"]) for r in rows] == [0, 1, 2, 3, 4]
    assert float(rows[1]["closed"]) == pytest.approx(10 / 3)
    assert float(rows[1]["exact"]) == pytest.approx(10 / 3)
