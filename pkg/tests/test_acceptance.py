"""End-to-end acceptance checks, one test per criterion.

Each check returns ``(ok, detail)``; the test records a PASS/FAIL line and
then asserts.  Run ``python tests/test_acceptance.py`` for the lines alone.
"""

from __future__ import annotations

import random
import sys
import time
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from loopforge import transcript as T  # noqa: E402
from loopforge.analyzer import analyze_frequencies, rank_and_select  # noqa: E402
from loopforge.cli import main  # noqa: E402
from loopforge.collector import collect_program  # noqa: E402
from loopforge.corpus import program as corpus_program, programs  # noqa: E402
from loopforge.flow import make_settings, synthesize_program  # noqa: E402
from loopforge.frontend.program import build_program  # noqa: E402
from loopforge.hdl import check_structure, emit_verilog  # noqa: E402
from loopforge.synth.costmodel import CostModel  # noqa: E402
from loopforge.verifier.cosim import compare_programs, cosimulate  # noqa: E402
from loopforge.verifier.equiv import check_equivalence, random_value  # noqa: E402
from loopforge.verifier.faults import detect, fault_suite  # noqa: E402
from support import OPEN_MODEL, corpus  # noqa: E402
from test_collector import SAMPLE_TRANSCRIPT  # noqa: E402

BOARD_MODEL = CostModel(f_cpu=666 * 10 ** 6, f_accel=333 * 10 ** 6, reg_access_cycles=14)
_cache: dict = {}


def _all_built() -> list:
    return [corpus(cp.name) for cp in programs()]


def _equivalence_reports() -> tuple:
    if "equiv" not in _cache:
        t0 = time.perf_counter()
        reports = []
        for cp in programs():
            b = corpus.__wrapped__(cp.name)  # fresh build, so synthesis is inside the timing
            for lid, acc in sorted(b.accelerators.items()):
                f, loop = b.locate(lid)
                reports.append((cp.name, check_equivalence(b.program, f, loop, acc.spec, 1000, 0, OPEN_MODEL)))
        _cache["equiv"] = (reports, time.perf_counter() - t0)
    return _cache["equiv"]


def line_of_sight_spec():
    b = corpus("los")
    return next(a.spec for a in b.accelerators.values() if a.spec.function == "line_of_sight")


def criterion_1(tmp: Path) -> tuple:
    srcs = [str(f) for f in corpus_program("chain").files]
    out = tmp / "transcript.txt"
    t0 = time.perf_counter()
    rc = main(["collect", *srcs, "-o", str(out)])
    dt = time.perf_counter() - t0
    body = T.body_text(out.read_text()) if out.exists() else ""
    ok = rc == 0 and body == SAMPLE_TRANSCRIPT and dt < 1.0
    return ok, f"transcript body byte-exact={body == SAMPLE_TRANSCRIPT}, collect took {dt:.3f}s (limit 1s)"


def criterion_2() -> tuple:
    t = T.parse(SAMPLE_TRANSCRIPT)
    _, freq = analyze_frequencies(t)
    rep = rank_and_select(t, freq, 1)
    reasons = {e.loop_id: e.reason for e in rep.entries}
    ok = rep.chosen == [3] and reasons[1] == reasons[2] == "contains call"
    return ok, f"chosen={rep.chosen}, loop1={reasons[1]!r}, loop2={reasons[2]!r}"


def criterion_3() -> tuple:
    reports, dt = _equivalence_reports()
    names = {n for n, _ in reports}
    multi_unit = [cp for cp in programs() if len(cp.files) >= 2 and cp.name not in ("chain", "los")]
    mism = sum(len(r.mismatches) for _, r in reports)
    short = [f"{n}/{r.name}" for n, r in reports if r.compared + r.skipped != 1000]
    ok = (mism == 0 and not short and dt < 60 and {"chain", "los"} <= names and len(multi_unit) >= 10)
    return ok, (f"{len(reports)} accelerators x 1000 trials, {mism} mismatches, "
                f"{sum(r.skipped for _, r in reports)} skipped, {len(multi_unit)} extra multi-unit programs, "
                f"{dt:.1f}s (limit 60s)")


def criterion_4() -> tuple:
    fb = sim = 0
    multi_exit = []
    lines = []
    for b in _all_built():
        rep = compare_programs(b.program, b.patched, b.fsms(), CostModel(), b.entry, 200, 0)
        fb += len(rep.fallback_mismatches)
        sim += len(rep.simulated_mismatches)
        if rep.compared != 200:
            lines.append(f"{b.name} compared {rep.compared}")
        if any(len(a.spec.exits) >= 2 for a in b.accelerators.values()):
            multi_exit.append(b.name)
    ok = fb == 0 and sim == 0 and not lines and len(multi_exit) >= 1
    return ok, (f"{len(_all_built())} programs x 200 trials: {fb} fallback and {sim} simulated mismatches; "
                f"multi-exit programs {','.join(multi_exit)}" + ("; " + "; ".join(lines) if lines else ""))


def criterion_5() -> tuple:
    reports, _ = _equivalence_reports()
    violations = sum(len(r.bound_violations) for _, r in reports)
    segments = sum(r.segments for _, r in reports)
    # also the segments observed while whole programs ran against simulated accelerators
    rng = random.Random(5)
    for b in _all_built():
        arity = sum(1 for p in b.program.function(b.entry).params if not p.out)
        for _ in range(5):
            _, rep = cosimulate(b.patched, b.fsms(), CostModel(), b.entry, [random_value(rng) for _ in range(arity)])
            for t in rep.accelerators:
                spec = b.accelerators[t.loop_id].spec
                segments += len(t.segments)
                violations += sum(1 for s in t.segments if not spec.best_cycles <= s <= spec.worst_cycles)
    return violations == 0, f"{segments} iteration segments checked, {violations} outside [best, worst]"


def criterion_6() -> tuple:
    spec = line_of_sight_spec()
    ok = len(spec.inputs) == 11 and len(spec.outputs) == 1 and spec.output_names[-1] == "bb_idx"
    return ok, (f"{len(spec.inputs)} input registers, {len(spec.outputs)} data output + bb_idx; "
                f"{spec.state_count()} FSM states (reported, not checked)")


def criterion_7() -> tuple:
    b = corpus("chain")
    f, loop = b.locate(3)
    _, rep = cosimulate(b.patched, b.fsms(), BOARD_MODEL, "fun1", [0, 1], original=b.program,
                        loops={3: (f.name, loop)})
    want_transfer = Fraction(rep.transfers * 14, 333 * 10 ** 6)
    ok = (rep.calls > 0 and rep.transfer_s == want_transfer
          and rep.relative_performance == rep.sw_time_s / rep.hw_time_s)
    return ok, (f"transfers={rep.transfers}, transfer latency {rep.transfer_s} s = transfers*14/333MHz, "
                f"relative_performance={rep.relative_performance} = sw/hw")


def criterion_8() -> tuple:
    counts = {}
    crashes = []
    for cp in programs():
        per_seed = []
        for seed in (0, 1, 0):
            try:
                p = build_program(cp.sources())
                t = collect_program(p.units)
                out = synthesize_program(p, t, make_settings({"top_n": "1000", "seed": str(seed)}))
                for a in out.accepted:
                    emit_verilog(a.spec, out.regmaps[a.loop_id])
                build_program(list(out.sources.items()))
                per_seed.append((len(out.accepted), tuple(a.spec.to_json() for a in out.accepted)))
            except Exception as e:  # any crash fails the criterion
                crashes.append(f"{cp.name}: {type(e).__name__}: {e}")
                break
        if per_seed and len(set(per_seed)) != 1:
            crashes.append(f"{cp.name}: accelerator set differs between runs")
        counts[cp.name] = per_seed[0][0] if per_seed else None
    ok = not crashes and len(counts) >= 12
    shown = " ".join(f"{k}={v}" for k, v in counts.items())
    return ok, f"{len(counts)} programs, accelerators: {shown}" + ("; " + "; ".join(crashes) if crashes else "")


def criterion_9() -> tuple:
    n = bad = 0
    for b in _all_built():
        for lid, acc in b.accelerators.items():
            core, wrapper = emit_verilog(acc.spec, b.regmaps[lid])
            n += 1
            bad += len(check_structure(acc.spec, b.regmaps[lid], core, wrapper))
    return bad == 0, f"{n} accelerators checked, {bad} structural violations"


def criterion_10() -> tuple:
    total = caught = 0
    missed = []
    for b in _all_built():
        for lid, acc in sorted(b.accelerators.items()):
            f, loop = b.locate(lid)
            for fault in fault_suite(acc.spec, acc.dfg, OPEN_MODEL):
                total += 1
                d = detect(fault, b.program, f, loop, OPEN_MODEL, trials=1000, seed=0)
                if d.caught:
                    caught += 1
                else:
                    missed.append(d.line())
    return total > 0 and caught == total, f"{caught}/{total} injected faults caught" + (
        "; missed: " + "; ".join(missed) if missed else "")


def _run(record, number, result):
    ok, detail = result
    record(number, ok, detail)
    assert ok, detail


def test_criterion_01_transcript(record, tmp_path):
    _run(record, 1, criterion_1(tmp_path))


def test_criterion_02_selection(record):
    _run(record, 2, criterion_2())


def test_criterion_03_oracle_equivalence(record):
    _run(record, 3, criterion_3())


def test_criterion_04_patch_semantics(record):
    _run(record, 4, criterion_4())


def test_criterion_05_cycle_bounds(record):
    _run(record, 5, criterion_5())


def test_criterion_06_line_of_sight_interface(record):
    _run(record, 6, criterion_6())


def test_criterion_07_timing_arithmetic(record):
    _run(record, 7, criterion_7())


def test_criterion_08_generality(record):
    _run(record, 8, criterion_8())


def test_criterion_09_hdl_structure(record):
    _run(record, 9, criterion_9())


def test_criterion_10_fault_detection(record):
    _run(record, 10, criterion_10())


if __name__ == "__main__":
    import tempfile

    checks = [lambda: criterion_1(Path(tempfile.mkdtemp())), criterion_2, criterion_3, criterion_4, criterion_5,
              criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]
    failed = 0
    for k, check in enumerate(checks, 1):
        ok, detail = check()
        failed += not ok
        print(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    sys.exit(1 if failed else 0)
