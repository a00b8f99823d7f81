from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from loopforge.analyzer import analyze_frequencies
from loopforge.synth.costmodel import CostModel
from loopforge.synth.pipeline import synthesize_loop
from loopforge.verifier.cosim import AccelTiming, ConfigurationError, TimingReport, compare_programs, cosimulate
from loopforge.verifier.equiv import check_equivalence
from loopforge.verifier.faults import detect, drop_dependence, fault_suite, swap_exit_ids
from loopforge.verifier.fsmsim import simulate_fsm
from loopforge.verifier.interp import interpret
from support import OPEN_MODEL, build_sources, corpus, ref_fun1, ref_fun3

MHZ = 10 ** 6


def chain_cosim(args):
    b = corpus("chain")
    f, loop = b.locate(3)
    return cosimulate(b.patched, b.fsms(), CostModel(), "fun1", args, original=b.program, loops={3: (f.name, loop)})


def test_interpreter_regression_values():
    p = corpus("chain").program
    # frozen after agreeing with the Python reference implementations
    assert interpret(p, "fun3", [0, 1]).value == ref_fun3(0, 1) == -4850
    assert interpret(p, "fun1", [0, 1]).value == ref_fun1(0, 1) == 135293508
    assert interpret(p, "fun3", [201, 0]).value == 201


def test_trivial_function_returns_zero():
    p, _ = build_sources([("t.c", "int f(){return 0;}")])
    assert interpret(p, "f", []).value == 0


def test_traps():
    p, _ = build_sources([("e.c", "int A[4]; int g(int x){return 10/x;} int h(int i){return A[i];} "
                                  "int k(){while(1){} return 0;}")])
    assert interpret(p, "g", [0]).trap == "div0"
    assert interpret(p, "h", [4]).trap == "bounds"
    assert interpret(p, "h", [-1]).trap == "bounds"
    assert interpret(p, "k", [], step_limit=1000).trap == "steps"


def test_fun3_break_exit_in_simulation():
    r = simulate_fsm(corpus("chain").accelerators[3].spec, [201, 0])
    assert r.bb_idx == 1 and r.outputs["a_out"] == 201


def test_empty_body_loop_takes_states_times_trips():
    p, t = build_sources([("e.c", "int g(){int i; for(i=0;i<50;i++){} return i;}")])
    spec = synthesize_loop(p, t, 1, OPEN_MODEL, analyze_frequencies(t)[1]).spec
    r = simulate_fsm(spec, [])
    assert r.cycles == spec.state_count() * 50
    assert r.outputs == {"i_out": 50} and r.bb_idx == 1


def test_fun3_equivalence_sees_both_exits():
    b = corpus("chain")
    f, loop = b.locate(3)
    rep = check_equivalence(b.program, f, loop, b.accelerators[3].spec, 1000, 0)
    assert rep.ok and rep.compared == 1000
    assert set(rep.exits_seen) == {1, 2}


def test_swapped_exits_give_a_counterexample():
    b = corpus("chain")
    f, loop = b.locate(3)
    bad = swap_exit_ids(b.accelerators[3].spec).spec
    rep = check_equivalence(b.program, f, loop, bad, 200, 0)
    assert rep.mismatches
    assert "bb_idx" in rep.mismatches[0].text()


def test_single_exit_loop_has_no_swap_fault():
    b = corpus("gcd")
    [acc] = b.accelerators.values()
    assert swap_exit_ids(acc.spec) is None


def test_dropped_dependence_is_caught():
    b = corpus("chain")
    acc = b.accelerators[3]
    f, loop = b.locate(3)
    fault = drop_dependence(acc.spec, acc.dfg, OPEN_MODEL)
    assert fault is not None
    d = detect(fault, b.program, f, loop, OPEN_MODEL, trials=300)
    assert d.caught and "caught" in d.line()


def test_cosim_counts_transfers_per_call():
    res, rep = chain_cosim([0, 1])
    assert res.value == ref_fun1(0, 1)
    [acc] = rep.accelerators
    assert acc.calls == 300
    # a, b written; a_out and bb_idx read
    assert acc.transfers == 4 * 300
    assert rep.transfer_s == Fraction(1200 * 14, 333 * MHZ)
    assert rep.relative_performance == rep.sw_time_s / rep.hw_time_s
    assert "Hardware" in rep.table() and "relative_performance=" in rep.text()


def test_without_accelerators_the_hardware_columns_are_empty():
    b = corpus("chain")
    res, rep = cosimulate(b.patched, {}, CostModel(), "fun1", [0, 1])
    assert res.value == ref_fun1(0, 1)
    assert rep.calls == 0 and rep.relative_performance is None
    hw = rep.table().splitlines()[2]
    assert hw.strip() == "Hardware"


def test_twelve_transfers_cost():
    m = CostModel()
    rep = TimingReport(m, [AccelTiming("x", 1, 1, 1, 12, 2, 0, 0)])
    assert rep.transfer_s == Fraction(12 * 14, 333 * MHZ)
    assert round(float(rep.transfer_s) * 1e6, 3) == 0.505


def test_wrapper_arity_mismatch_is_a_configuration_error():
    b = corpus("chain")
    los = corpus("los")
    other = next(iter(los.accelerators.values())).spec
    with pytest.raises(ConfigurationError):
        cosimulate(b.patched, {3: (other, los.regmaps[other.loop_id])}, CostModel(), "fun1", [0, 1])


def test_whole_program_trials_on_a_multi_exit_program():
    b = corpus("search")
    assert any(len(a.spec.exits) >= 2 for a in b.accelerators.values())
    rep = compare_programs(b.program, b.patched, b.fsms(), CostModel(), b.entry, 100, 3)
    assert rep.ok and rep.compared == 100 and rep.accelerated_calls > 0


def test_fault_suite_on_line_of_sight():
    b = corpus("los")
    for lid, acc in b.accelerators.items():
        f, loop = b.locate(lid)
        for fault in fault_suite(acc.spec, acc.dfg, OPEN_MODEL):
            assert detect(fault, b.program, f, loop, OPEN_MODEL, trials=300).caught, fault.description


timings = st.builds(AccelTiming, st.just("x"), st.integers(1, 9), st.integers(1, 40), st.integers(0, 10 ** 5),
                    st.integers(0, 10 ** 6), st.integers(0, 10 ** 5), st.integers(0, 10 ** 8),
                    st.integers(0, 10 ** 9))


@settings(max_examples=200, deadline=None)
@given(st.lists(timings, max_size=4), st.integers(1, 1000), st.integers(1, 1000), st.integers(0, 60),
       st.integers(0, 200))
def test_timing_identity(accels, fcpu, faccel, reg, overhead):
    m = CostModel(f_cpu=fcpu * MHZ, f_accel=faccel * MHZ, reg_access_cycles=reg, invocation_overhead_cycles=overhead)
    rep = TimingReport(m, accels)
    calls = sum(a.calls for a in accels)
    transfers = sum(a.transfers for a in accels)
    cycles = sum(a.cycles for a in accels)
    hw = Fraction(calls * overhead + transfers * reg + cycles, faccel * MHZ)
    assert rep.hw_time_s == hw
    assert rep.hw_time_s == rep.fixed_overhead_s + rep.transfer_s + rep.compute_s
    assert rep.sw_time_s == Fraction(sum(a.sw_cycles for a in accels), fcpu * MHZ)
    if calls and hw:
        assert rep.relative_performance == rep.sw_time_s / hw
    else:
        assert rep.relative_performance is None
