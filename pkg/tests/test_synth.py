from __future__ import annotations

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from loopforge.analyzer import analyze_frequencies
from loopforge.synth.costmodel import CostModel, cost_model_from_config, parse_frequency
from loopforge.synth.dfg import Dfg, Level, Node
from loopforge.synth.estimate import decide, estimate_and_filter
from loopforge.synth.fsm import build_fsm, from_json, to_text, validate_fsm
from loopforge.synth.pipeline import synthesize_loop
from loopforge.synth.schedule import ScheduleError, check_schedule, schedule
from support import OPEN_MODEL, build_sources, corpus

MHZ = 10 ** 6


def make_dfg(ops: list, edges: list) -> Dfg:
    nodes = [Node(i, op, f"v{i}" if op != "store" else None, [], 0, i, array="A" if op in ("load", "store") else None)
             for i, op in enumerate(ops)]
    lv = Level(0, 0, None, {0}, list(range(len(ops))), {}, nodes=list(range(len(ops))))
    return Dfg("f", 0, nodes, [(u, v, "data") for u, v in edges], [lv], [], [])


def n_states(sched) -> int:
    return len(sched.states[0])


def legal(dfg, sched, model) -> list:
    table = {n.id: (n.op, n.level) for n in dfg.nodes}
    return check_schedule(table, dfg.edges, sched.state, sched.pos, sched.arrival, model)


UNIT_ADD = CostModel(clock_budget=2, op_delay={**CostModel().op_delay, "add": 1})


def test_add_chain_fits_two_states():
    d = make_dfg(["add"] * 3, [(0, 1), (1, 2)])
    s = schedule(d, UNIT_ADD)
    assert n_states(s) == 2
    assert legal(d, s, UNIT_ADD) == []


def test_single_node_is_one_state():
    s = schedule(make_dfg(["add"], []), CostModel())
    assert n_states(s) == 1


def test_independent_adds_share_state_zero():
    s = schedule(make_dfg(["add", "add"], []), CostModel())
    assert s.state[0] == s.state[1] == 0


def test_over_budget_op_is_unschedulable():
    m = CostModel(clock_budget=2, op_delay={**CostModel().op_delay, "compare": 5})
    with pytest.raises(ScheduleError, match="unschedulable operation"):
        schedule(make_dfg(["lt"], []), m)


def test_slow_divider_becomes_multicycle():
    m = CostModel()
    s = schedule(make_dfg(["add", "div", "add"], [(0, 1), (1, 2)]), m)
    assert m.multicycle("div") == 2
    assert n_states(s) == 3 and legal(make_dfg(["add", "div", "add"], [(0, 1), (1, 2)]), s, m) == []


def test_two_memory_accesses_never_share_a_state():
    d = make_dfg(["load", "load"], [])
    s = schedule(d, CostModel())
    assert s.state[0] != s.state[1]


@st.composite
def comb_dags(draw, max_nodes=5):
    n = draw(st.integers(1, max_nodes))
    ops = draw(st.lists(st.sampled_from(["add", "lt", "and", "shl", "mul", "copy"]), min_size=n, max_size=n))
    edges = [(u, v) for v in range(n) for u in range(v) if draw(st.booleans())]
    return ops, edges


def _optimal_states(ops, edges, model) -> int:
    n = len(ops)
    preds = {v: [u for u, w in edges if w == v] for v in range(n)}
    best = n
    for assign in itertools.product(range(n), repeat=n):
        if max(assign) + 1 >= best:
            continue
        arrival, ok = {}, True
        for v in range(n):
            start = 0
            for u in preds[v]:
                if assign[u] > assign[v]:
                    ok = False
                elif assign[u] == assign[v]:
                    start = max(start, arrival[u])
            arrival[v] = start + model.delay(ops[v])
            if not ok or arrival[v] > model.clock_budget:
                ok = False
                break
        if ok:
            best = max(assign) + 1
    return best


@settings(max_examples=80, deadline=None)
@given(comb_dags())
def test_list_schedule_matches_brute_force_optimum(case):
    ops, edges = case
    model = CostModel()
    d = make_dfg(ops, edges)
    s = schedule(d, model)
    assert legal(d, s, model) == []
    assert n_states(s) == _optimal_states(ops, edges, model)


@st.composite
def mixed_dags(draw):
    n = draw(st.integers(1, 12))
    ops = draw(st.lists(st.sampled_from(["add", "lt", "mul", "div", "load", "store", "select"]),
                        min_size=n, max_size=n))
    edges = [(u, v) for v in range(n) for u in range(v) if ops[u] != "store" and draw(st.booleans())]
    return ops, edges


@settings(max_examples=150, deadline=None)
@given(mixed_dags(), st.integers(2, 12))
def test_schedules_are_legal(case, budget):
    ops, edges = case
    model = CostModel(clock_budget=budget, op_delay={**CostModel().op_delay, "add": 1, "compare": 1, "logic": 1})
    d = make_dfg(ops, edges)
    s = schedule(d, model)
    assert legal(d, s, model) == []
    assert sorted(s.state) == list(range(len(ops)))


def test_fun3_dfg_shape():
    acc = corpus("chain").accelerators[3]
    ops = sorted(n.op for n in acc.dfg.nodes)
    assert ops.count("add") == 3 and "gt" in ops and "lt" in ops
    # exit 1 is the break taken when a > 200, exit 2 the exhausted counter
    lv = acc.dfg.levels[0]
    gt = next(n for n in acc.dfg.nodes if n.op == "gt")
    assert lv.exit_preds[0] == gt.dest
    assert len(lv.exits) == 2


def test_branch_free_loop_has_no_predicates():
    p, t = build_sources([("s.c", "int g(int a){int i; for(i=0;i<8;i++) a=a*3+1; return a;}")])
    acc = synthesize_loop(p, t, 1, OPEN_MODEL, analyze_frequencies(t)[1])
    assert all(n.pred is None for n in acc.dfg.nodes)
    assert not any(n.op == "select" for n in acc.dfg.nodes)


def test_if_else_becomes_select_with_both_arms():
    src = "int A[16]; int g(int c,int x,int y){int i; int r=0; for(i=0;i<16;i++){ if(c) r=x; else r=y; A[i]=r;} return 0;}"
    p, t = build_sources([("s.c", src)])
    acc = synthesize_loop(p, t, 1, OPEN_MODEL, analyze_frequencies(t)[1])
    [sel] = [n for n in acc.dfg.nodes if n.op == "select"]
    copies = {n.dest for n in acc.dfg.nodes if n.op == "copy" and n.pred is None}
    assert set(sel.args[1:]) == copies and len(copies) == 2
    [store] = [n for n in acc.dfg.nodes if n.op == "store"]
    assert store.pred is not None
    assert acc.spec.output_names == ["bb_idx"]


def test_fun3_fsm_interface():
    spec = corpus("chain").accelerators[3].spec
    assert spec.input_names == ["a", "b"]
    assert spec.output_names == ["a_out", "bb_idx"]
    assert [(e.id, e.source, e.target) for e in spec.exits] == [(1, 1, 3), (2, 2, 3)]
    assert spec.best_cycles <= spec.worst_cycles
    assert validate_fsm(spec, CostModel()) == []


def test_line_of_sight_interface():
    b = corpus("los")
    spec = next(a.spec for a in b.accelerators.values() if a.spec.function == "line_of_sight")
    assert len(spec.inputs) == 11
    assert len(spec.outputs) == 1 and spec.output_names[-1] == "bb_idx"


def test_fsm_json_round_trip_and_determinism():
    b = corpus("matmul")
    for lid, acc in b.accelerators.items():
        assert from_json(acc.spec.to_json()).to_json() == acc.spec.to_json()
        again = synthesize_loop(b.program, b.transcript, lid, OPEN_MODEL, b.freq)
        assert again.spec.to_json() == acc.spec.to_json()
        assert to_text(again.spec) == to_text(acc.spec)


def test_fun3_estimate_by_hand():
    est = corpus("chain").accelerators[3].estimate
    # 300 calls x (50 + 14 x 4 registers) + 30000 iterations x 1 cycle, at 333 MHz
    assert est.hw_time_s == Fraction(300 * (50 + 14 * 4) + 30000 * 1, 333 * MHZ)
    # per iteration: 5 simple ops and 2 branches of 2 cycles, at 666 MHz
    assert est.sw_time_s == Fraction(30000 * 9, 666 * MHZ)
    assert est.speedup == est.sw_time_s / est.hw_time_s
    assert est.accepted


def test_trivial_estimate_gives_two():
    spec = corpus("chain").accelerators[3].spec
    m = CostModel(f_cpu=1, f_accel=1, invocation_overhead_cycles=0, reg_access_cycles=0)
    est = estimate_and_filter(spec, m, 1000, 2 * 1000)
    assert est.speedup == 2 and est.accepted


def test_slower_hardware_is_rejected():
    speedup, ok, reason = decide(Fraction(62, MHZ), Fraction(126, MHZ), 1)
    assert round(float(speedup), 2) == 0.49
    assert not ok and "below the threshold" in reason
    assert decide(Fraction(62, MHZ), Fraction(126, MHZ), 0)[1]


def test_cost_model_config():
    m = cost_model_from_config({"f_cpu": "1GHz", "op_delay.add": "3", "min_speedup": "3/2"})
    assert m.f_cpu == 10 ** 9 and m.delay("add") == 3 and m.min_speedup == Fraction(3, 2)
    assert parse_frequency("333MHz") == 333 * MHZ
    with pytest.raises(ValueError):
        CostModel(f_accel=0)


def test_every_corpus_fsm_validates_and_bounds_are_ordered():
    from loopforge.corpus import programs
    for cp in programs():
        for acc in corpus(cp.name).accelerators.values():
            assert validate_fsm(acc.spec, OPEN_MODEL) == [], acc.spec.name
            assert 1 <= acc.spec.best_cycles <= acc.spec.worst_cycles


def test_build_fsm_uses_the_schedule():
    acc = corpus("chain").accelerators[3]
    spec = build_fsm("x", 3, "unit2.c", acc.dfg, acc.schedule, OPEN_MODEL, {})
    assert spec.state_count() == sum(len(v) for v in acc.schedule.states.values())
