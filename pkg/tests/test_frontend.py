from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from loopforge.corpus import program as corpus_program
from loopforge.diagnostics import CompileError
from loopforge.frontend import cfg
from loopforge.frontend.ir import Phi
from loopforge.frontend.irtext import format_program, parse_program
from loopforge.frontend.loops import find_loops
from loopforge.frontend.program import build_program, compile_unit
from loopforge.frontend.validate import validate_program

UNIT2 = corpus_program("chain").files[1].read_text()


def test_unit2_has_fun3_with_two_int_params():
    u = compile_unit(UNIT2, "unit2.c")
    [f] = u.functions
    assert f.name == "fun3"
    assert [p.name for p in f.params] == ["a", "b"]


def test_empty_function_has_no_loops():
    u = compile_unit("int f(){return 0;}", "t.c")
    assert len(u.functions) == 1
    assert len(find_loops(u.functions[0])) == 0


def test_float_is_rejected_with_location():
    with pytest.raises(CompileError) as e:
        compile_unit("float x;", "e.c")
    assert "unsupported construct: float" in str(e.value)
    assert str(e.value).startswith("e.c:1:")


def test_syntax_error_names_the_token():
    with pytest.raises(CompileError, match="expected type"):
        compile_unit("int f( {", "e.c")


def test_straight_line_function_is_entry_plus_exit():
    f = compile_unit("int f(int a){int b=a+1; return b*2;}", "s.c").functions[0]
    assert len(f.blocks) == 2
    assert not any(isinstance(s, Phi) for _, s in f.statements())


def test_counted_for_loop_header_has_phis_for_iv_and_accumulator():
    f = compile_unit("int g(){int c=0; int i; for(i=0;i<10;i++) c+=i; return c;}", "l.c").functions[0]
    [loop] = list(find_loops(f))
    phis = [s for s in f.blocks[loop.header].stmts if isinstance(s, Phi)]
    assert sorted(p.dest.split(".")[0] for p in phis) == ["c", "i"]
    assert loop.local_count == 9 and not loop.heuristic


def test_fun3_loop_has_two_exits_and_count_99():
    f = compile_unit(UNIT2, "unit2.c").functions[0]
    [loop] = list(find_loops(f))
    assert len(loop.exits) == 2
    assert loop.local_count == 99


def test_sample_program_counts():
    p = build_program(corpus_program("chain").sources())
    counts = {f.name: [n.local_count for n in find_loops(f)] for f in p.functions()}
    assert counts == {"fun1": [9], "fun2": [29], "fun3": [99]}


def test_unknown_trip_count_uses_heuristic():
    f = compile_unit("int g(int n){int i=0; while(i<n) i++; return i;}", "w.c").functions[0]
    [loop] = list(find_loops(f))
    assert loop.heuristic and loop.local_count == 1000


def test_ir_text_round_trip_on_corpus():
    for name in ("chain", "los", "matmul", "collatz"):
        p = build_program(corpus_program(name).sources())
        text = format_program(p)
        again = parse_program(text)
        assert format_program(again) == text
        validate_program(again)


@settings(max_examples=60, deadline=None)
@given(start=st.integers(-50, 50), trips=st.integers(1, 3000), step=st.integers(1, 7),
       op=st.sampled_from(["<", "<=", "!="]))
def test_counted_loop_local_count_is_trip_minus_one(start, trips, step, op):
    if op == "<":
        bound = start + step * (trips - 1) + 1
    elif op == "<=":
        bound = start + step * (trips - 1)
    else:
        bound = start + step * trips
    src = f"int g(){{int s=0; int i; for(i={start};i{op}{bound};i+={step}) s+=i; return s;}}"
    f = compile_unit(src, "c.c").functions[0]
    [loop] = list(find_loops(f))
    # count iterations by direct simulation
    n, i = 0, start
    while eval(f"{i}{op}{bound}"):
        n += 1
        i += step
    assert n == trips
    assert not loop.heuristic
    assert loop.local_count == trips - 1


def _brute_dominates(succ, entry, a, b):
    # a dominates b iff b is unreachable once a is removed
    if a == b:
        return True
    if a == entry:
        return True
    seen, stack = {entry}, [entry]
    while stack:
        n = stack.pop()
        for s in succ[n]:
            if s != a and s not in seen:
                seen.add(s)
                stack.append(s)
    return b not in seen


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 9))
    succ = {}
    for i in range(n):
        succ[i] = sorted(set(draw(st.lists(st.integers(0, n - 1), max_size=3))))
    return succ


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_dominators_match_brute_force(succ):
    idom = cfg.dominators(succ, 0)
    reach = cfg.reachable(succ, 0)
    assert set(idom) == reach
    for a in reach:
        for b in reach:
            assert cfg.dominates(idom, a, b) == _brute_dominates(succ, 0, a, b)


def test_every_corpus_program_passes_the_ir_validator():
    from loopforge.corpus import programs
    for cp in programs():
        validate_program(build_program(cp.sources()))


def test_uninitialized_read_warns_and_reads_zero():
    from loopforge.diagnostics import Diagnostics
    d = Diagnostics()
    compile_unit("int f(int a){int c; c+=a; return c;}", "u.c", d)
    assert any("used uninitialized" in x.message for x in d.items)
