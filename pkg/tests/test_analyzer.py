from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from loopforge import transcript as T
from loopforge.analyzer import EXTERNAL, analyze_frequencies, rank_and_select
from loopforge.diagnostics import Diagnostics
from test_collector import SAMPLE_TRANSCRIPT


def sample():
    return T.parse(SAMPLE_TRANSCRIPT)


def test_sample_frequencies():
    _, freq = analyze_frequencies(sample())
    assert freq == {"fun1": 1, "fun2": 10, "fun3": 300}


def test_sample_selection_n1():
    t = sample()
    _, freq = analyze_frequencies(t)
    rep = rank_and_select(t, freq, 1)
    assert rep.chosen == [3]
    assert rep.entry(3).total == 30000
    assert rep.entry(1).reason == rep.entry(2).reason == "contains call"
    assert "loop3 total=30000 eligible=1 reason=-" in rep.lines()


def test_single_function_has_frequency_one():
    t = T.parse("a.c\nfunction=f\nloop1\ncount=3\ncall=0\nwell_nested=1\n")
    assert analyze_frequencies(t)[1] == {"f": 1}


def _unit(name, funcs, loops=()):
    return T.UnitSection(name, functions=list(funcs), loops=list(loops))


def test_two_roots_sum():
    t = T.Transcript([_unit("a.c", [T.FunctionRecord("a.c", "r1", ["f"], [("f", 0)]),
                                    T.FunctionRecord("a.c", "r2", ["f"], [("f", 0)]),
                                    T.FunctionRecord("a.c", "f")])])
    assert analyze_frequencies(t)[1]["f"] == 2


def test_unknown_callee_becomes_external_with_warning():
    d = Diagnostics()
    t = T.Transcript([_unit("a.c", [T.FunctionRecord("a.c", "r", ["puts"], [("puts", 0)])])])
    g, freq = analyze_frequencies(t, d)
    assert EXTERNAL in g.nodes and EXTERNAL not in freq
    assert any("puts" in x.message for x in d.items)


def test_recursion_is_collapsed():
    t = T.Transcript([_unit("a.c", [T.FunctionRecord("a.c", "main", ["f"], [("f", 0)]),
                                    T.FunctionRecord("a.c", "f", ["f"], [("f", 0)])])])
    assert analyze_frequencies(t)[1] == {"main": 1, "f": 1}


def test_no_eligible_loops_gives_notice():
    t = T.parse("a.c\nfunction=f\nloop1\ncount=3\ncall=1\nwell_nested=0\n-g\n")
    rep = rank_and_select(t, analyze_frequencies(t)[1], 1)
    assert rep.chosen == [] and rep.notices


def test_fewer_than_n_eligible_gives_notice():
    t = sample()
    rep = rank_and_select(t, analyze_frequencies(t)[1], 5)
    assert rep.chosen == [3]
    assert any("only 1" in n for n in rep.notices)


def test_tie_is_broken_by_unit_then_id():
    body = "b.c\nfunction=g\nloop1\ncount=9\ncall=0\nwell_nested=1\n\na.c\nfunction=f\nloop2\ncount=9\ncall=0\nwell_nested=1\n"
    t = T.parse(body)
    rep = rank_and_select(t, analyze_frequencies(t)[1], 1)
    assert [e.loop_id for e in rep.entries] == [2, 1]
    assert rep.chosen == [2]


def test_bad_arguments():
    t = sample()
    with pytest.raises(ValueError):
        rank_and_select(t, {}, 0)
    with pytest.raises(ValueError):
        rank_and_select(t, {}, 1, key="nope")


def test_nested_loop_total_and_overlap():
    t = T.Transcript([_unit("a.c", [T.FunctionRecord("a.c", "f")], [
        T.LoopRecord(1, "a.c", "f", 9, False, True, parent=0, header=1),
        T.LoopRecord(2, "a.c", "f", 4, False, True, parent=1, header=2)])])
    rep = rank_and_select(t, analyze_frequencies(t)[1], 2)
    assert rep.entry(2).total == 50 and rep.entry(1).total == 10
    assert rep.chosen == [2]
    assert rep.entry(1).reason.startswith("overlaps")


# random acyclic call graphs: f0..fk-1, calls only go from lower to higher index
@st.composite
def call_dags(draw):
    n = draw(st.integers(1, 8))
    names = [f"f{i}" for i in range(n)]
    funcs, loops, sites = [], [], []
    lid = 1
    for i in range(n):
        rec = T.FunctionRecord("a.c", names[i])
        for j in draw(st.lists(st.integers(i + 1, n - 1), max_size=3)) if i < n - 1 else []:
            in_loop = draw(st.booleans())
            if in_loop:
                count = draw(st.integers(0, 20))
                loops.append(T.LoopRecord(lid, "a.c", names[i], count, True, False, [names[j]], header=lid))
                rec.call_sites.append((names[j], lid))
                sites.append((i, j, count + 1))
                lid += 1
            else:
                rec.call_sites.append((names[j], 0))
                sites.append((i, j, 1))
            if names[j] not in rec.callees:
                rec.callees.append(names[j])
        funcs.append(rec)
    t = T.Transcript([_unit("a.c", funcs, loops)], next_loop=lid)
    return t, n, sites


def _paths(n, sites):
    called = {j for _, j, _ in sites}
    total = {}

    def walk(i, w):
        total[i] = total.get(i, 0) + w
        for a, b, sw in sites:
            if a == i:
                walk(b, w * sw)

    for r in range(n):
        if r not in called:
            walk(r, 1)
    return total


@settings(max_examples=200, deadline=None)
@given(call_dags())
def test_frequencies_equal_path_enumeration(case):
    t, n, sites = case
    _, freq = analyze_frequencies(t)
    want = _paths(n, sites)
    assert {k: int(v) for k, v in freq.items()} == {f"f{i}": want[i] for i in range(n)}


@st.composite
def loop_sets(draw):
    k = draw(st.integers(1, 8))
    units = []
    for i in range(k):
        units.append(_unit(f"u{draw(st.integers(0, 2))}_{i}.c", [T.FunctionRecord(f"u{i}", f"g{i}")],
                           [T.LoopRecord(i + 1, "", f"g{i}", draw(st.integers(0, 50)), False,
                                         draw(st.booleans()), header=1)]))
    for u in units:
        for r in u.loops + u.functions:
            r.unit = u.name
    freq = {f"g{i}": Fraction(draw(st.integers(1, 9))) for i in range(k)}
    return T.Transcript(units, next_loop=k + 1), freq


def _order(rep):
    return [e.loop_id for e in rep.entries]


@settings(max_examples=150, deadline=None)
@given(loop_sets(), st.fractions(min_value=Fraction(1, 7), max_value=50))
def test_ranking_is_scale_invariant(case, c):
    t, freq = case
    a = rank_and_select(t, freq, 3)
    b = rank_and_select(t, {k: v * c for k, v in freq.items()}, 3)
    assert _order(a) == _order(b) and a.chosen == b.chosen


@settings(max_examples=150, deadline=None)
@given(loop_sets(), st.data())
def test_raising_a_count_never_lowers_rank(case, data):
    t, freq = case
    rec = data.draw(st.sampled_from(t.loops()))
    before = _order(rank_and_select(t, freq, 1)).index(rec.loop_id)
    rec.local_count += data.draw(st.integers(1, 100))
    after = _order(rank_and_select(t, freq, 1)).index(rec.loop_id)
    assert after <= before


@settings(max_examples=100, deadline=None)
@given(loop_sets(), st.integers(1, 8))
def test_chosen_loops_are_eligible(case, n):
    t, freq = case
    rep = rank_and_select(t, freq, n)
    for lid in rep.chosen:
        rec = t.loop(lid)
        assert rec.well_nested and not rec.has_call
