from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from loopforge import transcript as T
from loopforge.collector import append_transcript, collect_program, collect_unit
from loopforge.corpus import program as corpus_program
from loopforge.frontend.program import build_program, compile_unit

SAMPLE_TRANSCRIPT = """\
unit1.c
function=fun2
loop1
count=29
call=1
well_nested=0
-fun3
function=fun1
loop2
count=9
call=1
well_nested=0
-fun2

unit2.c
function=fun3
loop3
count=99
call=0
well_nested=1
"""


def chain_transcript():
    p = build_program(corpus_program("chain").sources())
    return collect_program(p.units)


def test_sample_transcript_body_is_exact():
    text = T.serialize(chain_transcript())
    assert T.body_text(text) == SAMPLE_TRANSCRIPT
    assert text.startswith(T.MAGIC)
    # everything before the body is comment lines
    head = text[: len(text) - len(SAMPLE_TRANSCRIPT)]
    assert all(line.startswith("#") for line in head.splitlines())


def test_checksums_recorded_per_unit():
    t = chain_transcript()
    for u, (_, src) in zip(t.units, corpus_program("chain").sources()):
        assert len(u.checksum) == 64
    assert t.units[0].checksum != t.units[1].checksum


def test_repeated_callee_is_listed_once():
    u = compile_unit("int h(int x){return x;} int g(){int i; int s=0; for(i=0;i<8;i++){s+=h(i); s+=h(s);} return s;}",
                     "m.c")
    [rec] = collect_unit(u, 1).loops
    assert rec.callees == ["h"]
    assert rec.has_call and not rec.well_nested


def test_array_store_loop_records_memory_and_stays_well_nested():
    u = compile_unit("int A[8]; void g(){int i; for(i=0;i<8;i++) A[i]=i;}", "a.c")
    t = collect_program([u])
    [rec] = t.loops()
    assert rec.mem_accesses == 1 and rec.well_nested
    assert "mem=1\n" in T.body_text(T.serialize(t))


def test_unit_without_loops_is_only_its_name():
    t = collect_program([compile_unit("int f(){return 0;}", "z.c")])
    assert T.body_text(T.serialize(t)) == "z.c\n"


def test_recompiled_unit_replaces_its_section(tmp_path):
    path = tmp_path / "t.txt"
    T.write(path, chain_transcript())
    changed = compile_unit("int fun3(int a, int b) { return a + b; }", "unit2.c")
    t = append_transcript(path, changed)
    assert [u.name for u in t.units] == ["unit1.c", "unit2.c"]
    assert t.unit("unit2.c").loops == []
    assert [l.loop_id for l in T.read(path).loops()] == [1, 2]


def test_collection_is_deterministic():
    assert T.serialize(chain_transcript()) == T.serialize(chain_transcript())


def test_parse_rejects_bad_count_with_line_number():
    bad = SAMPLE_TRANSCRIPT.replace("count=29", "count=abc")
    with pytest.raises(T.TranscriptError) as e:
        T.parse(bad)
    assert e.value.line == 4


def test_parse_of_plain_sample_body():
    t = T.parse(SAMPLE_TRANSCRIPT)
    assert [(l.loop_id, l.function, l.local_count, l.has_call, l.well_nested) for l in t.loops()] == [
        (1, "fun2", 29, True, False), (2, "fun1", 9, True, False), (3, "fun3", 99, False, True)]
    assert t.loop(1).callees == ["fun3"]


def test_empty_transcript_parses_to_nothing():
    assert T.parse("").units == []


idents = st.from_regex(r"[a-z][a-z0-9_]{0,5}", fullmatch=True)


@st.composite
def transcripts(draw):
    t = T.Transcript()
    next_id = 1
    for k in range(draw(st.integers(0, 3))):
        unit = f"u{k}.c"
        sec = T.UnitSection(unit, checksum="ab" * 32)
        names = draw(st.lists(idents, unique=True, max_size=3))
        for name in names:
            callees = draw(st.lists(idents, unique=True, max_size=2))
            sec.functions.append(T.FunctionRecord(unit, name, callees, [(c, 0) for c in callees]))
            parent = 0
            for _ in range(draw(st.integers(0, 2))):
                lc = draw(st.lists(idents, unique=True, max_size=2))
                rec = T.LoopRecord(next_id, unit, name, draw(st.integers(0, 10 ** 6)), bool(lc),
                                   not lc and draw(st.booleans()), lc, draw(st.integers(0, 3)),
                                   parent=parent, header=draw(st.integers(1, 40)), stmts=draw(st.integers(0, 99)))
                if draw(st.booleans()):
                    parent = next_id
                sec.loops.append(rec)
                next_id += 1
        t.units.append(sec)
    t.next_loop = next_id
    return t


@settings(max_examples=150, deadline=None)
@given(transcripts())
def test_serialize_parse_round_trip(t):
    text = T.serialize(t)
    again = T.parse(text)
    assert T.serialize(again) == text
    assert [(l.loop_id, l.function, l.local_count, l.callees) for l in again.loops()] == [
        (l.loop_id, l.function, l.local_count, l.callees) for l in t.loops()]
