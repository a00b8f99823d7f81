from __future__ import annotations

import copy

from hypothesis import given, settings, strategies as st

from loopforge.corpus import programs
from loopforge.hdl import (RegEntry, _Names, check_structure, emit_verilog, expected_core_ports, layout_registers,
                           parse_regmap, scan_decoder, scan_ports)
from support import corpus


def fun3():
    b = corpus("chain")
    return b.accelerators[3].spec, b.regmaps[3]


def test_fun3_register_map():
    _, rm = fun3()
    assert rm.text() == ("0x00 control-status CTRL\n0x10 input0 a\n0x14 input1 b\n"
                         "0x18 output0 a_out\n0x1C bb_idx bb_idx\n")
    assert parse_regmap(rm.text()).text() == rm.text()


def test_input_free_map_is_ctrl_and_bb_idx():
    spec, _ = fun3()
    bare = copy.deepcopy(spec)
    bare.inputs, bare.outputs = [], []
    assert [(e.offset, e.name) for e in layout_registers(bare).entries] == [(0, "CTRL"), (0x10, "bb_idx")]


def test_line_of_sight_offsets():
    b = corpus("los")
    lid = next(k for k, a in b.accelerators.items() if a.spec.function == "line_of_sight")
    rm = b.regmaps[lid]
    assert [e.offset for e in rm.inputs] == list(range(0x10, 0x3C, 4))
    assert [(e.offset, e.role) for e in rm.outputs] == [(0x3C, "output0"), (0x40, "bb_idx")]


def test_fun3_core_ports_and_encoding():
    spec, rm = fun3()
    core, wrapper = emit_verilog(spec, rm)
    ports = scan_ports(core)
    assert ports == expected_core_ports(spec)
    assert [p for p, (d, _) in ports.items() if p.startswith("in_")] == ["in_a", "in_b"]
    assert [p for p, (d, _) in ports.items() if p.startswith("out_")] == ["out_a_out", "out_bb_idx"]
    # one-hot: IDLE, one body state, DONE
    assert "reg [2:0] state;" in core and "one-hot" in core
    assert check_structure(spec, rm, core, wrapper) == []


def test_single_state_body_finishes_from_its_only_state():
    spec, rm = fun3()
    assert spec.state_count() == 1
    core, _ = emit_verilog(spec, rm)
    body = core.split("S_L0_0: begin", 1)[1].split("S_DONE: begin", 1)[0]
    assert "done <= 1'b1;" in body and "state <= S_DONE;" in body


def test_decoder_lists_each_register_once():
    for cp in programs():
        b = corpus(cp.name)
        for lid, acc in b.accelerators.items():
            core, wrapper = emit_verilog(acc.spec, b.regmaps[lid])
            names = [n for _, n in scan_decoder(wrapper)]
            assert sorted(names) == sorted(e.name for e in b.regmaps[lid].entries)
            assert check_structure(acc.spec, b.regmaps[lid], core, wrapper) == []


def test_emission_is_deterministic():
    spec, rm = fun3()
    assert emit_verilog(spec, rm) == emit_verilog(copy.deepcopy(spec), copy.deepcopy(rm))


def test_checker_notices_a_missing_decoder_entry():
    spec, rm = fun3()
    core, wrapper = emit_verilog(spec, rm)
    broken = copy.deepcopy(rm)
    broken.entries.append(RegEntry(0x20, "output1", "ghost"))
    assert check_structure(spec, broken, core, wrapper)
    assert check_structure(spec, rm, core.replace("in_b", "in_c"), wrapper)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.from_regex(r"[a-z_.]{1,4}|module|reg|wire", fullmatch=True), max_size=12))
def test_sanitized_names_are_unique_and_legal(raws):
    names = _Names()
    out = [names.get(r) for r in raws]
    distinct = {}
    for r, o in zip(raws, out):
        distinct.setdefault(r, o)
        assert distinct[r] == o
    assert len(set(distinct.values())) == len(distinct)
    assert all(o not in ("module", "reg", "wire") and "." not in o for o in out)
