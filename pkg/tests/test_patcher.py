from __future__ import annotations

import random
import shutil
import subprocess

import pytest

from loopforge.analyzer import analyze_frequencies
from loopforge.diagnostics import Diagnostics
from loopforge.frontend.ir import Branch, Call
from loopforge.frontend.program import build_program
from loopforge.frontend.validate import validate_program
from loopforge.hdl import layout_registers
from loopforge.patcher import emit_c, emit_runtime, make_wrapper, patch_program, wrapper_spec
from loopforge.synth.pipeline import synthesize_loop
from loopforge.verifier.equiv import random_value
from loopforge.verifier.interp import interpret
from support import OPEN_MODEL, build_sources, corpus, ref_fun3


def patched_chain():
    b = corpus("chain")
    f, loop = b.locate(3)
    return b, patch_program(b.program, [(3, f.name, loop, b.accelerators[3].spec)], b.regmaps, Diagnostics())


def test_fun3_wrapper_signature_and_register_order():
    b = corpus("chain")
    text = make_wrapper(b.accelerators[3].spec, b.regmaps[3])
    assert text.startswith("int __accel_call_3(int a, int b, int *a_out) {")
    order = [line.strip() for line in text.splitlines() if "__accel_" in line and "(base" in line]
    assert order == ["__accel_write(base, 16, a);", "__accel_write(base, 20, b);", "__accel_write(base, 0, 1);",
                     "while ((__accel_read(base, 0) & 2) == 0) {", "*a_out = __accel_read(base, 24);",
                     "return __accel_read(base, 28);"]


def test_output_free_wrapper_returns_only_bb_idx():
    src = "int A[16]; int g(int c,int x,int y){int i; int r=0; for(i=0;i<16;i++){ if(c) r=x; else r=y; A[i]=r;} return 0;}"
    p, t = build_sources([("s.c", src)])
    spec = synthesize_loop(p, t, 1, OPEN_MODEL, analyze_frequencies(t)[1]).spec
    text = make_wrapper(spec, layout_registers(spec))
    assert "*" not in text.splitlines()[0]
    assert wrapper_spec(spec).outputs == []


def test_line_of_sight_wrapper_transfers():
    b = corpus("los")
    lid = next(k for k, a in b.accelerators.items() if a.spec.function == "line_of_sight")
    text = make_wrapper(b.accelerators[lid].spec, b.regmaps[lid])
    writes = [l for l in text.splitlines() if "__accel_write" in l and ", 0, 1)" not in l]
    reads = [l for l in text.splitlines() if "__accel_read" in l and "(base, 0)" not in l]
    assert len(writes) == 11 and len(reads) == 2


def test_fun3_dispatch_shape():
    b, (patched, plans, _) = patched_chain()
    [plan] = plans
    assert plan.function == "fun3" and sorted(plan.dispatch) == [1, 2]
    f = patched.function("fun3")
    call = f.blocks[plan.call_block]
    assert any(isinstance(s, Call) and s.func == "__accel_call_3" for s in call.stmts)
    # one compare-and-branch per exit id, the last one falls back to the loop header
    bid = call.term.target
    for _ in plan.dispatch:
        blk = f.blocks[bid]
        assert isinstance(blk.term, Branch)
        bid = blk.term.else_
    assert bid == plan.header
    validate_program(patched)


def test_single_exit_loop_gets_one_test():
    b = corpus("gcd")
    [lid] = b.accelerators
    f, loop = b.locate(lid)
    _, plans, _ = patch_program(b.program, [(lid, f.name, loop, b.accelerators[lid].spec)], b.regmaps, Diagnostics())
    assert len(plans[0].dispatch) == len(b.accelerators[lid].spec.exits) == 1


def test_fallback_matches_original_on_random_inputs():
    b, (patched, _, _) = patched_chain()
    rng = random.Random(7)
    for _ in range(1000):
        a, c = random_value(rng), random_value(rng)
        r = interpret(patched, "fun3", [a, c])
        assert r.value == ref_fun3(a, c)


def test_emitted_c_reparses_with_the_call_in_unit2():
    _, (patched, _, _) = patched_chain()
    files = emit_c(patched)
    assert sorted(files) == ["unit1.c", "unit2.c"]
    assert "__accel_call_3" in files["unit2.c"] and "__accel_call_3" not in files["unit1.c"]
    again = build_program(list(files.items()))
    validate_program(again)
    assert again.function("__accel_call_3") is not None


def test_unpatched_program_round_trips_through_c():
    b = corpus("chain")
    again = build_program(list(emit_c(b.program).items()))
    for a, c in [(0, 1), (201, 0), (-5, 3)]:
        assert interpret(again, "fun1", [a, c]).value == interpret(b.program, "fun1", [a, c]).value


@pytest.mark.skipif(shutil.which("cc") is None, reason="no C compiler")
def test_emitted_c_is_accepted_by_a_c_compiler(tmp_path):
    b = corpus("los")
    for name, text in emit_c(b.patched).items():
        (tmp_path / name).write_text(text)
    (tmp_path / "accel_runtime.c").write_text(emit_runtime(sorted(b.accelerators)))
    for p in sorted(tmp_path.glob("*.c")):
        r = subprocess.run(["cc", "-std=c99", "-fsyntax-only", "-Wall", "-Wno-unused", str(p)],
                           capture_output=True, text=True)
        assert r.returncode == 0, r.stderr


def test_runtime_table_uses_strided_bases():
    text = emit_runtime([1, 4])
    assert "{ 1, 0x43C00000u }" in text and "{ 4, 0x43C10000u }" in text
