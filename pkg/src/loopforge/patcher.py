"""Insert accelerator calls in front of synthesized loops and re-emit the program as C.

The original loop is kept: a wrapper call runs first, and its return value
(the exit id, or 0 when no accelerator answered) selects either a post-loop
block or the untouched software loop.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from . import arith
from .diagnostics import Diagnostics
from .frontend.ir import (Assign, BasicBlock, Branch, Call, Goto, Load, MirFunction, MirProgram,
                          Store, TranslationUnit, defined_values, var_of)
from .frontend.loops import LoopNode
from .frontend.lower import INTRINSICS
from .frontend.program import compile_unit
from .frontend.ssa import construct_ssa, destruct_ssa, fold_constants, insert_preheaders, renumber
from .hdl import RegisterMap
from .synth.fsm import FsmSpec

CTRL = 0x00
START = 1
DONE_BIT = 2


class PatchError(Exception):
    pass


def wrapper_name(loop_id: int) -> str:
    return f"__accel_call_{loop_id}"


@dataclass
class WrapperSpec:
    name: str
    loop_id: int
    inputs: list
    outputs: list

    def prototype(self) -> str:
        params = [f"int {n}" for n in self.inputs] + [f"int *{n}" for n in self.outputs]
        return f"int {self.name}({', '.join(params) or 'void'})"


def wrapper_spec(spec: FsmSpec) -> WrapperSpec:
    return WrapperSpec(wrapper_name(spec.loop_id), spec.loop_id, spec.input_names,
                       [o.name for o in spec.outputs])


def make_wrapper(spec: FsmSpec, regmap: RegisterMap) -> str:
    w = wrapper_spec(spec)
    lines = [w.prototype() + " {",
             "    int base;",
             f"    base = __accel_base({spec.loop_id});",
             "    if (base == 0)",
             "        return 0;"]
    for e in regmap.inputs:
        lines.append(f"    __accel_write(base, {e.offset}, {e.name});")
    lines += [f"    __accel_write(base, {CTRL}, {START});",
              f"    while ((__accel_read(base, {CTRL}) & {DONE_BIT}) == 0) {{",
              "    }"]
    for e in regmap.outputs:
        if e.role == "bb_idx":
            continue
        lines.append(f"    *{e.name} = __accel_read(base, {e.offset});")
    lines.append(f"    return __accel_read(base, {regmap.offset_of('bb_idx')});")
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass
class PatchPlan:
    loop_id: int
    function: str
    call_block: int
    dispatch: dict  # exit id -> block the exit edge leads to
    temporaries: list  # [(output register, temporary variable)]
    result: str  # variable receiving bb_idx
    header: int
    notes: list = field(default_factory=list)

    def text(self) -> str:
        lines = [f"loop={self.loop_id} function={self.function} call_block=bb{self.call_block} header=bb{self.header}",
                 f"result={self.result}"]
        for k, t in sorted(self.dispatch.items()):
            lines.append(f"dispatch {k} -> bb{t}")
        lines.append("dispatch 0 -> software loop")
        for o, t in self.temporaries:
            lines.append(f"temporary {o} -> {t}")
        return "\n".join(lines) + "\n"


@dataclass
class _Site:
    loop_id: int
    loop: LoopNode
    spec: FsmSpec


def _patch_function(f: MirFunction, sites: list, diags: Diagnostics) -> list:
    """Rewrite ``f`` (SSA) in place; return one PatchPlan per site."""
    destruct_ssa(f)
    pending = []
    for site in sites:
        loop, spec = site.loop, site.spec
        header = loop.header
        if not [p for p in f.predecessors()[header] if p not in loop.body]:
            raise PatchError(f"loop{site.loop_id}: header bb{header} has no entry edge")
        result = f"__bb{site.loop_id}"
        temps = [(o.name, f"__acc{site.loop_id}_{o.name}") for o in spec.outputs]
        call_id = f.next_block_id()
        args = [var_of(v) for _, v in spec.inputs] + [0] * len(temps)
        call = Call(result, wrapper_name(site.loop_id), args, [t for _, t in temps])
        f.blocks[call_id] = BasicBlock(call_id, [call], None)
        marks = {"call": call_id, "moves": {}, "own": {call_id}}
        tests = []
        for e in spec.exits:
            test_id = f.next_block_id()
            cond = f"{result}_is{e.id}"
            f.blocks[test_id] = BasicBlock(test_id, [Assign(cond, "eq", [result, e.id])], None)
            move_id = f.next_block_id()
            moves = [Assign(out.var, "copy", [tmp]) for out, (_, tmp) in zip(spec.outputs, temps)
                     if out.sources[e.index] is not None]
            f.blocks[move_id] = BasicBlock(move_id, moves, Goto(e.target))
            tests.append((test_id, cond, move_id))
            marks["moves"][e.id] = (move_id, e.target)
            marks["own"].add(test_id)
        # a failed test moves on to the next one; the last falls back to the software loop
        nexts = [t for t, _, _ in tests[1:]] + [header]
        for (test_id, cond, move_id), nxt in zip(tests, nexts):
            f.blocks[test_id].term = Branch(cond, move_id, nxt)
        f.blocks[call_id].term = Goto(tests[0][0] if tests else header)
        pending.append((site, marks, result, temps))
    # every way into a loop from outside now passes through its accelerator call,
    # including exits of another accelerated loop that lead straight to this header
    for site, marks, _, _ in pending:
        header = site.loop.header
        for p in f.predecessors()[header]:
            if p not in site.loop.body and p not in marks["own"]:
                _retarget(f.blocks[p], header, marks["call"])
    insert_preheaders(f)
    m1 = renumber(f)
    construct_ssa(f, diags)
    fold_constants(f)
    m2 = renumber(f)

    def final(b):
        return m2.get(m1.get(b, b), -1)

    plans = []
    for site, marks, result, temps in pending:
        dispatch = {k: final(target) for k, (_, target) in marks["moves"].items()}
        plans.append(PatchPlan(site.loop_id, f.name, final(marks["call"]), dispatch, temps, result,
                               final(site.loop.header)))
    return plans


def _retarget(block: BasicBlock, old: int, new: int) -> None:
    t = block.term
    if isinstance(t, Goto):
        block.term = Goto(new if t.target == old else t.target)
    elif isinstance(t, Branch):
        block.term = Branch(t.cond, new if t.then == old else t.then, new if t.else_ == old else t.else_)


def patch_program(program: MirProgram, accelerators: list, regmaps: dict,
                  diags: Diagnostics | None = None) -> tuple:
    """Patch every accelerated loop.  ``accelerators`` holds (loop id, function name, LoopNode, FsmSpec).

    Returns (patched program, [PatchPlan], {unit name: [wrapper C text]}).
    The input program is not modified.
    """
    diags = diags or Diagnostics()
    p = copy.deepcopy(program)
    by_function = {}
    for loop_id, fname, loop, spec in accelerators:
        f = p.function(fname)
        if f is None or loop.header not in f.blocks:
            raise PatchError(f"loop{loop_id}: loop no longer present in '{fname}' (stale selection)")
        by_function.setdefault(fname, []).append(_Site(loop_id, loop, spec))
    plans = []
    wrappers = {}
    for fname, sites in by_function.items():
        f = p.function(fname)
        plans += _patch_function(f, sites, diags)
        unit = p.unit_of(fname)
        for site in sites:
            text = make_wrapper(site.spec, regmaps[site.loop_id])
            wrappers.setdefault(unit.name, []).append(text)
            wu = compile_unit(text, unit.name, diags)
            for wf in wu.functions:
                wf.unit = unit.name
                unit.functions.append(wf)
    plans.sort(key=lambda pl: pl.loop_id)
    return p, plans, wrappers


def patch_ir(program: MirProgram, fname: str, loop_id: int, loop: LoopNode, spec: FsmSpec,
             regmap: RegisterMap, diags: Diagnostics | None = None) -> tuple:
    p, plans, _ = patch_program(program, [(loop_id, fname, loop, spec)], {loop_id: regmap}, diags)
    return p, plans[0]


# C emission

def _c_const(v: int) -> str:
    v = arith.wrap(v)
    if v == arith.INT_MIN:
        return "(-2147483647 - 1)"
    return f"({v})" if v < 0 else str(v)


class _CWriter:
    def __init__(self, f: MirFunction, unit: TranslationUnit, program: MirProgram):
        self.f = f
        self.unit = unit
        self.program = program
        self.outs = {p.name for p in f.params if p.out}
        self.scalars = {g.name for g in program.globals().values() if g.scalar}

    def var(self, v) -> str:
        if isinstance(v, int):
            return _c_const(v)
        return f"*{v}" if v in self.outs else v

    def lhs(self, v) -> str:
        return f"*{v}" if v in self.outs else v

    def mem(self, array, index) -> str:
        if array in self.scalars:
            return array
        return f"{array}[{self.var(index)}]"

    def stmt(self, s) -> str:
        if isinstance(s, Assign):
            if s.op == "const":
                return f"{self.lhs(s.dest)} = {_c_const(s.args[0])};"
            if s.op == "copy":
                return f"{self.lhs(s.dest)} = {self.var(s.args[0])};"
            if len(s.args) == 1:
                return f"{self.lhs(s.dest)} = {arith.C_SYMBOL[s.op]}{self.var(s.args[0])};"
            a, b = self.var(s.args[0]), self.var(s.args[1])
            return f"{self.lhs(s.dest)} = {a} {arith.C_SYMBOL[s.op]} {b};"
        if isinstance(s, Load):
            return f"{self.lhs(s.dest)} = {self.mem(s.array, s.index)};"
        if isinstance(s, Store):
            return f"{self.mem(s.array, s.index)} = {self.var(s.value)};"
        if isinstance(s, Call):
            sig = self.program.signature(s.func)
            outs = list(s.outs)
            out_pos = set(sig.out_params) if sig is not None else set()
            args = []
            for i, a in enumerate(s.args):
                args.append(f"&{outs.pop(0)}" if i in out_pos else self.var(a))
            call = f"{s.func}({', '.join(args)})"
            return f"{self.lhs(s.dest)} = {call};" if s.dest is not None else f"{call};"
        raise TypeError(f"cannot render {s!r}")

    def term(self, t) -> str:
        if isinstance(t, Goto):
            return f"goto bb{t.target};"
        if isinstance(t, Branch):
            return f"if ({self.var(t.cond)}) goto bb{t.then}; else goto bb{t.else_};"
        if t.value is None:
            return "return;"
        return f"return {self.var(t.value)};"

    def emit(self) -> str:
        f = self.f
        params = [f"int *{p.name}" if p.out else f"int {p.name}" for p in f.params]
        head = f"{'int' if f.returns_value else 'void'} {f.name}({', '.join(params) or 'void'})"
        lines = [head + " {"]
        pnames = {p.name for p in f.params}
        declared = []
        for _, s in f.statements():
            for d in defined_values(s):
                if d not in pnames and d not in declared:
                    declared.append(d)
        for arr, size in f.arrays.items():
            lines.append(f"    int {arr}[{size}];")
        for v in declared:
            lines.append(f"    int {v};")
        for b in f:
            lines.append(f"bb{b.id}:")
            for s in b.stmts:
                lines.append("    " + self.stmt(s))
            lines.append("    " + self.term(b.term))
        lines.append("}")
        return "\n".join(lines) + "\n"


def _signature_text(name: str, program: MirProgram) -> str | None:
    f = program.function(name)
    if f is not None:
        params = [f"int *{p.name}" if p.out else f"int {p.name}" for p in f.params]
        return f"{'int' if f.returns_value else 'void'} {name}({', '.join(params) or 'void'});"
    sig = program.signature(name)
    if sig is None:
        return None
    params = [f"int *p{i}" if i in sig.out_params else f"int p{i}" for i in range(sig.nparams)]
    return f"{'int' if sig.returns_value else 'void'} {name}({', '.join(params) or 'void'});"


def emit_unit(unit: TranslationUnit, program: MirProgram) -> str:
    """C source for one unit of a (possibly patched) program."""
    out = []
    for g in unit.globals.values():
        if g.scalar:
            init = f" = {_c_const(g.init[0])}" if g.init else ""
            out.append(f"int {g.name}{init};")
        else:
            init = (" = {" + ", ".join(_c_const(v) for v in g.init) + "}") if g.init else ""
            out.append(f"int {g.name}[{g.size}]{init};")
    for g in unit.externs.values():
        out.append(f"extern int {g.name}" + (f"[{g.size}];" if not g.scalar else ";"))
    called = []
    for f in unit.functions:
        for _, s in f.statements():
            if isinstance(s, Call) and s.func not in INTRINSICS and s.func not in called:
                called.append(s.func)
    protos = [p for p in (_signature_text(n, program) for n in called) if p]
    if out:
        out.append("")
    out += protos
    if protos:
        out.append("")
    texts = []
    for f in unit.functions:
        g = copy.deepcopy(f)
        if g.ssa:
            destruct_ssa(g)
        texts.append(_CWriter(g, unit, program).emit())
    return "\n".join(out) + ("\n" if out else "") + "\n".join(texts)


def emit_c(program: MirProgram) -> dict:
    """{unit name: C source} for every unit."""
    return {u.name: emit_unit(u, program) for u in program.units}


def emit_runtime(loop_ids: list, base: int = 0x43C00000, stride: int = 0x10000) -> str:
    """Platform side of the wrapper intrinsics: base address table and register access."""
    lines = ["/* accelerator runtime: base address lookup and register access */",
             "#include <stdint.h>",
             "",
             "struct accel_entry { int loop_id; uintptr_t base; };",
             "",
             "static const struct accel_entry accel_table[] = {"]
    for k, lid in enumerate(sorted(loop_ids)):
        lines.append(f"    {{ {lid}, 0x{base + k * stride:08X}u }},")
    lines += ["    { 0, 0 }",
              "};",
              "",
              "int __accel_base(int loop_id)",
              "{",
              "    const struct accel_entry *e;",
              "    for (e = accel_table; e->loop_id != 0; e++)",
              "        if (e->loop_id == loop_id)",
              "            return (int)e->base;",
              "    return 0;",
              "}",
              "",
              "void __accel_write(int base, int offset, int value)",
              "{",
              "    *(volatile int32_t *)((uintptr_t)(unsigned)base + (uintptr_t)offset) = value;",
              "}",
              "",
              "int __accel_read(int base, int offset)",
              "{",
              "    return *(volatile int32_t *)((uintptr_t)(unsigned)base + (uintptr_t)offset);",
              "}"]
    return "\n".join(lines) + "\n"


def accel_table_text(entries: list) -> str:
    """``entries``: (loop id, wrapper name, register map file) triples."""
    return "".join(f"{lid} {w} {r}\n" for lid, w, r in sorted(entries))
