"""Textual dump of the IR and a parser that reads it back."""

from __future__ import annotations

import re

from .ir import (Assign, BasicBlock, Branch, Call, Global, Goto, IRError, Load, MirFunction,
                 MirProgram, Param, Phi, Prototype, Return, Store, TranslationUnit)


def _op(v) -> str:
    return str(v)


def _ints(xs) -> str:
    return ",".join(str(x) for x in xs)


def format_stmt(s) -> str:
    if isinstance(s, Assign):
        return f"{s.dest} = {s.op} {', '.join(_op(a) for a in s.args)}"
    if isinstance(s, Load):
        return f"{s.dest} = load {s.array}[{_op(s.index)}]"
    if isinstance(s, Store):
        return f"store {s.array}[{_op(s.index)}], {_op(s.value)}"
    if isinstance(s, Call):
        text = f"call {s.func}({', '.join(_op(a) for a in s.args)})"
        if s.dest is not None:
            text = f"{s.dest} = {text}"
        if s.outs:
            text += " outs " + ", ".join(s.outs)
        return text
    if isinstance(s, Phi):
        return f"{s.dest} = phi " + ", ".join(f"[bb{p}: {_op(v)}]" for p, v in s.incoming)
    raise IRError(f"unknown statement {s!r}")


def format_term(t) -> str:
    if isinstance(t, Goto):
        return f"goto bb{t.target}"
    if isinstance(t, Branch):
        return f"br {_op(t.cond)}, bb{t.then}, bb{t.else_}"
    if isinstance(t, Return):
        text = "ret" if t.value is None else f"ret {_op(t.value)}"
        if t.outs:
            text += " outs " + ", ".join(_op(v) for v in t.outs)
        return text
    raise IRError(f"unknown terminator {t!r}")


def format_function(f: MirFunction) -> str:
    params = ", ".join(("*" if p.out else "") + f"{p.name}={p.value}" for p in f.params)
    lines = [f"function {f.name}({params}) returns={int(f.returns_value)} entry={f.entry} "
             f"exit={f.exit} ssa={int(f.ssa)} line={f.line}"]
    for name, size in f.arrays.items():
        lines.append(f"  array {name}[{size}]")
    for b in f:
        lines.append(f"  bb{b.id}:")
        for s in b.stmts:
            lines.append("    " + format_stmt(s))
        lines.append("    " + format_term(b.term))
    lines.append("end")
    return "\n".join(lines)


def format_unit(u: TranslationUnit) -> str:
    lines = [f"unit {u.name} checksum={u.checksum or '-'}"]
    for table in (u.globals, u.externs):
        for g in table.values():
            flags = (" scalar" if g.scalar else "") + (" extern" if g.extern else "")
            lines.append(f"global {g.name} size={g.size} init={_ints(g.init)}{flags}")
    for p in u.prototypes.values():
        lines.append(f"proto {p.name} nparams={p.nparams} returns={int(p.returns_value)} "
                     f"outs={_ints(p.out_params)}")
    for f in u.functions:
        lines.append(format_function(f))
    lines.append("endunit")
    return "\n".join(lines)


def format_program(p: MirProgram) -> str:
    head = f"program entry={p.entry or '-'}"
    return "\n".join([head] + [format_unit(u) for u in p.units]) + "\n"


_NAME = r"[A-Za-z_][\w.]*"


def _operand(text: str):
    text = text.strip()
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    if not re.fullmatch(_NAME, text):
        raise IRError(f"bad operand {text!r}")
    return text


def _split(text: str) -> list:
    text = text.strip()
    return [x.strip() for x in text.split(",")] if text else []


def parse_stmt(line: str):
    m = re.fullmatch(r"store (\S+)\[(.+)\], (\S+)", line)
    if m:
        return Store(m[1], _operand(m[2]), _operand(m[3]))
    m = re.fullmatch(r"(?:(\S+) = )?call (\S+)\((.*)\)(?: outs (.*))?", line)
    if m:
        return Call(m[1], m[2], [_operand(a) for a in _split(m[3])], _split(m[4] or ""))
    m = re.fullmatch(r"(\S+) = load (\S+)\[(.+)\]", line)
    if m:
        return Load(m[1], m[2], _operand(m[3]))
    m = re.fullmatch(r"(\S+) = phi (.*)", line)
    if m:
        inc = [(int(p), _operand(v)) for p, v in re.findall(r"\[bb(\d+): ([^\]]+)\]", m[2])]
        return Phi(m[1], inc)
    m = re.fullmatch(r"(\S+) = (\w+) (.*)", line)
    if m:
        return Assign(m[1], m[2], [_operand(a) for a in _split(m[3])])
    raise IRError(f"cannot parse statement {line!r}")


def parse_term(line: str):
    m = re.fullmatch(r"goto bb(\d+)", line)
    if m:
        return Goto(int(m[1]))
    m = re.fullmatch(r"br (\S+), bb(\d+), bb(\d+)", line)
    if m:
        return Branch(_operand(m[1]), int(m[2]), int(m[3]))
    m = re.fullmatch(r"ret(?: ([^ ]+?))?(?: outs (.*))?", line)
    if m:
        value = _operand(m[1]) if m[1] is not None else None
        return Return(value, [_operand(v) for v in _split(m[2] or "")])
    return None


def parse_program(text: str) -> MirProgram:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise IRError("unexpected end of IR text")
        pos += 1
        return lines[pos - 1]

    m = re.fullmatch(r"program entry=(\S+)", take())
    if not m:
        raise IRError("missing program header")
    prog = MirProgram([], None if m[1] == "-" else m[1])
    while pos < len(lines):
        m = re.fullmatch(r"unit (\S+) checksum=(\S+)", take())
        if not m:
            raise IRError(f"expected unit header at line {pos}")
        unit = TranslationUnit(m[1], [], checksum="" if m[2] == "-" else m[2])
        prog.units.append(unit)
        while True:
            line = take()
            if line == "endunit":
                break
            if line.startswith("global "):
                m = re.fullmatch(r"global (\S+) size=(\d+) init=(\S*)((?: \w+)*)", line)
                flags = m[4].split()
                g = Global(m[1], int(m[2]), [int(x) for x in _split(m[3])],
                           scalar="scalar" in flags, extern="extern" in flags)
                (unit.externs if g.extern else unit.globals)[g.name] = g
            elif line.startswith("proto "):
                m = re.fullmatch(r"proto (\S+) nparams=(\d+) returns=(\d) outs=(\S*)", line)
                unit.prototypes[m[1]] = Prototype(m[1], int(m[2]), m[3] == "1",
                                                  tuple(int(x) for x in _split(m[4])))
            elif line.startswith("function "):
                fn = _parse_function(line, take)
                fn.unit = unit.name
                unit.functions.append(fn)
            else:
                raise IRError(f"unexpected line {line!r}")
    return prog


def _parse_function(header: str, take) -> MirFunction:
    m = re.fullmatch(r"function (\S+)\((.*)\) returns=(\d) entry=(\d+) exit=(\d+) ssa=(\d) line=(\d+)", header)
    if not m:
        raise IRError(f"bad function header {header!r}")
    params = []
    for p in _split(m[2]):
        out = p.startswith("*")
        name, _, value = p.lstrip("*").partition("=")
        params.append(Param(name, value, out))
    f = MirFunction(m[1], params, {}, int(m[4]), int(m[5]), returns_value=m[3] == "1",
                    ssa=m[6] == "1", line=int(m[7]))
    block = None
    while True:
        line = take()
        if line == "end":
            return f
        am = re.fullmatch(r"array (\S+)\[(\d+)\]", line)
        bm = re.fullmatch(r"bb(\d+):", line)
        if am:
            f.arrays[am[1]] = int(am[2])
        elif bm:
            block = BasicBlock(int(bm[1]))
            f.blocks[block.id] = block
        else:
            term = parse_term(line)
            if term is not None:
                block.term = term
            else:
                block.stmts.append(parse_stmt(line))
