"""Structural checks for the IR, shared by every pass's tests."""

from __future__ import annotations

from . import cfg
from .ir import Assign, Call, IRError, Load, MirFunction, MirProgram, Phi, Store, defined_values
from .. import arith


def validate_function(f: MirFunction, program: MirProgram | None = None) -> None:
    """Raise IRError when ``f`` breaks a CFG or SSA invariant."""
    if f.entry not in f.blocks or f.exit not in f.blocks:
        raise IRError(f"{f.name}: entry or exit block missing")
    succ = f.successors()
    for b in f:
        if b.term is None:
            raise IRError(f"{f.name}: bb{b.id} has no terminator")
        for s in succ[b.id]:
            if s not in f.blocks:
                raise IRError(f"{f.name}: bb{b.id} jumps to missing bb{s}")
    preds = cfg.predecessors(succ)
    if preds[f.entry]:
        raise IRError(f"{f.name}: entry block has predecessors")
    if succ[f.exit]:
        raise IRError(f"{f.name}: exit block has successors")
    for b in f:
        if b.id != f.exit and not succ[b.id]:
            raise IRError(f"{f.name}: bb{b.id} returns but is not the exit block")
        seen_body = False
        for s in b.stmts:
            if isinstance(s, Phi):
                if seen_body:
                    raise IRError(f"{f.name}: phi after non-phi in bb{b.id}")
                if not f.ssa:
                    raise IRError(f"{f.name}: phi in variable form")
                if [p for p, _ in s.incoming] != preds[b.id]:
                    raise IRError(f"{f.name}: phi {s.dest} in bb{b.id} does not match predecessors "
                                  f"{preds[b.id]}")
            else:
                seen_body = True
            if isinstance(s, Assign):
                if s.op == "const":
                    if len(s.args) != 1 or not isinstance(s.args[0], int):
                        raise IRError(f"{f.name}: bad constant {s}")
                elif s.op in arith.BINARY_OPS:
                    if len(s.args) != 2:
                        raise IRError(f"{f.name}: {s.op} needs 2 operands")
                elif s.op in arith.UNARY_OPS:
                    if len(s.args) != 1:
                        raise IRError(f"{f.name}: {s.op} needs 1 operand")
                elif s.op == "select":
                    if len(s.args) != 3:
                        raise IRError(f"{f.name}: select needs 3 operands")
                else:
                    raise IRError(f"{f.name}: unknown operation {s.op}")
            if isinstance(s, (Load, Store)):
                if s.array not in f.arrays and (program is None or s.array not in _all_globals(program, f)):
                    if program is not None:
                        raise IRError(f"{f.name}: unknown array {s.array}")
            if isinstance(s, Call) and program is not None:
                if program.signature(s.func) is None and not s.func.startswith("__accel"):
                    raise IRError(f"{f.name}: call to undeclared function {s.func}")
    if f.ssa:
        _validate_ssa(f, succ)


def _all_globals(program: MirProgram, f: MirFunction) -> dict:
    u = program.unit(f.unit)
    out = program.globals()
    if u is not None:
        out.update(u.externs)
    return out


def _validate_ssa(f: MirFunction, succ: dict) -> None:
    defs = {}
    for p in f.in_params():
        defs[p.value] = (f.entry, -1)
    for b in f:
        for i, s in enumerate(b.stmts):
            for d in defined_values(s):
                if d in defs:
                    raise IRError(f"{f.name}: value {d} defined twice")
                defs[d] = (b.id, i)
    idom = cfg.dominators(succ, f.entry)
    for b in f:
        if b.id not in idom:
            raise IRError(f"{f.name}: bb{b.id} unreachable")
        for i, s in enumerate(b.stmts):
            if isinstance(s, Phi):
                for p, v in s.incoming:
                    if isinstance(v, str):
                        _check_dominated(f, defs, idom, v, p, len(f.blocks[p].stmts))
                continue
            for v in s.uses():
                _check_dominated(f, defs, idom, v, b.id, i)
        for v in b.term.uses():
            _check_dominated(f, defs, idom, v, b.id, len(b.stmts))


def _check_dominated(f, defs, idom, v, bid, pos) -> None:
    if v not in defs:
        raise IRError(f"{f.name}: use of undefined value {v} in bb{bid}")
    db, di = defs[v]
    if db == bid:
        if di >= pos:
            raise IRError(f"{f.name}: {v} used before its definition in bb{bid}")
    elif not cfg.dominates(idom, db, bid):
        raise IRError(f"{f.name}: definition of {v} does not dominate its use in bb{bid}")


def validate_program(p: MirProgram) -> None:
    names = set()
    for f in p.functions():
        if f.name in names:
            raise IRError(f"function {f.name} defined twice")
        names.add(f.name)
        validate_function(f, p)
