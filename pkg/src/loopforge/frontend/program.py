"""Whole-program construction: parse, lower and convert every unit to SSA."""

from __future__ import annotations

import hashlib
from pathlib import Path

from ..diagnostics import CompileError, Diagnostics
from .ir import MirProgram, TranslationUnit
from .lower import INTRINSICS, lower_unit
from .parser import parse_unit
from .ssa import to_ssa


def checksum(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


def build_ssa_cfg(unit_ast, diags: Diagnostics | None = None) -> list:
    """Lower a parsed unit and return its functions in folded SSA form."""
    diags = diags or Diagnostics()
    tu = lower_unit(unit_ast, diags)
    for f in tu.functions:
        to_ssa(f, diags)
    return tu.functions


def compile_unit(source: str, name: str, diags: Diagnostics | None = None) -> TranslationUnit:
    diags = diags or Diagnostics()
    tu = lower_unit(parse_unit(source, name), diags)
    for f in tu.functions:
        to_ssa(f, diags)
    tu.checksum = checksum(source)
    return tu


def link(units: list, diags: Diagnostics | None = None, entry: str | None = None) -> MirProgram:
    """Check cross-unit consistency and assemble a MirProgram."""
    diags = diags or Diagnostics()
    defined = {}
    for u in units:
        for f in u.functions:
            if f.name in defined:
                raise CompileError(f"function '{f.name}' defined in both {defined[f.name]} and {u.name}",
                                   u.name, f.line, 0)
            defined[f.name] = u.name
    prog = MirProgram(list(units), entry)
    owners = {}
    for u in units:
        for g in u.globals.values():
            if g.name in owners:
                raise CompileError(f"global '{g.name}' defined in both {owners[g.name]} and {u.name}", u.name)
            owners[g.name] = u.name
    for u in units:
        for g in u.externs.values():
            if g.name not in owners:
                raise CompileError(f"undefined reference to global '{g.name}'", u.name)
        for f in u.functions:
            for _, s in f.statements():
                if not hasattr(s, "func"):
                    continue
                if s.func in INTRINSICS:
                    continue
                callee = prog.function(s.func)
                if callee is None:
                    proto = prog.signature(s.func)
                    raise CompileError(f"undefined reference to '{s.func}'" +
                                       (" (declared but never defined)" if proto else ""),
                                       u.name, f.line, 0)
                if len(callee.params) != len(s.args):
                    raise CompileError(f"call to '{s.func}' with {len(s.args)} arguments; "
                                       f"definition takes {len(callee.params)}", u.name, f.line, 0)
                if len(callee.out_params()) != len(s.outs):
                    raise CompileError(f"call to '{s.func}' does not match its out-parameters",
                                       u.name, f.line, 0)
    return prog


def build_program(sources, diags: Diagnostics | None = None, entry: str | None = None) -> MirProgram:
    """``sources`` is a sequence of (unit name, text) pairs or of file paths."""
    diags = diags or Diagnostics()
    units = []
    for item in sources:
        if isinstance(item, (str, Path)):
            path = Path(item)
            name, text = path.name, path.read_text(encoding="utf-8")
        else:
            name, text = item
        units.append(compile_unit(text, name, diags))
    return link(units, diags, entry)
