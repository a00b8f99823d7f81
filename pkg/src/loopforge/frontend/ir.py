"""Control-flow IR: basic blocks of statements, optionally in SSA form.

Operands are either value names (``str``) or integer constants (``int``).
Before SSA construction value names are plain variable names; afterwards
they are ``<var>.<version>``.  Arrays are not values: loads and stores name
an array that is either local to the function or a unit-level global.
Scalar globals are modelled as one-element arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

Operand = Union[str, int]


class IRError(Exception):
    pass


@dataclass
class Assign:
    dest: str
    op: str
    args: list

    def uses(self):
        return [a for a in self.args if isinstance(a, str)] if self.op != "const" else []


@dataclass
class Load:
    dest: str
    array: str
    index: Operand

    def uses(self):
        return [self.index] if isinstance(self.index, str) else []


@dataclass
class Store:
    array: str
    index: Operand
    value: Operand

    dest = None

    def uses(self):
        return [a for a in (self.index, self.value) if isinstance(a, str)]


@dataclass
class Call:
    dest: str | None
    func: str
    args: list
    # values defined by out-parameters, one per ``&var`` argument in order
    outs: list = field(default_factory=list)

    def uses(self):
        return [a for a in self.args if isinstance(a, str)]


@dataclass
class Phi:
    dest: str
    incoming: list  # [(pred block id, operand)]

    def uses(self):
        return [v for _, v in self.incoming if isinstance(v, str)]


Stmt = Union[Assign, Load, Store, Call, Phi]


@dataclass
class Goto:
    target: int

    def successors(self):
        return [self.target]

    def uses(self):
        return []


@dataclass
class Branch:
    cond: Operand
    then: int
    else_: int

    def successors(self):
        return [self.then, self.else_]

    def uses(self):
        return [self.cond] if isinstance(self.cond, str) else []


@dataclass
class Return:
    value: Operand | None = None
    outs: list = field(default_factory=list)

    def successors(self):
        return []

    def uses(self):
        vals = [self.value] + list(self.outs)
        return [v for v in vals if isinstance(v, str)]


Terminator = Union[Goto, Branch, Return]


@dataclass
class BasicBlock:
    id: int
    stmts: list = field(default_factory=list)
    term: Terminator | None = None

    def phis(self) -> list:
        return [s for s in self.stmts if isinstance(s, Phi)]

    def body(self) -> list:
        return [s for s in self.stmts if not isinstance(s, Phi)]

    def successors(self) -> list:
        return self.term.successors() if self.term is not None else []


@dataclass
class Param:
    name: str
    value: str
    out: bool = False


@dataclass
class Global:
    name: str
    size: int
    init: list
    scalar: bool = False
    extern: bool = False


@dataclass
class Prototype:
    name: str
    nparams: int
    returns_value: bool
    out_params: tuple = ()


@dataclass
class MirFunction:
    name: str
    params: list
    blocks: dict  # id -> BasicBlock, in layout order
    entry: int
    exit: int
    returns_value: bool = True
    arrays: dict = field(default_factory=dict)  # local array name -> size
    unit: str = ""
    ssa: bool = False
    line: int = 0
    var_lines: dict = field(default_factory=dict, repr=False, compare=False)

    def __iter__(self) -> Iterator[BasicBlock]:
        return iter(self.blocks.values())

    def block(self, bid: int) -> BasicBlock:
        return self.blocks[bid]

    def successors(self) -> dict:
        return {b.id: b.successors() for b in self}

    def predecessors(self) -> dict:
        preds = {bid: [] for bid in self.blocks}
        for b in self:
            for s in b.successors():
                if b.id not in preds[s]:
                    preds[s].append(b.id)
        return preds

    def statements(self) -> Iterator[tuple]:
        for b in self:
            for s in b.stmts:
                yield b.id, s

    def definitions(self) -> dict:
        """Map each defined value to its defining block id (params -> entry)."""
        defs = {p.value: self.entry for p in self.params if not p.out}
        for bid, s in self.statements():
            for d in defined_values(s):
                defs[d] = bid
        return defs

    def next_block_id(self) -> int:
        return max(self.blocks) + 1 if self.blocks else 0

    def out_params(self) -> list:
        return [p for p in self.params if p.out]

    def in_params(self) -> list:
        return [p for p in self.params if not p.out]


@dataclass
class TranslationUnit:
    name: str
    functions: list
    globals: dict = field(default_factory=dict)
    prototypes: dict = field(default_factory=dict)
    checksum: str = ""
    externs: dict = field(default_factory=dict)

    def function(self, name: str) -> MirFunction | None:
        for f in self.functions:
            if f.name == name:
                return f
        return None


@dataclass
class MirProgram:
    units: list
    entry: str | None = None

    def functions(self) -> Iterator[MirFunction]:
        for u in self.units:
            yield from u.functions

    def function(self, name: str) -> MirFunction | None:
        for f in self.functions():
            if f.name == name:
                return f
        return None

    def unit(self, name: str) -> TranslationUnit | None:
        for u in self.units:
            if u.name == name:
                return u
        return None

    def unit_of(self, fname: str) -> TranslationUnit | None:
        for u in self.units:
            if u.function(fname) is not None:
                return u
        return None

    def globals(self) -> dict:
        out = {}
        for u in self.units:
            out.update(u.globals)
        return out

    def signature(self, name: str) -> Prototype | None:
        f = self.function(name)
        if f is not None:
            return Prototype(name, len(f.params), f.returns_value,
                             tuple(i for i, p in enumerate(f.params) if p.out))
        for u in self.units:
            if name in u.prototypes:
                return u.prototypes[name]
        return None


def defined_values(s) -> list:
    if isinstance(s, Call):
        return ([s.dest] if s.dest is not None else []) + list(s.outs)
    if isinstance(s, Store):
        return []
    return [s.dest]


def var_of(value: str) -> str:
    """Strip the SSA version from a value name."""
    base, dot, ver = value.rpartition(".")
    return base if dot and ver.isdigit() else value


def version_of(value: str) -> int:
    base, dot, ver = value.rpartition(".")
    return int(ver) if dot and ver.isdigit() else -1


def replace_uses(s, mapping: dict) -> None:
    """Rewrite operands of ``s`` in place through ``mapping`` (value -> operand)."""
    def m(v):
        return mapping.get(v, v) if isinstance(v, str) else v

    if isinstance(s, Assign):
        if s.op != "const":
            s.args = [m(a) for a in s.args]
    elif isinstance(s, Load):
        s.index = m(s.index)
    elif isinstance(s, Store):
        s.index, s.value = m(s.index), m(s.value)
    elif isinstance(s, Call):
        s.args = [m(a) for a in s.args]
    elif isinstance(s, Phi):
        s.incoming = [(p, m(v)) for p, v in s.incoming]
    elif isinstance(s, Branch):
        s.cond = m(s.cond)
    elif isinstance(s, Return):
        s.value = m(s.value) if s.value is not None else None
        s.outs = [m(v) for v in s.outs]
