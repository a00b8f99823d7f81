"""Syntax tree for the supported C subset."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Node:
    line: int = field(default=0, kw_only=True)
    col: int = field(default=0, kw_only=True)


# expressions

@dataclass
class Num(Node):
    value: int


@dataclass
class Name(Node):
    id: str


@dataclass
class Index(Node):
    array: str
    index: Node


@dataclass
class Deref(Node):
    """``*p`` where ``p`` is an out-parameter."""
    name: str


@dataclass
class AddrOf(Node):
    """``&v`` passed as an out-parameter argument."""
    name: str


@dataclass
class Unary(Node):
    op: str  # neg, not, lnot
    operand: Node


@dataclass
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass
class Logical(Node):
    op: str  # land, lor (short-circuit)
    left: Node
    right: Node


@dataclass
class Ternary(Node):
    cond: Node
    then: Node
    else_: Node


@dataclass
class AssignExpr(Node):
    target: Node  # Name, Index or Deref
    op: str | None  # compound operator or None
    value: Node


@dataclass
class IncDec(Node):
    target: Node
    delta: int
    prefix: bool


@dataclass
class CallExpr(Node):
    func: str
    args: list


@dataclass
class Comma(Node):
    exprs: list


# statements

@dataclass
class VarDecl(Node):
    name: str
    size: int | None = None
    init: object = None  # expression, or list of ints for arrays


@dataclass
class DeclGroup(Node):
    decls: list


@dataclass
class ExprStmt(Node):
    expr: Node


@dataclass
class Compound(Node):
    stmts: list


@dataclass
class If(Node):
    cond: Node
    then: Node
    else_: Node | None


@dataclass
class While(Node):
    cond: Node
    body: Node


@dataclass
class DoWhile(Node):
    body: Node
    cond: Node


@dataclass
class For(Node):
    init: Node | None
    cond: Node | None
    step: Node | None
    body: Node


@dataclass
class Break(Node):
    pass


@dataclass
class Continue(Node):
    pass


@dataclass
class ReturnStmt(Node):
    value: Node | None


@dataclass
class GotoStmt(Node):
    label: str


@dataclass
class Labeled(Node):
    label: str
    stmt: Node


@dataclass
class Empty(Node):
    pass


# top level

@dataclass
class ParamDecl(Node):
    name: str
    out: bool = False


@dataclass
class FuncDef(Node):
    name: str
    returns_value: bool
    params: list
    body: Compound | None  # None for a prototype


@dataclass
class GlobalDecl(Node):
    name: str
    size: int | None
    init: list  # constant values


@dataclass
class Unit(Node):
    name: str
    decls: list
