"""Lower a parsed unit to per-function control-flow graphs over variables.

Loops are emitted in rotated form: a guard test in front of the loop and the
exit test at the bottom, so the loop header is the first block of the body
and the back edge executes once per iteration after the first.
"""

from __future__ import annotations

from ..diagnostics import CompileError, Diagnostics
from . import cast as A
from .ir import (Assign, BasicBlock, Branch, Call, Global, Goto, Load, MirFunction,
                 Param, Prototype, Return, Store, TranslationUnit)

INTRINSICS = {
    # wrapper runtime hooks: resolved by the platform runtime or the simulator
    "__accel_base": Prototype("__accel_base", 1, True),
    "__accel_write": Prototype("__accel_write", 3, False),
    "__accel_read": Prototype("__accel_read", 2, True),
}

RET_VAR = "__ret"


class _Scope:
    def __init__(self, parent=None):
        self.parent = parent
        self.names = {}

    def lookup(self, name):
        s = self
        while s is not None:
            if name in s.names:
                return s.names[name]
            s = s.parent
        return None


class FunctionLowering:
    def __init__(self, fdef: A.FuncDef, unit: "UnitLowering"):
        self.fdef = fdef
        self.unit = unit
        self.file = unit.name
        self.blocks: dict = {}
        self.used_names: set = set()
        self.var_lines: dict = {}
        self.arrays: dict = {}
        self.scope = _Scope()
        self.ntemp = 0
        self.loops: list = []  # (break target, continue target)
        self.labels: dict = {}
        self.labels_used: dict = {}
        self.defined_labels: set = set()
        self.entry = self.new_block()
        self.exit = self.new_block()
        self.cur = self.entry

    # helpers

    def error(self, msg, node):
        return CompileError(msg, self.file, node.line, node.col)

    def new_block(self) -> int:
        bid = len(self.blocks)
        self.blocks[bid] = BasicBlock(bid)
        return bid

    def emit(self, stmt) -> None:
        if self.cur is None:
            self.cur = self.new_block()
        self.blocks[self.cur].stmts.append(stmt)

    def terminate(self, term) -> None:
        if self.cur is None:
            return
        self.blocks[self.cur].term = term
        self.cur = None

    def jump(self, target: int) -> None:
        self.terminate(Goto(target))

    def start(self, bid: int) -> None:
        if self.cur is not None:
            self.jump(bid)
        self.cur = bid

    def temp(self) -> str:
        self.ntemp += 1
        name = f"__t{self.ntemp}"
        self.used_names.add(name)
        return name

    def fresh_var(self, name: str, node) -> str:
        unique = name
        k = 0
        while unique in self.used_names or unique in self.unit.globals:
            k += 1
            unique = f"{name}_{k}"
        self.used_names.add(unique)
        self.var_lines[unique] = (node.line, node.col)
        return unique

    def declare(self, name: str, kind: str, node) -> str:
        if name in self.scope.names:
            raise self.error(f"redeclaration of '{name}'", node)
        unique = self.fresh_var(name, node)
        self.scope.names[name] = (kind, unique)
        return unique

    def resolve(self, name: str, node):
        found = self.scope.lookup(name)
        if found is not None:
            return found
        g = self.unit.globals.get(name)
        if g is not None:
            return ("gscalar" if g.scalar else "garray", name)
        if name in self.unit.functions:
            raise self.error(f"unsupported construct: function designator '{name}'", node)
        raise self.error(f"undeclared identifier '{name}'", node)

    # entry point

    def lower(self) -> MirFunction:
        params = []
        for p in self.fdef.params:
            if p.name in self.scope.names:
                raise self.error(f"redeclaration of parameter '{p.name}'", p)
            unique = self.declare(p.name, "out" if p.out else "var", p)
            params.append(Param(unique, unique, p.out))
        for p in params:
            if p.out:
                self.emit(Assign(p.name, "const", [0]))
        self.statement(self.fdef.body)
        if self.cur is not None:
            if self.fdef.returns_value:
                self.emit(Assign(RET_VAR, "const", [0]))
            self.jump(self.exit)
        for label in self.labels:
            if label not in self.defined_labels:
                node = self.labels_used[label]
                raise self.error(f"label '{label}' used but not defined", node)
        outs = [p.name for p in params if p.out]
        self.blocks[self.exit].term = Return(RET_VAR if self.fdef.returns_value else None, outs)
        f = MirFunction(self.fdef.name, params, self.blocks, self.entry, self.exit,
                        returns_value=self.fdef.returns_value, arrays=self.arrays,
                        unit=self.file, line=self.fdef.line, var_lines=self.var_lines)
        return f

    def label_block(self, label: str, node) -> int:
        if label not in self.labels:
            self.labels[label] = self.new_block()
            self.labels_used[label] = node
        return self.labels[label]

    # statements

    def statement(self, s) -> None:
        if isinstance(s, A.Compound):
            saved = self.scope
            self.scope = _Scope(saved)
            for st in s.stmts:
                self.statement(st)
            self.scope = saved
        elif isinstance(s, A.DeclGroup):
            for d in s.decls:
                self.statement(d)
        elif isinstance(s, A.VarDecl):
            self.var_decl(s)
        elif isinstance(s, A.ExprStmt):
            self.expr(s.expr, want=False)
        elif isinstance(s, A.Empty):
            pass
        elif isinstance(s, A.If):
            then_b, join = self.new_block(), self.new_block()
            else_b = self.new_block() if s.else_ is not None else join
            self.cond(s.cond, then_b, else_b)
            self.cur = then_b
            self.statement(s.then)
            self.jump(join)
            if s.else_ is not None:
                self.cur = else_b
                self.statement(s.else_)
                self.jump(join)
            self.cur = join
        elif isinstance(s, A.While):
            self.loop(None, s.cond, None, s.body, guard=True)
        elif isinstance(s, A.For):
            saved = self.scope
            self.scope = _Scope(saved)
            if s.init is not None:
                self.statement(s.init)
            self.loop(None, s.cond, s.step, s.body, guard=True)
            self.scope = saved
        elif isinstance(s, A.DoWhile):
            self.loop(None, s.cond, None, s.body, guard=False)
        elif isinstance(s, A.Break):
            if not self.loops:
                raise self.error("break statement not within a loop", s)
            self.jump(self.loops[-1][0])
        elif isinstance(s, A.Continue):
            if not self.loops:
                raise self.error("continue statement not within a loop", s)
            self.jump(self.loops[-1][1])
        elif isinstance(s, A.ReturnStmt):
            if s.value is not None:
                if not self.fdef.returns_value:
                    raise self.error("return with a value in a void function", s)
                self.expr(s.value, dest=RET_VAR)
            elif self.fdef.returns_value:
                raise self.error("return without a value in a function returning int", s)
            self.jump(self.exit)
        elif isinstance(s, A.GotoStmt):
            self.jump(self.label_block(s.label, s))
        elif isinstance(s, A.Labeled):
            bid = self.label_block(s.label, s)
            if s.label in self.defined_labels:
                raise self.error(f"duplicate label '{s.label}'", s)
            self.defined_labels.add(s.label)
            self.start(bid)
            self.statement(s.stmt)
        else:
            raise self.error(f"unsupported construct: {type(s).__name__}", s)

    def var_decl(self, d: A.VarDecl) -> None:
        if d.size is not None:
            name = self.declare(d.name, "array", d)
            self.arrays[name] = d.size
            if d.init is not None:
                vals = list(d.init) + [0] * (d.size - len(d.init))
                for i, v in enumerate(vals):
                    self.emit(Store(name, i, v))
            return
        # the initializer is evaluated before the new name is in scope only for
        # self-references, which C leaves indeterminate; bind first like C does
        name = self.declare(d.name, "var", d)
        if d.init is not None:
            self.expr(d.init, dest=name)

    def loop(self, _init, cond, step, body, guard: bool) -> None:
        body_b = self.new_block()
        latch_b = self.new_block()
        exit_b = self.new_block()
        if guard and cond is not None:
            self.cond(cond, body_b, exit_b)
        else:
            self.jump(body_b)
        self.cur = body_b
        self.loops.append((exit_b, latch_b))
        self.statement(body)
        self.loops.pop()
        self.start(latch_b)
        if step is not None:
            self.expr(step, want=False)
        if cond is not None:
            self.cond(cond, body_b, exit_b)
        else:
            self.jump(body_b)
        self.cur = exit_b

    # conditions lower to branches directly

    def cond(self, e, t: int, f: int) -> None:
        if isinstance(e, A.Logical):
            mid = self.new_block()
            if e.op == "land":
                self.cond(e.left, mid, f)
            else:
                self.cond(e.left, t, mid)
            self.cur = mid
            self.cond(e.right, t, f)
            return
        if isinstance(e, A.Unary) and e.op == "lnot":
            self.cond(e.operand, f, t)
            return
        v = self.expr(e)
        if self.cur is None:
            self.cur = self.new_block()
        self.terminate(Branch(v, t, f))

    # expressions

    def expr(self, e, dest: str | None = None, want: bool = True):
        """Lower ``e``; return its operand (written to ``dest`` when given)."""
        if isinstance(e, A.Num):
            return self._place(e.value, dest)
        if isinstance(e, A.Name):
            kind, name = self.resolve(e.id, e)
            if kind == "var":
                return self._place(name, dest)
            if kind == "out":
                raise self.error(f"unsupported construct: out-parameter '{e.id}' used without '*'", e)
            if kind == "gscalar":
                d = dest or self.temp()
                self.emit(Load(d, name, 0))
                return d
            raise self.error(f"unsupported construct: array '{e.id}' used as a value", e)
        if isinstance(e, A.Deref):
            return self._place(self._out_param(e.name, e), dest)
        if isinstance(e, A.Index):
            arr = self._array(e.array, e)
            idx = self.expr(e.index)
            d = dest or self.temp()
            self.emit(Load(d, arr, idx))
            return d
        if isinstance(e, A.Unary):
            x = self.expr(e.operand)
            d = dest or self.temp()
            self.emit(Assign(d, e.op, [x]))
            return d
        if isinstance(e, A.Binary):
            left = self.expr(e.left)
            right = self.expr(e.right)
            d = dest or self.temp()
            self.emit(Assign(d, e.op, [left, right]))
            return d
        if isinstance(e, (A.Logical, A.Ternary)):
            d = dest or self.temp()
            t_b, f_b, join = self.new_block(), self.new_block(), self.new_block()
            if isinstance(e, A.Logical):
                self.cond(e, t_b, f_b)
                self.cur = t_b
                self.emit(Assign(d, "const", [1]))
                self.jump(join)
                self.cur = f_b
                self.emit(Assign(d, "const", [0]))
            else:
                self.cond(e.cond, t_b, f_b)
                self.cur = t_b
                self.expr(e.then, dest=d)
                self.jump(join)
                self.cur = f_b
                self.expr(e.else_, dest=d)
            self.jump(join)
            self.cur = join
            return d
        if isinstance(e, A.AssignExpr):
            return self.assign(e.target, e.op, e.value, dest, want)
        if isinstance(e, A.IncDec):
            return self.incdec(e, dest, want)
        if isinstance(e, A.CallExpr):
            return self.call(e, dest, want)
        if isinstance(e, A.Comma):
            for sub in e.exprs[:-1]:
                self.expr(sub, want=False)
            return self.expr(e.exprs[-1], dest=dest, want=want)
        if isinstance(e, A.AddrOf):
            raise self.error("unsupported construct: address-of outside an out-parameter argument", e)
        raise self.error(f"unsupported construct: {type(e).__name__}", e)

    def _place(self, operand, dest):
        if dest is None:
            return operand
        self.emit(Assign(dest, "const" if isinstance(operand, int) else "copy", [operand]))
        return dest

    def _out_param(self, name, node) -> str:
        found = self.scope.lookup(name)
        if found is None or found[0] != "out":
            raise self.error("unsupported construct: pointer dereference", node)
        return found[1]

    def _array(self, name, node) -> str:
        kind, unique = self.resolve(name, node)
        if kind not in ("array", "garray"):
            raise self.error(f"subscripted value '{name}' is not an array", node)
        return unique

    def _lvalue(self, target):
        """Return (kind, name, index) for an assignable expression."""
        if isinstance(target, A.Name):
            kind, name = self.resolve(target.id, target)
            if kind == "var":
                return "var", name, None
            if kind == "gscalar":
                return "mem", name, 0
            raise self.error(f"cannot assign to '{target.id}'", target)
        if isinstance(target, A.Deref):
            return "var", self._out_param(target.name, target), None
        arr = self._array(target.array, target)
        return "mem", arr, self.expr(target.index)

    def assign(self, target, op, value, dest, want):
        kind, name, idx = self._lvalue(target)
        if kind == "var":
            if op is None:
                self.expr(value, dest=name)
            else:
                rhs = self.expr(value)
                self.emit(Assign(name, op, [name, rhs]))
            return self._place(name, dest) if (want or dest) else None
        if op is None:
            v = self.expr(value)
        else:
            old = self.temp()
            self.emit(Load(old, name, idx))
            rhs = self.expr(value)
            v = self.temp()
            self.emit(Assign(v, op, [old, rhs]))
        self.emit(Store(name, idx, v))
        return self._place(v, dest) if (want or dest) else None

    def incdec(self, e: A.IncDec, dest, want):
        kind, name, idx = self._lvalue(e.target)
        op = "add"
        if kind == "var":
            old = None
            if want and not e.prefix:
                old = self.temp()
                self.emit(Assign(old, "copy", [name]))
            self.emit(Assign(name, op, [name, e.delta]))
            result = name if e.prefix else old
            return self._place(result, dest) if (want or dest) else None
        old = self.temp()
        self.emit(Load(old, name, idx))
        new = self.temp()
        self.emit(Assign(new, op, [old, e.delta]))
        self.emit(Store(name, idx, new))
        result = new if e.prefix else old
        return self._place(result, dest) if (want or dest) else None

    def call(self, e: A.CallExpr, dest, want):
        sig = self.unit.signature(e.func)
        if sig is None:
            self.unit.diags.warn(f"implicit declaration of function '{e.func}'", self.file, e.line, e.col)
        elif sig.nparams != len(e.args):
            raise self.error(f"function '{e.func}' expects {sig.nparams} arguments, got {len(e.args)}", e)
        out_positions = set(sig.out_params) if sig is not None else set()
        args, outs = [], []
        for i, a in enumerate(e.args):
            if isinstance(a, A.AddrOf):
                if sig is not None and i not in out_positions:
                    raise self.error("unsupported construct: address-of passed to a value parameter", a)
                kind, name = self.resolve(a.name, a)
                if kind != "var":
                    raise self.error(f"unsupported construct: address of '{a.name}'", a)
                outs.append(name)
                args.append(0)
            else:
                if i in out_positions:
                    raise self.error(f"argument {i + 1} of '{e.func}' must be '&variable'", a)
                args.append(self.expr(a))
        returns = sig.returns_value if sig is not None else True
        if (want or dest) and not returns:
            raise self.error(f"void function '{e.func}' used as a value", e)
        d = (dest or self.temp()) if (want or dest) else None
        if d is None and returns:
            d = self.temp()
        self.emit(Call(d, e.func, args, outs))
        return d


class UnitLowering:
    def __init__(self, unit: A.Unit, diags: Diagnostics):
        self.unit = unit
        self.name = unit.name
        self.diags = diags
        self.globals: dict = {}
        self.functions: dict = {}
        self.prototypes: dict = {}

    def signature(self, name):
        if name in self.functions:
            return self.functions[name]
        if name in self.prototypes:
            return self.prototypes[name]
        return INTRINSICS.get(name)

    def lower(self) -> TranslationUnit:
        defs = []
        for d in self.unit.decls:
            if isinstance(d, A.GlobalDecl):
                if d.name in self.globals and not getattr(d, "extern", False):
                    prev = self.globals[d.name]
                    if not getattr(prev, "extern", False):
                        raise CompileError(f"redefinition of '{d.name}'", self.name, d.line, d.col)
                g = Global(d.name, d.size or 1, list(d.init), scalar=d.size is None,
                           extern=getattr(d, "extern", False))
                if g.extern and d.name in self.globals:
                    continue
                self.globals[d.name] = g
            elif isinstance(d, A.FuncDef):
                proto = Prototype(d.name, len(d.params), d.returns_value,
                                  tuple(i for i, p in enumerate(d.params) if p.out))
                if d.body is not None:
                    if d.name in self.functions:
                        raise CompileError(f"redefinition of function '{d.name}'", self.name, d.line, d.col)
                    self.functions[d.name] = proto
                    defs.append(d)
                else:
                    self.prototypes[d.name] = proto
        functions = [FunctionLowering(d, self).lower() for d in defs]
        globals_ = {n: g for n, g in self.globals.items() if not g.extern}
        externs = {n: g for n, g in self.globals.items() if g.extern}
        return TranslationUnit(self.name, functions, globals_, dict(self.prototypes), externs=externs)


def lower_unit(unit: A.Unit, diags: Diagnostics | None = None) -> TranslationUnit:
    return UnitLowering(unit, diags or Diagnostics()).lower()
