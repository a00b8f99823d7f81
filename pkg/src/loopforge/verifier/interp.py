"""Reference interpreter for SSA programs with 32-bit wraparound semantics.

Blocks are pre-decoded into small closures once per function, which keeps
the thousands of randomized trials used for equivalence checks cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import arith
from ..frontend.ir import Assign, Branch, Call, Goto, Load, MirFunction, MirProgram, Phi, Store

DEFAULT_STEP_LIMIT = 2_000_000
ACCEL_PREFIX = "__accel"


class Trap(Exception):
    """Execution stopped: ``kind`` is div0, bounds, steps or missing."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


@dataclass
class ExecResult:
    value: int | None
    outs: list
    memory: dict  # global arrays after execution
    trace: list = field(default_factory=list)
    trap: str | None = None
    steps: int = 0

    def observable(self) -> tuple:
        if self.trap is not None:
            # memory at a trap depends on how independent accesses were ordered
            return (self.trap, tuple(self.trace))
        return (self.trap, self.value, tuple(self.outs),
                tuple((k, tuple(v)) for k, v in sorted(self.memory.items())), tuple(self.trace))


def _getter(v):
    if isinstance(v, int):
        return lambda env: v
    return lambda env: env[v]


def _bounds(array, mem, i):
    buf = mem[array]
    if i < 0 or i >= len(buf):
        raise Trap("bounds", f"index {i} out of bounds for '{array}[{len(buf)}]'")
    return buf


def _div_guard(fn):
    def run(a, b):
        try:
            return fn(a, b)
        except arith.DivisionByZero:
            raise Trap("div0", "division by zero") from None
    return run


class _Compiled:
    def __init__(self, f: MirFunction):
        self.f = f
        self.ops = {}
        self.terms = {}
        self.moves = {}
        for b in f:
            self.ops[b.id] = [self._stmt(s) for s in b.stmts if not isinstance(s, Phi)]
            self.terms[b.id] = b.term
        for b in f:
            for s in b.successors():
                moves = []
                for phi in f.blocks[s].phis():
                    for p, v in phi.incoming:
                        if p == b.id:
                            moves.append((phi.dest, _getter(v)))
                self.moves[(b.id, s)] = moves

    def _stmt(self, s):
        if isinstance(s, Assign):
            d = s.dest
            if s.op == "const":
                c = arith.wrap(s.args[0])

                def run(env, mem, ctx):
                    env[d] = c
                return run
            if len(s.args) == 1:
                fn = arith.UNARY_FUNCS[s.op]
                g = _getter(s.args[0])

                def run(env, mem, ctx):
                    env[d] = fn(g(env))
                return run
            fn = arith.BINARY_FUNCS[s.op]
            if s.op in arith.TRAPPING_OPS:
                fn = _div_guard(fn)
            ga, gb = _getter(s.args[0]), _getter(s.args[1])

            def run(env, mem, ctx):
                env[d] = fn(ga(env), gb(env))
            return run
        if isinstance(s, Load):
            d, arr, gi = s.dest, s.array, _getter(s.index)

            def run(env, mem, ctx):
                i = gi(env)
                env[d] = _bounds(arr, mem, i)[i]
            return run
        if isinstance(s, Store):
            arr, gi, gv = s.array, _getter(s.index), _getter(s.value)

            def run(env, mem, ctx):
                i = gi(env)
                _bounds(arr, mem, i)[i] = gv(env)
            return run
        if isinstance(s, Call):
            getters = [_getter(a) for a in s.args]

            def run(env, mem, ctx):
                ret, outs = ctx.invoke(s.func, [g(env) for g in getters], mem)
                if s.dest is not None:
                    env[s.dest] = ret if ret is not None else 0
                for name, v in zip(s.outs, outs):
                    env[name] = v
            return run
        raise TypeError(f"cannot execute {s!r}")


class Interpreter:
    """Executes a MirProgram.  ``hook`` services the ``__accel_*`` intrinsics."""

    def __init__(self, program: MirProgram, hook=None, step_limit: int = DEFAULT_STEP_LIMIT):
        self.program = program
        self.hook = hook
        self.step_limit = step_limit
        self.compiled = {}
        self.globals = {}
        self.trace = []
        self.steps = 0
        self.frames = []  # memory view of each active call
        self.defined = {f.name for f in program.functions()}
        self.reset()

    def reset(self, memory: dict | None = None) -> None:
        self.globals = {}
        for g in self.program.globals().values():
            self.globals[g.name] = [arith.wrap(v) for v in g.init] + [0] * (g.size - len(g.init))
        if memory:
            for k, v in memory.items():
                self.globals[k] = list(v)
        self.trace = []
        self.steps = 0
        self.frames = []

    def function(self, name: str) -> _Compiled:
        c = self.compiled.get(name)
        if c is None:
            f = self.program.function(name)
            if f is None:
                raise Trap("missing", f"call to undefined function '{name}'")
            c = self.compiled[name] = _Compiled(f)
        return c

    def invoke(self, name: str, args: list, caller_mem=None) -> tuple:
        if name.startswith(ACCEL_PREFIX) and name not in self.defined:
            if self.hook is None:
                return (0 if name != "__accel_write" else None), []
            return self.hook.intrinsic(self, name, args), []
        if not name.startswith(ACCEL_PREFIX):
            self.trace.append((name, tuple(args)))
        return self.execute(name, args)

    def execute(self, name: str, args: list, env: dict | None = None, start: int | None = None) -> tuple:
        c = self.function(name)
        f = c.f
        env = dict(env or {})
        for p, a in zip(f.params, args):
            if not p.out:
                env[p.value] = arith.wrap(a)
        mem = dict(self.globals)
        for arr, size in f.arrays.items():
            mem[arr] = [0] * size
        self.frames.append((name, mem))
        try:
            return self._run(c, env, mem, f.entry if start is None else start)
        finally:
            self.frames.pop()

    def _run(self, c: _Compiled, env: dict, mem: dict, bid: int) -> tuple:
        limit = self.step_limit
        ops, terms, moves = c.ops, c.terms, c.moves
        while True:
            for op in ops[bid]:
                op(env, mem, self)
            self.steps += len(ops[bid]) + 1
            if self.steps > limit:
                raise Trap("steps", f"step limit {limit} exceeded")
            t = terms[bid]
            if isinstance(t, Goto):
                nxt = t.target
            elif isinstance(t, Branch):
                cond = t.cond if isinstance(t.cond, int) else env[t.cond]
                nxt = t.then if cond else t.else_
            else:
                value = None if t.value is None else (t.value if isinstance(t.value, int) else env[t.value])
                outs = [v if isinstance(v, int) else env[v] for v in t.outs]
                return value, outs
            mv = moves[(bid, nxt)]
            if mv:
                vals = [g(env) for _, g in mv]
                for (d, _), v in zip(mv, vals):
                    env[d] = v
            bid = nxt

    def run(self, entry: str, args: list, memory: dict | None = None) -> ExecResult:
        """Execute ``entry`` from a fresh global state; traps are reported, not raised."""
        self.reset(memory)
        try:
            value, outs = self.invoke(entry, list(args))
        except Trap as t:
            return ExecResult(None, [], self.globals, list(self.trace), t.kind, self.steps)
        except RecursionError:
            return ExecResult(None, [], self.globals, list(self.trace), "steps", self.steps)
        return ExecResult(value, outs, self.globals, list(self.trace), None, self.steps)


def interpret(program: MirProgram, entry: str, args: list, memory: dict | None = None,
              step_limit: int = DEFAULT_STEP_LIMIT, hook=None) -> ExecResult:
    return Interpreter(program, hook, step_limit).run(entry, args, memory)
