"""Natural loop detection and static iteration-count estimation."""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import arith
from ..diagnostics import Diagnostics
from . import cfg
from .ir import Assign, Branch, Load, MirFunction, Phi, Store, Call

DEFAULT_COUNT = 1000


@dataclass
class LoopNode:
    header: int
    body: set
    latches: list
    exits: list = field(default_factory=list)  # [(source, target)] in exit-id order
    children: list = field(default_factory=list)
    parent: "LoopNode | None" = field(default=None, repr=False)
    local_count: int = DEFAULT_COUNT
    heuristic: bool = True
    reducible: bool = True

    def depth(self) -> int:
        d, p = 0, self.parent
        while p is not None:
            d, p = d + 1, p.parent
        return d

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def ancestors(self):
        p = self.parent
        while p is not None:
            yield p
            p = p.parent


@dataclass
class LoopForest:
    function: str
    roots: list = field(default_factory=list)

    def __iter__(self):
        for r in self.roots:
            yield from r.walk()

    def __len__(self):
        return sum(1 for _ in self)

    def innermost(self, block: int) -> LoopNode | None:
        best = None
        for node in self:
            if block in node.body and (best is None or len(node.body) < len(best.body)):
                best = node
        return best

    def by_header(self, header: int) -> LoopNode | None:
        for node in self:
            if node.header == header:
                return node
        return None


def find_loops(f: MirFunction, diags: Diagnostics | None = None,
               default_count: int = DEFAULT_COUNT) -> LoopForest:
    diags = diags or Diagnostics()
    succ = f.successors()
    idom = cfg.dominators(succ, f.entry)
    back, irreducible = cfg.back_edges(succ, f.entry, idom)
    latches = {}
    for tail, head in back:
        latches.setdefault(head, []).append(tail)
    order = {b: i for i, b in enumerate(cfg.reverse_postorder(succ, f.entry))}

    nodes = []
    for head in sorted(latches, key=order.get):
        body = cfg.natural_loop_body(succ, head, latches[head])
        node = LoopNode(head, body, sorted(latches[head], key=order.get))
        node.exits = [(b, s) for b in sorted(body, key=order.get) for s in succ[b] if s not in body]
        nodes.append(node)

    for tail, head in irreducible:
        line = f.line
        diags.warn(f"irreducible control flow in '{f.name}' (edge {tail}->{head}); region is not a loop candidate",
                   f.unit, line, 0)
        for node in nodes:
            if tail in node.body and head in node.body:
                node.reducible = False

    # nest by body containment: parent is the smallest strictly larger containing body
    forest = LoopForest(f.name)
    for node in nodes:
        parent = None
        for other in nodes:
            if other is node or not node.body < other.body:
                continue
            if parent is None or len(other.body) < len(parent.body):
                parent = other
        node.parent = parent
        (parent.children if parent is not None else forest.roots).append(node)
    for node in nodes:
        node.children.sort(key=lambda n: order[n.header])
        count = counted_loop_count(f, node)
        if count is None:
            node.local_count, node.heuristic = default_count, True
        else:
            node.local_count, node.heuristic = count, False
    forest.roots.sort(key=lambda n: order[n.header])
    return forest


def _defs(f: MirFunction) -> dict:
    return {s.dest: s for _, s in f.statements() if isinstance(s, (Assign, Phi, Load))}


def counted_loop_count(f: MirFunction, loop: LoopNode) -> int | None:
    """Back-edge executions of an affine counted loop, or None when not derivable.

    Recognised shape (SSA): a header phi ``iv = phi(init, next)`` with a
    constant ``init`` from outside the loop, ``next = iv + step`` with constant
    step, and a single latch ending in ``if (next <op> bound)`` back to the
    header with constant bound.  The count is the number of consecutive
    ``j >= 1`` with ``init + step*j <op> bound``.
    """
    if not f.ssa or len(loop.latches) != 1:
        return None
    latch = f.blocks[loop.latches[0]]
    term = latch.term
    if not isinstance(term, Branch) or not isinstance(term.cond, str):
        return None
    defs = _defs(f)
    cmp = defs.get(term.cond)
    if not isinstance(cmp, Assign) or cmp.op not in arith.COMPARE_OPS:
        return None
    op = cmp.op
    if term.then != loop.header:
        if term.else_ != loop.header:
            return None
        op = arith.NEGATED[op]
    a, b = cmp.args
    if isinstance(a, int) or (isinstance(a, str) and _const(defs, a) is not None):
        a, b = b, a
        op = arith.SWAPPED[op]
    bound = b if isinstance(b, int) else _const(defs, b)
    if bound is None or not isinstance(a, str):
        return None
    inc = defs.get(a)
    if not isinstance(inc, Assign) or inc.op not in ("add", "sub"):
        return None
    x, y = inc.args
    if inc.op == "add" and isinstance(x, int):
        x, y = y, x
    step = y if isinstance(y, int) else _const(defs, y) if isinstance(y, str) else None
    if step is None or not isinstance(x, str):
        return None
    if inc.op == "sub":
        step = -step
    phi = defs.get(x)
    if not isinstance(phi, Phi) or phi not in f.blocks[loop.header].stmts:
        return None
    init = None
    for pred, v in phi.incoming:
        if pred in loop.body:
            if v != a:
                return None
        else:
            iv = v if isinstance(v, int) else _const(defs, v)
            if iv is None or (init is not None and iv != init):
                return None
            init = iv
    if init is None or step == 0:
        return None
    return _affine_count(init, step, op, bound)


def _const(defs: dict, v: str):
    s = defs.get(v)
    if isinstance(s, Assign) and s.op == "const":
        return s.args[0]
    return None


def _affine_count(init: int, step: int, op: str, bound: int) -> int | None:
    """Number of consecutive j >= 1 with ``init + step*j <op> bound`` (no wraparound)."""
    def holds(j):
        v = init + step * j
        return arith.binary(op, v, bound) if arith.INT_MIN <= v <= arith.INT_MAX else None

    if not holds(1):
        return 0
    # monotone predicates: find the first failing j analytically
    if op in ("lt", "le", "gt", "ge"):
        increasing = step > 0
        if (op in ("lt", "le")) != increasing:
            return None  # condition never turns false without wraparound
        limit = bound + (1 if op == "le" else -1 if op == "ge" else 0)
        # smallest j with the predicate false
        if increasing:
            # init + step*j >= limit (lt/le)
            j = -(-(limit - init) // step)
        else:
            j = -(-(init - limit) // -step)
        j = max(j, 1)
        count = j - 1
    elif op == "ne":
        diff = bound - init
        if diff % step != 0 or diff // step < 1:
            return None
        count = diff // step - 1
    else:  # eq holds for j=1 only, since step != 0
        count = 1
    last = init + step * (count + 1)
    if not arith.INT_MIN <= last <= arith.INT_MAX:
        return None
    return count


def loop_statements(f: MirFunction, loop: LoopNode) -> list:
    """Statements of the loop body blocks in layout order."""
    return [s for b in f if b.id in loop.body for s in b.stmts]


def loop_calls(f: MirFunction, loop: LoopNode) -> list:
    out = []
    for s in loop_statements(f, loop):
        if isinstance(s, Call) and s.func not in out:
            out.append(s.func)
    return out


def loop_mem_accesses(f: MirFunction, loop: LoopNode) -> int:
    return sum(1 for s in loop_statements(f, loop) if isinstance(s, (Load, Store)))
