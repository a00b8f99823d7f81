"""If-conversion of a loop nest into a predicated dataflow graph.

Each loop of the nest is one *level*.  A level's region is its body minus
the bodies of its child loops; every child loop appears in the parent's
region as a single compound node that runs the child's sub-machine.  Inside
a region, both arms of every branch are computed; phis become selects on
edge predicates, and loads, stores and divisions carry the predicate of
their block so they have no effect (and cannot trap) off the taken path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import arith
from ..frontend.ir import Assign, Branch, Call, Goto, Load, MirFunction, Phi, Store, defined_values, var_of
from ..frontend.loops import LoopNode
from .costmodel import CostModel

MEMORY_OPS = ("load", "store")


class Unsupported(Exception):
    """The loop cannot be turned into an accelerator."""


@dataclass
class Node:
    id: int
    op: str
    dest: str | None
    args: list
    level: int
    key: int  # region node: block id, or child header for compounds
    pred: object = None  # operand gating a side effect or trap; None means always
    array: str | None = None
    child: int | None = None

    def operands(self) -> list:
        ops = list(self.args)
        if self.pred is not None:
            ops.append(self.pred)
        return [o for o in ops if isinstance(o, str)]


@dataclass
class HeaderPhi:
    reg: str
    init: object
    latch: list  # [(edge predicate, value)]


@dataclass
class Level:
    id: int
    header: int
    parent: int | None
    body: set
    order: list  # region node keys in topological order
    ancestors: dict  # key -> set of keys that reach it
    phis: list = field(default_factory=list)
    exits: list = field(default_factory=list)  # [(source block, target block)]
    exit_keys: list = field(default_factory=list)
    exit_preds: list = field(default_factory=list)
    childexit: str | None = None
    children: list = field(default_factory=list)
    nodes: list = field(default_factory=list)  # node ids
    compound: int | None = None  # node id in the parent level


@dataclass
class Dfg:
    function: str
    header: int
    nodes: list
    edges: list  # (u, v, kind) with kind in data/mem/order
    levels: list
    inputs: list  # [(var name, ssa value)]
    outputs: list  # [(var name, [operand or None per exit])]

    @property
    def exits(self) -> list:
        return self.levels[0].exits

    def preds_of(self) -> dict:
        out = {n.id: [] for n in self.nodes}
        for u, v, _ in self.edges:
            out[v].append(u)
        return out

    def level_nodes(self, level: int) -> list:
        return [self.nodes[i] for i in self.levels[level].nodes]


def ssa_liveness(f: MirFunction) -> dict:
    """SSA live-in sets per block; phi operands count as uses on their edge."""
    succ = f.successors()
    use, defs, phi_defs = {}, {}, {}
    for b in f:
        u, d = set(), set()
        pd = set()
        for s in b.stmts:
            if isinstance(s, Phi):
                pd.add(s.dest)
                continue
            u.update(v for v in s.uses() if v not in d)
            d.update(defined_values(s))
        u.update(v for v in b.term.uses() if v not in d)
        use[b.id], defs[b.id], phi_defs[b.id] = u, d | pd, pd
    live = {b: set() for b in f.blocks}
    changed = True
    while changed:
        changed = False
        for b in reversed(list(f.blocks)):
            out = set()
            for s in succ[b]:
                out |= live[s] - phi_defs[s]
                for phi in f.blocks[s].phis():
                    for p, v in phi.incoming:
                        if p == b and isinstance(v, str):
                            out.add(v)
            new = use[b] | (out - defs[b]) | phi_defs[b]
            if new != live[b]:
                live[b] = new
                changed = True
    return live


def edge_values(f: MirFunction, live: dict, src: int, dst: int) -> list:
    """[(variable, value)] live along the edge src->dst, phi operands resolved."""
    out = {}
    target = f.blocks[dst]
    phi_dests = set()
    for phi in target.phis():
        phi_dests.add(phi.dest)
        for p, v in phi.incoming:
            if p == src:
                out[var_of(phi.dest)] = v
    for v in sorted(live[dst] - phi_dests):
        out.setdefault(var_of(v), v)
    return sorted(out.items())


class _Builder:
    def __init__(self, f: MirFunction, loop: LoopNode, model: CostModel):
        self.f = f
        self.loop = loop
        self.model = model
        self.nodes: list = []
        self.levels: list = []
        self.consts = {s.dest: s.args[0] for _, s in f.statements()
                       if isinstance(s, Assign) and s.op == "const"}
        self.appear: list = []  # operand registers in order of first use
        self.ep: dict = {}  # (source block, target block) -> predicate operand
        self.npred = 0

    # operands

    def opnd(self, v):
        if isinstance(v, int):
            return v
        if v in self.consts:
            return self.consts[v]
        if v not in self.appear:
            self.appear.append(v)
        return v

    def node(self, op, dest, args, level, key, pred=None, array=None, child=None) -> Node:
        n = Node(len(self.nodes), op, dest, [self.opnd(a) for a in args], level.id, key,
                 pred=self.opnd(pred) if pred is not None else None, array=array, child=child)
        self.nodes.append(n)
        level.nodes.append(n.id)
        return n

    def preg(self) -> str:
        self.npred += 1
        return f"__p{self.npred}"

    def sreg(self) -> str:
        self.npred += 1
        return f"__s{self.npred}"

    def land(self, a, b, level, key):
        if a == 0 or b == 0:
            return 0
        if a == 1:
            return b
        if b == 1:
            return a
        return self.node("land", self.preg(), [a, b], level, key).dest

    def lor(self, terms, level, key):
        terms = [t for t in terms if t != 0]
        if any(t == 1 for t in terms):
            return 1
        if not terms:
            return 0
        acc = terms[0]
        for t in terms[1:]:
            acc = self.node("lor", self.preg(), [acc, t], level, key).dest
        return acc

    def lnot(self, c, level, key):
        if isinstance(c, int):
            return int(not c)
        return self.node("lnot", self.preg(), [c], level, key).dest

    # levels

    def build_level(self, loop: LoopNode, parent: int | None) -> Level:
        f = self.f
        if not loop.reducible:
            raise Unsupported(f"irreducible control flow in the loop at bb{loop.header}")
        child_of = {}
        for c in loop.children:
            for b in c.body:
                child_of[b] = c
        key_of = {b: (child_of[b].header if b in child_of else b) for b in loop.body}
        succ = f.successors()
        # region edges: (key, source block, target block)
        out_edges = {}
        for b in loop.body:
            if b in child_of:
                continue
            out_edges[b] = [(b, t) for t in succ[b]]
        for c in loop.children:
            out_edges[c.header] = list(c.exits)
        for key, edges in out_edges.items():
            for s, t in edges:
                if t in loop.body and t != loop.header and key_of[t] != t and t != child_of[t].header:
                    raise Unsupported(f"irreducible entry into the loop at bb{child_of[t].header}")
        order = self._topo(loop, out_edges, key_of)
        index = {k: i for i, k in enumerate(order)}
        ancestors = {k: set() for k in order}
        for k in order:
            for s, t in out_edges[k]:
                if t in loop.body and t != loop.header:
                    tk = key_of[t]
                    if index[tk] <= index[k]:
                        raise Unsupported(f"irreducible control flow in the loop at bb{loop.header}")
                    ancestors[tk] |= ancestors[k] | {k}
        level = Level(len(self.levels), loop.header, parent, set(loop.body), order, ancestors)
        self.levels.append(level)
        if parent is not None:
            level.childexit = f"__exit{level.id}"
        in_preds = {k: [] for k in order}
        children = {c.header: c for c in loop.children}
        header_phis = []
        for k in order:
            p = 1 if k == loop.header else self.lor(in_preds[k], level, k)
            if k in children:
                c = children[k]
                comp = self.node("compound", None, [], level, k, pred=p if p != 1 else None)
                sub = self.build_level(c, level.id)
                comp.child = sub.id
                sub.compound = comp.id
                level.children.append(sub.id)
                for idx, (s, t) in enumerate(c.exits, 1):
                    if len(c.exits) == 1:
                        e = p
                    else:
                        hit = self.node("eq", self.preg(), [sub.childexit, idx], level, k).dest
                        e = self.land(p, hit, level, k)
                    self._edge(s, t, e, loop, key_of, in_preds)
                continue
            blk = f.blocks[k]
            for s in blk.stmts:
                if isinstance(s, Phi):
                    if k == loop.header:
                        header_phis.append(s)
                    else:
                        self._phi_select(s, k, level)
                    continue
                self._stmt(s, p, level, k)
            t = blk.term
            if isinstance(t, Goto):
                self._edge(k, t.target, p, loop, key_of, in_preds)
            elif isinstance(t, Branch):
                c = self.opnd(t.cond)
                self._edge(k, t.then, self.land(p, c, level, k), loop, key_of, in_preds)
                self._edge(k, t.else_, self.land(p, self.lnot(c, level, k), level, k), loop, key_of, in_preds)
            else:
                raise Unsupported(f"return inside the loop at bb{k}")
        for phi in header_phis:
            init, latch = None, []
            for pb, v in phi.incoming:
                if pb in loop.body:
                    latch.append((self.ep[(pb, loop.header)], self.opnd(v)))
                else:
                    init = self.opnd(v)
            level.phis.append(HeaderPhi(phi.dest, init, latch))
        for s, t in loop.exits:
            level.exits.append((s, t))
            level.exit_keys.append(key_of[s])
            level.exit_preds.append(self.ep[(s, t)])
        return level

    def _edge(self, s, t, pred, loop, key_of, in_preds) -> None:
        self.ep[(s, t)] = pred
        if t in loop.body and t != loop.header:
            in_preds[key_of[t]].append(pred)

    def _topo(self, loop, out_edges, key_of) -> list:
        seen, post = set(), []
        stack = [(loop.header, iter(out_edges[loop.header]))]
        seen.add(loop.header)
        while stack:
            k, it = stack[-1]
            for s, t in it:
                if t in loop.body and t != loop.header:
                    tk = key_of[t]
                    if tk not in seen:
                        seen.add(tk)
                        stack.append((tk, iter(out_edges[tk])))
                        break
            else:
                stack.pop()
                post.append(k)
        return list(reversed(post))

    def _phi_select(self, phi: Phi, key, level) -> None:
        inc = [(self.ep[(p, key)], self.opnd(v)) for p, v in phi.incoming]
        values = {v for _, v in inc}
        if len(values) == 1:
            self.node("copy", phi.dest, [inc[0][1]], level, key)
            return
        acc = inc[-1][1]
        for k, (pred, v) in enumerate(reversed(inc[:-1])):
            last = k == len(inc) - 2
            dest = phi.dest if last else self.sreg()
            if pred == 1:
                self.node("copy", dest, [v], level, key)
                acc = dest
                continue
            if pred == 0:
                self.node("copy", dest, [acc], level, key)
                acc = dest
                continue
            self.node("select", dest, [pred, v, acc], level, key)
            acc = dest

    def _stmt(self, s, p, level, key) -> None:
        gate = None if p == 1 else p
        if isinstance(s, Assign):
            if s.op == "const":
                return
            if s.op not in arith.BINARY_OPS and s.op not in arith.UNARY_OPS:
                raise Unsupported(f"unsupported operation '{s.op}'")
            pred = gate if s.op in arith.TRAPPING_OPS else None
            self.node(s.op, s.dest, s.args, level, key, pred=pred)
        elif isinstance(s, Load):
            self.node("load", s.dest, [s.index], level, key, pred=gate, array=s.array)
        elif isinstance(s, Store):
            self.node("store", None, [s.index, s.value], level, key, pred=gate, array=s.array)
        elif isinstance(s, Call):
            raise Unsupported(f"unsupported statement: call to '{s.func}'")
        else:
            raise Unsupported(f"unsupported statement {s!r}")


def compute_dependences(nodes: list, levels: list) -> list:
    """Dependence edges (u, v, kind) between nodes of the same level.

    ``data``: v reads a register u writes (a compound stands for every register
    of its sub-machine).  ``order``: a compound waits for all nodes on paths
    into it, and memory ops or compounds after it wait for it.  ``mem``:
    same-array pairs involving a store, in program order along a path.
    """
    producer = {}
    for n in nodes:
        if n.dest is not None:
            producer[n.dest] = n.id
    # registers defined anywhere inside a level's subtree
    owned = {}
    for lv in reversed(levels):
        regs = {nodes[i].dest for i in lv.nodes if nodes[i].dest is not None}
        regs |= {ph.reg for ph in lv.phis}
        if lv.childexit:
            regs.add(lv.childexit)
        for c in lv.children:
            regs |= owned[c]
        owned[lv.id] = regs
    edges = []
    for lv in levels:
        mine = set(lv.nodes)
        sub_of = {}
        for c in lv.children:
            for r in owned[c]:
                sub_of[r] = levels[c].compound
        for i in lv.nodes:
            n = nodes[i]
            for r in n.operands():
                u = producer.get(r)
                if u is not None and u in mine:
                    edges.append((u, i, "data"))
                elif r in sub_of:
                    edges.append((sub_of[r], i, "data"))
        # compounds wait for everything on paths into them
        for i in lv.nodes:
            n = nodes[i]
            if n.op != "compound":
                continue
            for j in lv.nodes:
                if nodes[j].key in lv.ancestors[n.key]:
                    edges.append((j, i, "order"))
            for j in lv.nodes:
                m = nodes[j]
                if m.op in MEMORY_OPS + ("compound",) and n.key in lv.ancestors[m.key]:
                    edges.append((i, j, "order"))
        mem = [nodes[i] for i in lv.nodes if nodes[i].op in MEMORY_OPS]
        for a_i, a in enumerate(mem):
            for b in mem[a_i + 1:]:
                if a.array != b.array or (a.op == "load" and b.op == "load"):
                    continue
                if a.key == b.key or a.key in lv.ancestors[b.key]:
                    edges.append((a.id, b.id, "mem"))
    seen, out = set(), []
    for u, v, k in edges:
        if (u, v) not in seen and u != v:
            seen.add((u, v))
            out.append((u, v, k))
    return out


def if_convert(f: MirFunction, loop: LoopNode, model: CostModel | None = None) -> Dfg:
    """Build the predicated dataflow graph of ``loop`` (and its nested loops)."""
    model = model or CostModel()
    if not f.ssa:
        raise ValueError("if_convert expects SSA form")
    b = _Builder(f, loop, model)
    top = b.build_level(loop, None)
    edges = compute_dependences(b.nodes, b.levels)

    defined = {n.dest for n in b.nodes if n.dest is not None}
    for lv in b.levels:
        defined |= {ph.reg for ph in lv.phis}
        if lv.childexit:
            defined.add(lv.childexit)

    # live-outs along each top-level exit edge
    live = ssa_liveness(f)
    per_var = {}
    for k, (s, t) in enumerate(top.exits):
        for var, v in edge_values(f, live, s, t):
            per_var.setdefault(var, {})[k] = v
    outputs = []
    for var in sorted(per_var):
        srcs = per_var[var]
        if not any(isinstance(v, str) and v in defined for v in srcs.values()):
            continue
        outputs.append((var, [b.opnd(srcs[k]) if k in srcs else None for k in range(len(top.exits))]))

    live_ins = [v for v in b.appear if v not in defined]
    params = {p.value: i for i, p in enumerate(f.params) if not p.out}
    live_ins.sort(key=lambda v: (0, params[v]) if v in params else (1, b.appear.index(v)))
    inputs, names = [], set()
    for v in live_ins:
        name = var_of(v)
        base, k = name, 0
        while name in names:
            k += 1
            name = f"{base}_{k}"
        names.add(name)
        inputs.append((name, v))
    return Dfg(f.name, loop.header, b.nodes, edges, b.levels, inputs, outputs)
