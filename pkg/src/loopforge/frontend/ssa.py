"""SSA construction by dominance frontiers, plus the small CFG clean-ups around it.

The form produced is conventional SSA: no pass copies values across
variables, so stripping versions (``destruct_ssa``) gives back a correct
variable-form program.  The patcher relies on this to edit a function and
rebuild SSA from scratch.
"""

from __future__ import annotations

from .. import arith
from ..diagnostics import Diagnostics
from . import cfg
from .ir import (Assign, BasicBlock, Branch, Call, Goto, Load, MirFunction, Param, Phi,
                 Return, Store, defined_values, var_of)


def _retarget(term, old: int, new: int):
    if isinstance(term, Goto):
        return Goto(new if term.target == old else term.target)
    if isinstance(term, Branch):
        t = new if term.then == old else term.then
        e = new if term.else_ == old else term.else_
        return Goto(t) if t == e else Branch(term.cond, t, e)
    return term


def remove_unreachable(f: MirFunction) -> None:
    live = cfg.reachable(f.successors(), f.entry)
    live.add(f.exit)
    dead = [bid for bid in f.blocks if bid not in live]
    for bid in dead:
        del f.blocks[bid]
    if dead and f.ssa:
        dead_set = set(dead)
        for b in f:
            for phi in b.phis():
                phi.incoming = [(p, v) for p, v in phi.incoming if p not in dead_set]


def simplify_cfg(f: MirFunction) -> None:
    """Bypass empty forwarding blocks and merge straight-line pairs (variable form only)."""
    assert not f.ssa
    remove_unreachable(f)
    changed = True
    while changed:
        changed = False
        for b in list(f):
            if b.id in (f.entry, f.exit) or b.stmts or not isinstance(b.term, Goto):
                continue
            target = b.term.target
            if target == b.id:
                continue
            for p in f:
                if b.id in p.successors():
                    p.term = _retarget(p.term, b.id, target)
            del f.blocks[b.id]
            changed = True
        preds = f.predecessors()
        for b in list(f):
            if b.id not in f.blocks or not isinstance(b.term, Goto):
                continue
            t = b.term.target
            if t in (b.id, f.exit, f.entry) or len(preds[t]) != 1:
                continue
            nxt = f.blocks.pop(t)
            b.stmts.extend(nxt.stmts)
            b.term = nxt.term
            changed = True
            preds = f.predecessors()
        remove_unreachable(f)


def renumber(f: MirFunction) -> dict:
    """Lay blocks out in reverse postorder (exit last) and renumber them 0..n-1."""
    order = [b for b in cfg.reverse_postorder(f.successors(), f.entry) if b != f.exit]
    order += [b for b in f.blocks if b not in order and b != f.exit]
    order.append(f.exit)
    mapping = {old: new for new, old in enumerate(order)}
    blocks = {}
    for old in order:
        b = f.blocks[old]
        b.id = mapping[old]
        t = b.term
        if isinstance(t, Goto):
            b.term = Goto(mapping[t.target])
        elif isinstance(t, Branch):
            b.term = Branch(t.cond, mapping[t.then], mapping[t.else_])
        for phi in b.phis():
            phi.incoming = [(mapping[p], v) for p, v in phi.incoming]
        blocks[b.id] = b
    f.blocks = blocks
    f.entry = mapping[f.entry]
    f.exit = mapping[f.exit]
    return mapping


def insert_preheaders(f: MirFunction) -> list:
    """Give every loop header exactly one predecessor from outside the loop."""
    assert not f.ssa
    succ = f.successors()
    idom = cfg.dominators(succ, f.entry)
    back, _ = cfg.back_edges(succ, f.entry, idom)
    headers = {}
    for tail, head in back:
        headers.setdefault(head, []).append(tail)
    created = []
    for head in sorted(headers):
        succ = f.successors()
        body = cfg.natural_loop_body(succ, head, headers[head])
        preds = cfg.predecessors(succ)[head]
        outside = [p for p in preds if p not in body]
        if len(outside) <= 1 and head != f.entry:
            continue
        pre = f.next_block_id()
        f.blocks[pre] = BasicBlock(pre, [], Goto(head))
        for p in outside:
            f.blocks[p].term = _retarget(f.blocks[p].term, head, pre)
        if head == f.entry:
            f.entry = pre
        created.append(pre)
    return created


def _liveness(f: MirFunction) -> dict:
    """Variable-form live-in sets."""
    use, defs = {}, {}
    for b in f:
        u, d = set(), set()
        for s in b.stmts:
            for v in s.uses():
                if v not in d:
                    u.add(v)
            d.update(defined_values(s))
        for v in b.term.uses():
            if v not in d:
                u.add(v)
        use[b.id], defs[b.id] = u, d
    succ = f.successors()
    live_in = {b: set() for b in f.blocks}
    order = list(reversed(cfg.reverse_postorder(succ, f.entry)))
    changed = True
    while changed:
        changed = False
        for b in order:
            out = set()
            for s in succ[b]:
                out |= live_in[s]
            new = use[b] | (out - defs[b])
            if new != live_in[b]:
                live_in[b] = new
                changed = True
    return live_in


def construct_ssa(f: MirFunction, diags: Diagnostics | None = None) -> None:
    """Rename variables into pruned SSA in place."""
    assert not f.ssa
    diags = diags or Diagnostics()
    succ = f.successors()
    preds = f.predecessors()
    idom = cfg.dominators(succ, f.entry)
    df = cfg.dominance_frontiers(succ, idom)
    live_in = _liveness(f)

    def_blocks = {}
    for bid, s in f.statements():
        for d in defined_values(s):
            def_blocks.setdefault(d, set()).add(bid)
    params = [p.name for p in f.params if not p.out]
    for p in params:
        def_blocks.setdefault(p, set()).add(f.entry)

    phi_vars = {b: [] for b in f.blocks}
    for v in sorted(def_blocks):
        work = list(def_blocks[v])
        placed = set()
        while work:
            n = work.pop()
            for d in sorted(df.get(n, ())):
                if d in placed:
                    continue
                placed.add(d)
                if v in live_in[d]:
                    phi_vars[d].append(v)
                if d not in def_blocks[v]:
                    work.append(d)
    for b in f:
        b.stmts[:0] = [Phi(v, [(p, v) for p in preds[b.id]]) for v in sorted(phi_vars[b.id])]

    counter = {}
    stacks = {v: [] for v in def_blocks}
    undefined = []

    def new_name(v):
        counter[v] = counter.get(v, 0) + 1
        name = f"{v}.{counter[v]}"
        stacks.setdefault(v, []).append(name)
        return name

    def current(v):
        st = stacks.get(v)
        if st:
            return st[-1]
        if v not in undefined:
            undefined.append(v)
        return f"{v}.0"

    for p in f.params:
        if not p.out:
            p.value = f"{p.name}.0"
            stacks[p.name].append(p.value)

    children = cfg.dom_tree(idom)
    # iterative dominator-tree walk; each frame remembers how many names it pushed
    work = [(f.entry, False)]
    pushed_log = []
    while work:
        bid, done = work.pop()
        if done:
            for v in pushed_log.pop():
                stacks[v].pop()
            continue
        pushed = []
        b = f.blocks[bid]
        for s in b.stmts:
            if isinstance(s, Phi):
                v = s.dest
                s.dest = new_name(v)
                pushed.append(v)
                continue
            _rename_uses(s, current)
            if isinstance(s, Call):
                if s.dest is not None:
                    v = s.dest
                    s.dest = new_name(v)
                    pushed.append(v)
                outs = []
                for v in s.outs:
                    outs.append(new_name(v))
                    pushed.append(v)
                s.outs = outs
            elif not isinstance(s, Store):
                v = s.dest
                s.dest = new_name(v)
                pushed.append(v)
        _rename_uses(b.term, current)
        for sid in b.successors():
            for phi in f.blocks[sid].phis():
                phi.incoming = [(p, current(var_of(val)) if p == bid and isinstance(val, str) and "." not in val else val)
                                for p, val in phi.incoming]
        pushed_log.append(pushed)
        work.append((bid, True))
        for c in reversed(children.get(bid, [])):
            work.append((c, False))

    entry = f.blocks[f.entry]
    for v in undefined:
        if v in params:
            continue
        line, col = f.var_lines.get(v, (f.line, 0))
        diags.warn(f"variable '{v}' is used uninitialized in '{f.name}'; using 0", f.unit, line, col)
        entry.stmts.insert(_first_non_phi(entry), Assign(f"{v}.0", "const", [0]))
    f.ssa = True


def _first_non_phi(b: BasicBlock) -> int:
    i = 0
    while i < len(b.stmts) and isinstance(b.stmts[i], Phi):
        i += 1
    return i


def _rename_uses(s, current) -> None:
    def m(v):
        return current(v) if isinstance(v, str) else v

    if isinstance(s, Assign):
        if s.op != "const":
            s.args = [m(a) for a in s.args]
    elif isinstance(s, Load):
        s.index = m(s.index)
    elif isinstance(s, Store):
        s.index, s.value = m(s.index), m(s.value)
    elif isinstance(s, Call):
        s.args = [m(a) for a in s.args]
    elif isinstance(s, Branch):
        s.cond = m(s.cond)
    elif isinstance(s, Return):
        s.value = m(s.value) if s.value is not None else None
        s.outs = [m(v) for v in s.outs]


def fold_constants(f: MirFunction) -> bool:
    """Fold constant assignments and branches in place; return True if anything changed."""
    assert f.ssa
    any_change = False
    changed = True
    while changed:
        changed = False
        consts = {}
        for _, s in f.statements():
            if isinstance(s, Assign) and s.op == "const":
                consts[s.dest] = s.args[0]

        def val(a):
            if isinstance(a, int):
                return a
            return consts.get(a)

        for b in f:
            new_stmts, tail = [], []
            for s in b.stmts:
                if isinstance(s, Assign) and s.op != "const":
                    vals = [val(a) for a in s.args]
                    if all(v is not None for v in vals):
                        try:
                            r = arith.evaluate(s.op, vals)
                        except arith.DivisionByZero:
                            new_stmts.append(s)
                            continue
                        s = Assign(s.dest, "const", [r])
                        consts[s.dest] = r
                        changed = True
                elif isinstance(s, Phi):
                    vals = {val(v) for _, v in s.incoming}
                    if len(s.incoming) == 1 or (len(vals) == 1 and None not in vals and s.incoming):
                        if len(vals) == 1 and None not in vals:
                            s = Assign(s.dest, "const", [vals.pop()])
                            consts[s.dest] = s.args[0]
                        else:
                            s = Assign(s.dest, "copy", [s.incoming[0][1]])
                        tail.append(s)
                        changed = True
                        continue
                new_stmts.append(s)
            # converted phis go right after the remaining phis
            k = 0
            while k < len(new_stmts) and isinstance(new_stmts[k], Phi):
                k += 1
            b.stmts = new_stmts[:k] + tail + new_stmts[k:]
            if isinstance(b.term, Branch):
                c = val(b.term.cond)
                if b.term.then == b.term.else_:
                    b.term = Goto(b.term.then)
                    changed = True
                elif c is not None:
                    keep, drop = (b.term.then, b.term.else_) if c else (b.term.else_, b.term.then)
                    b.term = Goto(keep)
                    for phi in f.blocks[drop].phis():
                        phi.incoming = [(p, v) for p, v in phi.incoming if p != b.id]
                    changed = True
        before = len(f.blocks)
        remove_unreachable(f)
        if len(f.blocks) != before:
            changed = True
        any_change |= changed
    return any_change


def destruct_ssa(f: MirFunction) -> None:
    """Strip SSA versions and drop phis (valid because the SSA is conventional)."""
    assert f.ssa
    for b in f:
        stmts = []
        for s in b.stmts:
            if isinstance(s, Phi):
                continue
            if isinstance(s, Assign):
                s.dest = var_of(s.dest)
                if s.op != "const":
                    s.args = [var_of(a) if isinstance(a, str) else a for a in s.args]
                if s.op == "copy" and s.args[0] == s.dest:
                    continue
            elif isinstance(s, Load):
                s.dest = var_of(s.dest)
                s.index = var_of(s.index) if isinstance(s.index, str) else s.index
            elif isinstance(s, Store):
                s.index = var_of(s.index) if isinstance(s.index, str) else s.index
                s.value = var_of(s.value) if isinstance(s.value, str) else s.value
            elif isinstance(s, Call):
                s.dest = var_of(s.dest) if s.dest is not None else None
                s.args = [var_of(a) if isinstance(a, str) else a for a in s.args]
                s.outs = [var_of(v) for v in s.outs]
            stmts.append(s)
        b.stmts = stmts
        t = b.term
        if isinstance(t, Branch) and isinstance(t.cond, str):
            t.cond = var_of(t.cond)
        elif isinstance(t, Return):
            if isinstance(t.value, str):
                t.value = var_of(t.value)
            t.outs = [var_of(v) if isinstance(v, str) else v for v in t.outs]
    for p in f.params:
        p.value = p.name
    f.ssa = False


def to_ssa(f: MirFunction, diags: Diagnostics | None = None) -> MirFunction:
    """Full pipeline from freshly lowered variable form to folded SSA."""
    simplify_cfg(f)
    insert_preheaders(f)
    renumber(f)
    construct_ssa(f, diags)
    fold_constants(f)
    renumber(f)
    return f


__all__ = ["to_ssa", "construct_ssa", "destruct_ssa", "fold_constants", "simplify_cfg",
           "insert_preheaders", "renumber", "remove_unreachable", "Param"]
