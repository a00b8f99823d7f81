"""First-run passes: record each unit's functions and loops in the transcript."""

from __future__ import annotations

from .diagnostics import Diagnostics
from .frontend.ir import Call, Phi, TranslationUnit
from .frontend.loops import find_loops, loop_calls, loop_mem_accesses
from . import transcript as T
from .transcript import FunctionRecord, LoopRecord, UnitSection


def emission_order(unit: TranslationUnit) -> list:
    """Functions callee-before-caller over the unit-local call graph, ties by source order."""
    local = {f.name for f in unit.functions}
    callees = {f.name: {s.func for _, s in f.statements() if isinstance(s, Call) and s.func in local} - {f.name}
               for f in unit.functions}
    done, order = set(), []
    pending = [f.name for f in unit.functions]
    while pending:
        pick = next((n for n in pending if callees[n] <= done), pending[0])
        pending.remove(pick)
        done.add(pick)
        order.append(pick)
    return order


def collect_functions(unit: TranslationUnit, forests: dict | None = None) -> list:
    """One FunctionRecord per defined function, in emission order.

    ``forests`` maps function name to LoopForest; call sites inside loops
    are tagged with the innermost loop's position in preorder (1-based), which
    collect_loops later rewrites to global loop ids.
    """
    forests = forests if forests is not None else {f.name: find_loops(f) for f in unit.functions}
    records = []
    for name in emission_order(unit):
        f = unit.function(name)
        forest = forests[name]
        pre = {id(node): k for k, node in enumerate(forest, 1)}
        callees, sites = [], []
        for bid, s in f.statements():
            if not isinstance(s, Call):
                continue
            if s.func not in callees:
                callees.append(s.func)
            node = forest.innermost(bid)
            site = (s.func, pre[id(node)] if node is not None else 0)
            if site not in sites:
                sites.append(site)
        records.append(FunctionRecord(unit.name, name, callees, sites))
    return records


def collect_loops(unit: TranslationUnit, forests: dict, first_id: int = 1, order: list | None = None) -> list:
    """LoopRecords for every loop of the unit, numbered from ``first_id``."""
    order = order or emission_order(unit)
    records = []
    next_id = first_id
    for name in order:
        f = unit.function(name)
        ids = {}
        for node in forests[name]:
            ids[id(node)] = next_id
            callees = loop_calls(f, node)
            stmts = sum(1 for b in f if b.id in node.body for s in b.stmts if not isinstance(s, Phi))
            arrays = []
            for b in f:
                if b.id in node.body:
                    for s in b.stmts:
                        arr = getattr(s, "array", None)
                        if arr is not None and arr not in arrays:
                            arrays.append(arr)
            reducible = all(n.reducible for n in node.walk())
            records.append(LoopRecord(
                loop_id=next_id, unit=unit.name, function=name, local_count=node.local_count,
                has_call=bool(callees), well_nested=not callees and reducible, callees=callees,
                mem_accesses=loop_mem_accesses(f, node),
                parent=ids[id(node.parent)] if node.parent is not None else 0,
                header=node.header, stmts=stmts, heuristic=node.heuristic, arrays=arrays))
            next_id += 1
    return records


def collect_unit(unit: TranslationUnit, first_id: int, diags: Diagnostics | None = None) -> UnitSection:
    diags = diags or Diagnostics()
    forests = {f.name: find_loops(f, diags) for f in unit.functions}
    order = emission_order(unit)
    loops = collect_loops(unit, forests, first_id, order)
    funcs = collect_functions(unit, forests)
    # rewrite preorder positions into global ids
    for rec in funcs:
        ids = [l.loop_id for l in loops if l.function == rec.name]
        rec.call_sites = [(c, ids[k - 1] if k else 0) for c, k in rec.call_sites]
    return UnitSection(unit.name, unit.checksum, funcs, loops)


def append_transcript(path, section_or_unit, diags: Diagnostics | None = None) -> T.Transcript:
    """Add a unit to the transcript at ``path``, replacing an existing section of that name."""
    t = T.read(path)
    section = section_or_unit
    if isinstance(section_or_unit, TranslationUnit):
        section = collect_unit(section_or_unit, t.next_loop, diags)
    t.replace_unit(section)
    if section.loops:
        t.next_loop = max(t.next_loop, max(l.loop_id for l in section.loops) + 1)
    T.write(path, t)
    return t


def collect_program(units: list, diags: Diagnostics | None = None, start: T.Transcript | None = None) -> T.Transcript:
    """Collect all units in order into a transcript (in memory)."""
    t = start if start is not None else T.Transcript()
    for u in units:
        section = collect_unit(u, t.next_loop, diags)
        t.replace_unit(section)
        t.next_loop += len(section.loops)
    return t
