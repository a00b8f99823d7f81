"""List scheduling with operation chaining, one level of the loop nest at a time."""

from __future__ import annotations

from dataclasses import dataclass, field

from .costmodel import CostModel
from .dfg import MEMORY_OPS, Dfg


class ScheduleError(Exception):
    pass


def node_kind(op: str, model: CostModel) -> str:
    if op in MEMORY_OPS:
        return "mem"
    if op == "compound":
        return "compound"
    if model.multicycle(op) > 1:
        return "multi"
    return "comb"


@dataclass
class Schedule:
    state: dict = field(default_factory=dict)  # node -> state index within its level
    pos: dict = field(default_factory=dict)  # node -> position within its state
    arrival: dict = field(default_factory=dict)  # node -> chained delay at its output
    states: dict = field(default_factory=dict)  # level -> [[node ids in chain order]]

    def state_delay(self, level: int, s: int) -> int:
        return max((self.arrival[n] for n in self.states[level][s]), default=0)


def priorities(dfg: Dfg, model: CostModel) -> dict:
    """Longest delay path from each node to any sink of its level."""
    succs = {n.id: [] for n in dfg.nodes}
    for u, v, _ in dfg.edges:
        succs[u].append(v)
    prio = {}
    # edges can point backwards in id (a compound waits for nodes created
    # after it), so walk a real topological order
    for i in reversed(_topological(dfg)):
        n = dfg.nodes[i]
        d = _unit_delay(n.op, model)
        prio[i] = d + max((prio[s] for s in succs[i]), default=0)
    return prio


def _unit_delay(op: str, model: CostModel) -> int:
    if op == "compound":
        return model.clock_budget
    return max(model.delay(op), 1 if op in MEMORY_OPS else 0)


def _topological(dfg: Dfg) -> list:
    indeg = {n.id: 0 for n in dfg.nodes}
    succs = {n.id: [] for n in dfg.nodes}
    for u, v, _ in dfg.edges:
        succs[u].append(v)
        indeg[v] += 1
    ready = sorted(i for i, d in indeg.items() if d == 0)
    out = []
    while ready:
        i = ready.pop(0)
        out.append(i)
        for s in succs[i]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
        ready.sort()
    if len(out) != len(dfg.nodes):
        raise ScheduleError("dependence graph has a cycle")
    return out


def schedule(dfg: Dfg, model: CostModel) -> Schedule:
    preds = dfg.preds_of()
    prio = priorities(dfg, model)
    kind = {n.id: node_kind(n.op, model) for n in dfg.nodes}
    sched = Schedule()
    for n in dfg.nodes:
        if kind[n.id] == "comb" and model.delay(n.op) > model.clock_budget:
            raise ScheduleError(f"unschedulable operation: '{n.op}' needs {model.delay(n.op)} delay units "
                                f"but the clock budget is {model.clock_budget}")
    for lv in dfg.levels:
        sched.states[lv.id] = _schedule_level(dfg, lv.nodes, preds, prio, kind, model, sched)
    return sched


def _schedule_level(dfg, ids, preds, prio, kind, model, sched) -> list:
    todo = set(ids)
    states = []
    s = 0
    while todo:
        current = []
        kinds = set()
        while True:
            ready = [i for i in todo if all(p in sched.state for p in preds[i])]
            ready.sort(key=lambda i: (-prio[i], i))
            placed = None
            for i in ready:
                arr = _try_place(dfg.nodes[i], s, current, kinds, preds, kind, sched, model)
                if arr is not None:
                    placed = (i, arr)
                    break
            if placed is None:
                break
            i, arr = placed
            sched.state[i] = s
            sched.pos[i] = len(current)
            sched.arrival[i] = arr
            current.append(i)
            kinds.add(kind[i])
            todo.discard(i)
        if not current and todo:
            raise ScheduleError("scheduler made no progress")
        states.append(current)
        s += 1
    if not states:
        states.append([])
    return states


def _try_place(n, s, current, kinds, preds, kind_of, sched, model):
    """Chained arrival time of ``n`` if it fits into state ``s``, else None."""
    kind = kind_of[n.id]
    if "compound" in kinds:
        return None
    if kind == "compound" and current:
        return None
    if kind == "mem" and "mem" in kinds:
        return None
    start = 0
    for p in preds[n.id]:
        ps = sched.state[p]
        if ps < s:
            continue
        # same state: only chained combinational producers
        if kind != "comb" or kind_of[p] != "comb":
            return None
        start = max(start, sched.arrival[p])
    if kind != "comb":
        return 0
    arr = start + model.delay(n.op)
    if arr > model.clock_budget:
        return None
    return arr


def state_cycles(ops: list, model: CostModel) -> int:
    """Static cost of one state given the ops placed in it."""
    base = max((model.multicycle(op) for op in ops if op not in MEMORY_OPS and op != "compound"), default=1)
    if any(op in MEMORY_OPS for op in ops):
        base += model.mem_penalty_cycles
    return max(base, 1)


def check_schedule(nodes: dict, deps: list, state: dict, pos: dict, arrival: dict, model: CostModel) -> list:
    """Return violations of the schedule invariants (empty when legal).

    ``nodes`` maps id -> (op, level).
    """
    problems = []
    for u, v, _ in deps:
        if nodes[u][1] != nodes[v][1]:
            continue
        su, sv = state[u], state[v]
        if su < sv:
            continue
        if su > sv:
            problems.append(f"dependence {u}->{v}: producer in state {su}, consumer in state {sv}")
            continue
        ku, kv = node_kind(nodes[u][0], model), node_kind(nodes[v][0], model)
        if ku != "comb" or kv != "comb":
            problems.append(f"dependence {u}->{v}: unchained ops share state {su}")
        elif pos[u] >= pos[v]:
            problems.append(f"dependence {u}->{v}: chain order violated in state {su}")
        elif arrival[v] < arrival[u] + model.delay(nodes[v][0]):
            problems.append(f"dependence {u}->{v}: chained delay accounting is wrong")
    per_state = {}
    for i, (op, level) in nodes.items():
        per_state.setdefault((level, state[i]), []).append(i)
    for (level, s), ids in sorted(per_state.items()):
        kinds = [node_kind(nodes[i][0], model) for i in ids]
        if kinds.count("mem") > 1:
            problems.append(f"level {level} state {s}: more than one memory access")
        if "compound" in kinds and len(ids) > 1:
            problems.append(f"level {level} state {s}: compound node shares its state")
        for i in ids:
            if kinds[ids.index(i)] == "comb" and arrival[i] > model.clock_budget:
                problems.append(f"node {i}: chained delay {arrival[i]} exceeds the clock budget")
    return problems
