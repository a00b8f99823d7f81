"""The synthesized accelerator: states, datapath actions, exits and registers."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .costmodel import CostModel
from .dfg import Dfg, HeaderPhi, Level, Node, compute_dependences
from .schedule import Schedule, check_schedule, state_cycles


@dataclass
class FsmNode:
    id: int
    op: str
    dest: str | None
    args: list
    level: int
    key: int
    state: int
    pos: int
    arrival: int
    pred: object = None
    array: str | None = None
    child: int | None = None


@dataclass
class FsmExit:
    index: int  # position in the level's exit list
    id: int  # value reported through bb_idx / childexit
    source: int
    target: int
    pred: object
    state: int
    key: int  # region node the exit leaves from


@dataclass
class FsmState:
    index: int
    nodes: list
    cycles: int
    delay: int
    compound: int | None = None  # child level entered from this state
    exits: list = field(default_factory=list)  # exit positions checked at the end


@dataclass
class FsmPhi:
    reg: str
    init: object
    latch: list


@dataclass
class FsmLevel:
    id: int
    header: int
    parent: int | None
    childexit: str | None
    compound: int | None
    children: list
    nodes: list
    order: list
    ancestors: dict
    phis: list
    exits: list
    states: list


@dataclass
class FsmOutput:
    name: str
    var: str
    sources: list  # operand per top-level exit position, or None


@dataclass
class FsmSpec:
    name: str
    loop_id: int
    unit: str
    function: str
    header: int
    inputs: list  # [[register name, ssa value]]
    outputs: list  # FsmOutput
    levels: list
    nodes: list
    deps: list
    arrays: dict
    mem_ports: int
    best_cycles: int = 0
    worst_cycles: int = 0

    @property
    def exits(self) -> list:
        return self.levels[0].exits

    @property
    def input_names(self) -> list:
        return [n for n, _ in self.inputs]

    @property
    def output_names(self) -> list:
        return [o.name for o in self.outputs] + ["bb_idx"]

    def state_count(self) -> int:
        return sum(len(lv.states) for lv in self.levels)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"


def from_json(text: str) -> FsmSpec:
    d = json.loads(text)
    levels = []
    for lv in d["levels"]:
        levels.append(FsmLevel(
            lv["id"], lv["header"], lv["parent"], lv["childexit"], lv["compound"], lv["children"],
            lv["nodes"], lv["order"], {int(k): v for k, v in lv["ancestors"].items()},
            [FsmPhi(p["reg"], p["init"], [list(x) for x in p["latch"]]) for p in lv["phis"]],
            [FsmExit(**e) for e in lv["exits"]],
            [FsmState(**s) for s in lv["states"]]))
    return FsmSpec(
        d["name"], d["loop_id"], d["unit"], d["function"], d["header"],
        [list(x) for x in d["inputs"]], [FsmOutput(**o) for o in d["outputs"]], levels,
        [FsmNode(**n) for n in d["nodes"]], [list(x) for x in d["deps"]], d["arrays"], d["mem_ports"],
        d["best_cycles"], d["worst_cycles"])


def build_fsm(name: str, loop_id: int, unit: str, dfg: Dfg, sched: Schedule, model: CostModel,
              arrays: dict) -> FsmSpec:
    nodes = []
    producer = {}
    for n in dfg.nodes:
        nodes.append(FsmNode(n.id, n.op, n.dest, list(n.args), n.level, n.key, sched.state[n.id],
                             sched.pos[n.id], sched.arrival[n.id], n.pred, n.array, n.child))
        if n.dest is not None:
            producer[n.dest] = n.id
    levels = []
    for lv in dfg.levels:
        states = []
        for s, ids in enumerate(sched.states[lv.id]):
            ops = [dfg.nodes[i].op for i in ids]
            comp = next((dfg.nodes[i].child for i in ids if dfg.nodes[i].op == "compound"), None)
            states.append(FsmState(s, list(ids), state_cycles(ops, model), sched.state_delay(lv.id, s), comp))
        if states[-1].compound is not None:
            # a sub-machine returns into a continuation state of its parent
            states.append(FsmState(len(states), [], 1, 0))
        exits = []
        mine = set(lv.nodes)
        for k, ((src, dst), key, pred) in enumerate(zip(lv.exits, lv.exit_keys, lv.exit_preds)):
            keys = lv.ancestors[key] | {key}
            st = max((sched.state[i] for i in lv.nodes if dfg.nodes[i].key in keys), default=0)
            if isinstance(pred, str) and producer.get(pred) in mine:
                st = max(st, sched.state[producer[pred]])
            exits.append(FsmExit(k, k + 1, src, dst, pred, st, key))
            states[st].exits.append(k)
        levels.append(FsmLevel(
            lv.id, lv.header, lv.parent, lv.childexit, lv.compound, list(lv.children), list(lv.nodes),
            list(lv.order), {k: sorted(v) for k, v in lv.ancestors.items()},
            [FsmPhi(p.reg, p.init, [list(x) for x in p.latch]) for p in lv.phis], exits, states))
    used = set(n for n, _ in dfg.inputs)
    outputs = []
    for var, sources in dfg.outputs:
        out = f"{var}_out"
        k = 0
        while out in used:
            k += 1
            out = f"{var}_out{k}"
        used.add(out)
        outputs.append(FsmOutput(out, var, list(sources)))
    accessed = {}
    for n in dfg.nodes:
        if n.array is not None:
            accessed[n.array] = arrays[n.array]
    spec = FsmSpec(name, loop_id, unit, dfg.function, dfg.header, [list(x) for x in dfg.inputs], outputs,
                   levels, nodes, [list(e) for e in dfg.edges], dict(sorted(accessed.items())),
                   1 if accessed else 0)
    spec.best_cycles, spec.worst_cycles = cycle_bounds(spec)
    return spec


def cycle_bounds(spec: FsmSpec) -> tuple:
    """(min, max) cycles of a segment between consecutive iteration starts.

    A segment begins when any level starts an iteration (accelerator start,
    a latch transition or entry into a sub-machine) and ends at the next such
    event or when the accelerator finishes.
    """
    memo = {}
    levels = {lv.id: lv for lv in spec.levels}

    def cont(lv_id, s):
        key = ("c", lv_id, s)
        if key in memo:
            return memo[key]
        lv = levels[lv_id]
        st = lv.states[s]
        options = []
        if st.compound is not None:
            comp = spec.nodes[levels[st.compound].compound]
            options.append((0, 0))  # entering the child starts a new segment
            if comp.pred is not None and comp.pred != 1:
                options.append(after(lv_id, s))
        else:
            options.append(after(lv_id, s))
        r = (st.cycles + min(o[0] for o in options), st.cycles + max(o[1] for o in options))
        memo[key] = r
        return r

    def after(lv_id, s):
        key = ("a", lv_id, s)
        if key in memo:
            return memo[key]
        lv = levels[lv_id]
        st = lv.states[s]
        options = []
        always = False
        for k in st.exits:
            pred = lv.exits[k].pred
            if pred == 0:
                continue
            options.append(leave(lv_id, k))
            if pred == 1:
                always = True
                break
        if not always:
            options.append((0, 0) if s == len(lv.states) - 1 else cont(lv_id, s + 1))
        r = (min(o[0] for o in options), max(o[1] for o in options))
        memo[key] = r
        return r

    def leave(lv_id, k):
        lv = levels[lv_id]
        if lv.parent is None:
            return (0, 0)
        parent = levels[lv.parent]
        s = next(st.index for st in parent.states if st.compound == lv_id)
        return after(parent.id, s)

    starts = [cont(lv.id, 0) for lv in spec.levels]
    return min(s[0] for s in starts), max(s[1] for s in starts)


def _as_dfg_parts(spec: FsmSpec) -> tuple:
    nodes = [Node(n.id, n.op, n.dest, n.args, n.level, n.key, n.pred, n.array, n.child) for n in spec.nodes]
    levels = []
    for lv in spec.levels:
        L = Level(lv.id, lv.header, lv.parent, set(), lv.order, {k: set(v) for k, v in lv.ancestors.items()},
                  [HeaderPhi(p.reg, p.init, p.latch) for p in lv.phis], childexit=lv.childexit,
                  children=lv.children, nodes=lv.nodes, compound=lv.compound)
        levels.append(L)
    return nodes, levels


def validate_fsm(spec: FsmSpec, model: CostModel) -> list:
    """Structural and schedule checks; dependences are re-derived from the datapath."""
    problems = []
    ids = [e.id for e in spec.exits]
    if ids != list(range(1, len(ids) + 1)):
        problems.append(f"exit ids {ids} are not consecutive from 1 in discovery order")
    if spec.output_names.count("bb_idx") != 1:
        problems.append("bb_idx must be the single distinguished output")
    names = spec.input_names + spec.output_names
    if len(set(names)) != len(names):
        problems.append("duplicate register names")
    nodes, levels = _as_dfg_parts(spec)
    deps = compute_dependences(nodes, levels)
    deps += [tuple(d) for d in spec.deps]
    table = {n.id: (n.op, n.level) for n in spec.nodes}
    problems += check_schedule(table, deps, {n.id: n.state for n in spec.nodes},
                               {n.id: n.pos for n in spec.nodes}, {n.id: n.arrival for n in spec.nodes}, model)
    for lv in spec.levels:
        for st in lv.states:
            for pos, i in enumerate(st.nodes):
                n = spec.nodes[i]
                if n.level != lv.id or n.state != st.index or n.pos != pos:
                    problems.append(f"node {i} placement disagrees with level {lv.id} state {st.index}")
        for e in lv.exits:
            keys = set(lv.ancestors[e.key]) | {e.key}
            late = [n.id for n in spec.nodes if n.level == lv.id and n.key in keys and n.state > e.state]
            if late:
                problems.append(f"exit {e.id} of level {lv.id} is checked before nodes {late} on its path")
    return problems


def format_operand(v) -> str:
    return str(v)


def to_text(spec: FsmSpec) -> str:
    lines = [f"fsm {spec.name} loop={spec.loop_id} function={spec.function} unit={spec.unit}",
             "inputs " + (" ".join(f"{n}={v}" for n, v in spec.inputs) or "-"),
             "outputs " + " ".join([f"{o.name}[" + ",".join("-" if s is None else str(s) for s in o.sources) + "]"
                                    for o in spec.outputs] + ["bb_idx"]),
             "exits " + (" ".join(f"{e.id}:bb{e.source}->bb{e.target}" for e in spec.exits) or "-"),
             f"arrays {' '.join(f'{a}[{n}]' for a, n in spec.arrays.items()) or '-'} mem_ports={spec.mem_ports}",
             f"cycles best={spec.best_cycles} worst={spec.worst_cycles} states={spec.state_count()}",
             "IDLE: wait start; load inputs; init level 0 -> L0.S0"]
    for lv in spec.levels:
        head = f"level {lv.id} header=bb{lv.header}"
        if lv.parent is not None:
            head += f" parent={lv.parent} exitreg={lv.childexit}"
        lines.append(head)
        for p in lv.phis:
            latch = " ".join(f"{pr}?{v}" for pr, v in p.latch)
            lines.append(f"  phi {p.reg} init={p.init} latch={latch}")
        for st in lv.states:
            acts = "; ".join(_action(spec.nodes[i]) for i in st.nodes) or "-"
            guards = []
            for k in st.exits:
                e = lv.exits[k]
                where = "DONE bb_idx" if lv.parent is None else lv.childexit
                guards.append(f"if {e.pred} -> {where}={e.id}")
            if st.compound is not None:
                guards.insert(0, f"enter L{st.compound}")
            nxt = f"L{lv.id}.S0 (latch)" if st.index == len(lv.states) - 1 else f"L{lv.id}.S{st.index + 1}"
            guards.append(f"else -> {nxt}")
            lines.append(f"  L{lv.id}.S{st.index} cycles={st.cycles} delay={st.delay}: {acts} | {' | '.join(guards)}")
    lines.append("DONE: latch outputs and bb_idx; assert done -> IDLE")
    return "\n".join(lines) + "\n"


def _action(n: FsmNode) -> str:
    args = ", ".join(format_operand(a) for a in n.args)
    gate = f" if {n.pred}" if n.pred is not None else ""
    if n.op == "compound":
        return f"run L{n.child}{gate}"
    if n.op == "load":
        return f"{n.dest} = {n.array}[{n.args[0]}]{gate}"
    if n.op == "store":
        return f"{n.array}[{n.args[0]}] = {n.args[1]}{gate}"
    return f"{n.dest} = {n.op} {args}{gate}"
