"""Cycle-level simulation of a synthesized accelerator.

Within a state, a chained combinational node sees the values its chained
producers computed in the same state; every other read sees the register
contents from the end of the previous state.  Results are committed when
the state ends, which is when exit conditions are tested.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import arith
from ..synth.costmodel import CostModel
from ..synth.fsm import FsmSpec
from ..synth.schedule import node_kind
from .interp import Trap

DEFAULT_CYCLE_LIMIT = 5_000_000


class CycleLimit(Exception):
    pass


@dataclass
class SimResult:
    outputs: dict
    bb_idx: int
    cycles: int
    transfers: int
    segments: list = field(default_factory=list)  # cycles between consecutive iteration starts
    trap: str | None = None


class _Machine:
    def __init__(self, spec: FsmSpec, model: CostModel):
        self.spec = spec
        self.levels = {lv.id: lv for lv in spec.levels}
        producer = {}
        for n in spec.nodes:
            if n.dest is not None:
                producer[n.dest] = n
        kind = {n.id: node_kind(n.op, model) for n in spec.nodes}
        self.code = {}
        for n in spec.nodes:
            self.code[n.id] = self._compile(n, producer, kind)

    def _compile(self, n, producer, kind):
        def source(v):
            if isinstance(v, int):
                return lambda regs, pend: v
            p = producer.get(v)
            chained = (p is not None and p.level == n.level and p.state == n.state and p.pos < n.pos
                       and kind[p.id] == "comb" and kind[n.id] == "comb")
            if chained:
                return lambda regs, pend: pend[v]
            return lambda regs, pend: regs.get(v, 0)

        args = [source(a) for a in n.args]
        pred = source(n.pred) if n.pred is not None else None
        dest = n.dest
        op = n.op
        if op == "compound":
            return None
        if op == "load":
            arr, gi = n.array, args[0]

            def run(regs, pend, mem):
                if pred is not None and not pred(regs, pend):
                    pend[dest] = 0
                    return
                i = gi(regs, pend)
                buf = mem[arr]
                if i < 0 or i >= len(buf):
                    raise Trap("bounds", f"index {i} out of bounds for '{arr}[{len(buf)}]'")
                pend[dest] = buf[i]
            return run
        if op == "store":
            arr, gi, gv = n.array, args[0], args[1]

            def run(regs, pend, mem):
                if pred is not None and not pred(regs, pend):
                    return
                i = gi(regs, pend)
                buf = mem[arr]
                if i < 0 or i >= len(buf):
                    raise Trap("bounds", f"index {i} out of bounds for '{arr}[{len(buf)}]'")
                buf[i] = gv(regs, pend)
            return run
        if op == "select":
            c, x, y = args

            def run(regs, pend, mem):
                pend[dest] = x(regs, pend) if c(regs, pend) else y(regs, pend)
            return run
        if len(args) == 1:
            fn, a = arith.UNARY_FUNCS[op], args[0]

            def run(regs, pend, mem):
                pend[dest] = fn(a(regs, pend))
            return run
        fn, a, b = arith.BINARY_FUNCS[op], args[0], args[1]
        if op in arith.TRAPPING_OPS:
            def run(regs, pend, mem):
                if pred is not None and not pred(regs, pend):
                    pend[dest] = 0
                    return
                try:
                    pend[dest] = fn(a(regs, pend), b(regs, pend))
                except arith.DivisionByZero:
                    raise Trap("div0", "division by zero") from None
            return run

        def run(regs, pend, mem):
            pend[dest] = fn(a(regs, pend), b(regs, pend))
        return run


def _value(regs, v):
    return v if isinstance(v, int) else regs.get(v, 0)


def _truth(regs, v) -> bool:
    return v is None or bool(_value(regs, v))


def simulate_fsm(spec: FsmSpec, inputs, memory: dict | None = None, model: CostModel | None = None,
                 cycle_limit: int = DEFAULT_CYCLE_LIMIT, machine: _Machine | None = None) -> SimResult:
    """Run the accelerator once.  ``inputs`` is a list in register order or a name->value dict.

    ``memory`` maps array names to lists and is updated in place by stores.
    """
    model = model or CostModel()
    m = machine or _Machine(spec, model)
    mem = memory if memory is not None else {a: [0] * n for a, n in spec.arrays.items()}
    if isinstance(inputs, dict):
        inputs = [inputs[n] for n in spec.input_names]
    if len(inputs) != len(spec.inputs):
        raise ValueError(f"{spec.name} takes {len(spec.inputs)} inputs, got {len(inputs)}")
    regs = {value: arith.wrap(x) for (_, value), x in zip(spec.inputs, inputs)}
    transfers = len(spec.inputs) + len(spec.output_names)
    counters = {"cycles": 0, "seg": 0}
    segments = []

    def boundary():
        segments.append(counters["seg"])
        counters["seg"] = 0

    def run_level(lv) -> int:
        vals = [_value(regs, p.init) for p in lv.phis]
        for p, v in zip(lv.phis, vals):
            regs[p.reg] = v
        last = len(lv.states) - 1
        while True:
            for st in lv.states:
                counters["cycles"] += st.cycles
                counters["seg"] += st.cycles
                if counters["cycles"] > cycle_limit:
                    raise CycleLimit(f"{spec.name}: cycle limit {cycle_limit} exceeded")
                pend = {}
                for i in st.nodes:
                    fn = m.code[i]
                    if fn is not None:
                        fn(regs, pend, mem)
                regs.update(pend)
                if st.compound is not None:
                    child = m.levels[st.compound]
                    comp = spec.nodes[child.compound]
                    if _truth(regs, comp.pred):
                        boundary()
                        k = run_level(child)
                        regs[child.childexit] = child.exits[k].id
                for k in st.exits:
                    if _truth(regs, lv.exits[k].pred):
                        return k
                if st.index == last:
                    vals = []
                    for p in lv.phis:
                        v = p.latch[-1][1]
                        for pred, val in p.latch[:-1]:
                            if _truth(regs, pred):
                                v = val
                                break
                        vals.append(_value(regs, v))
                    for p, v in zip(lv.phis, vals):
                        regs[p.reg] = v
                    boundary()

    try:
        k = run_level(spec.levels[0])
    except Trap as t:
        return SimResult({}, 0, counters["cycles"], transfers, segments, t.kind)
    boundary()
    outputs = {}
    for out in spec.outputs:
        src = out.sources[k]
        outputs[out.name] = _value(regs, src) if src is not None else 0
    return SimResult(outputs, spec.exits[k].id, counters["cycles"], transfers, segments)


def machine_for(spec: FsmSpec, model: CostModel | None = None) -> _Machine:
    """Pre-decoded form of ``spec`` for repeated simulation."""
    return _Machine(spec, model or CostModel())
