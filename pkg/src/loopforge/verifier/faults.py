"""Deliberately broken accelerators, used to show that verification catches real bugs."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from ..frontend.ir import MirFunction, MirProgram
from ..frontend.loops import LoopNode
from ..synth.costmodel import CostModel
from ..synth.dfg import Dfg
from ..synth.fsm import FsmSpec, build_fsm, validate_fsm
from ..synth.schedule import ScheduleError, check_schedule, node_kind, schedule
from .equiv import check_equivalence


@dataclass
class Fault:
    kind: str  # swap-exits or drop-dependence
    description: str
    spec: FsmSpec


@dataclass
class Detection:
    fault: Fault
    validator: list = field(default_factory=list)
    counterexamples: int = 0

    @property
    def caught(self) -> bool:
        return bool(self.validator) or self.counterexamples > 0

    def line(self) -> str:
        how = []
        if self.validator:
            how.append(f"validator({len(self.validator)})")
        if self.counterexamples:
            how.append(f"counterexamples({self.counterexamples})")
        return (f"{self.fault.spec.name} {self.fault.kind} {self.fault.description}: "
                f"{'caught by ' + ' '.join(how) if how else 'MISSED'}")


def swap_exit_ids(spec: FsmSpec, a: int = 0, b: int = 1) -> Fault | None:
    """Exchange the ids reported for two exits; None for single-exit loops."""
    exits = spec.exits
    if len(exits) < 2:
        return None
    bad = copy.deepcopy(spec)
    ea, eb = bad.exits[a], bad.exits[b]
    ea.id, eb.id = eb.id, ea.id
    return Fault("swap-exits", f"exits {exits[a].id}<->{exits[b].id}", bad)


def drop_dependence(spec: FsmSpec, dfg: Dfg, model: CostModel) -> Fault | None:
    """Forget a dependence edge whose removal lets its consumer run too early.

    Edges whose consumer then reads a stale value are preferred; otherwise the
    first edge whose removal only breaks chaining timing is used.  The
    accelerator is rebuilt from the weakened graph, so it is internally
    consistent apart from the one violated dependence.
    """
    table = {n.id: (n.op, n.level) for n in dfg.nodes}
    kinds = {n.id: node_kind(n.op, model) for n in dfg.nodes}
    timing_only = None
    for k, (u, v, kind) in enumerate(dfg.edges):
        if kind == "order":
            continue
        weak = copy.copy(dfg)
        weak.edges = dfg.edges[:k] + dfg.edges[k + 1:]
        try:
            sched = schedule(weak, model)
        except ScheduleError:
            continue
        if not check_schedule(table, [(u, v, kind)], sched.state, sched.pos, sched.arrival, model):
            continue
        su, sv = sched.state[u], sched.state[v]
        chained = su == sv and sched.pos[u] < sched.pos[v] and kinds[u] == kinds[v] == "comb"
        stale = sv < su or (su == sv and not chained)
        if stale:
            bad = build_fsm(spec.name, spec.loop_id, spec.unit, weak, sched, model, spec.arrays)
            return Fault("drop-dependence", f"{kind} edge {u}->{v}", bad)
        if timing_only is None:
            timing_only = (k, u, v, kind, weak, sched)
    if timing_only is None:
        return None
    _, u, v, kind, weak, sched = timing_only
    bad = build_fsm(spec.name, spec.loop_id, spec.unit, weak, sched, model, spec.arrays)
    return Fault("drop-dependence", f"{kind} edge {u}->{v} (chaining delay)", bad)


def fault_suite(spec: FsmSpec, dfg: Dfg, model: CostModel) -> list:
    faults = [swap_exit_ids(spec), drop_dependence(spec, dfg, model)]
    return [f for f in faults if f is not None]


def detect(fault: Fault, program: MirProgram, f: MirFunction, loop: LoopNode, model: CostModel,
           trials: int = 1000, seed: int = 0, validate: bool = True) -> Detection:
    d = Detection(fault)
    if validate:
        d.validator = validate_fsm(fault.spec, model)
    report = check_equivalence(program, f, loop, fault.spec, trials, seed, model)
    d.counterexamples = len(report.mismatches)
    return d
