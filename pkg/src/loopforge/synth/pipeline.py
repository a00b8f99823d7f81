"""Second-run driver: turn selected transcript loops into accelerators."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..analyzer import total_iterations
from ..diagnostics import Diagnostics
from ..frontend.ir import MirProgram
from ..frontend.loops import LoopNode, find_loops
from ..transcript import Transcript
from .costmodel import CostModel
from .dfg import Dfg, Unsupported, if_convert
from .estimate import CycleEstimate, estimate_and_filter, region_sw_cycles
from .fsm import FsmSpec, build_fsm
from .schedule import Schedule, ScheduleError, schedule


class StaleSelection(Exception):
    """A selected loop is no longer present in the program."""


@dataclass
class Accelerator:
    loop_id: int
    loop: LoopNode
    dfg: Dfg
    schedule: Schedule
    spec: FsmSpec
    estimate: CycleEstimate

    @property
    def name(self) -> str:
        return self.spec.name


def locate_loop(program: MirProgram, t: Transcript, loop_id: int) -> tuple:
    """(function, LoopNode) for a transcript loop id."""
    rec = t.loop(loop_id)
    if rec is None:
        raise StaleSelection(f"loop{loop_id} is not in the transcript")
    f = program.function(rec.function)
    if f is None:
        raise StaleSelection(f"loop{loop_id}: function '{rec.function}' no longer exists")
    forest = find_loops(f)
    if rec.header >= 0:
        node = forest.by_header(rec.header)
    else:
        # no header recorded: the function's loops were numbered in preorder
        same = sorted(r.loop_id for r in t.loops() if r.unit == rec.unit and r.function == rec.function)
        nodes = list(forest)
        node = nodes[same.index(loop_id)] if len(nodes) == len(same) else None
    if node is None:
        raise StaleSelection(f"loop{loop_id}: no loop at bb{rec.header} in '{rec.function}'; rerun collect")
    return f, node


def nest_workload(f, loop: LoopNode, t: Transcript, freq: dict, model: CostModel, unit: str) -> tuple:
    """(iteration starts, software cycles, invocations) over the whole nest."""
    by_header = {r.header: r for r in t.loops() if r.unit == unit and r.function == f.name}
    iters = Fraction(0)
    sw = Fraction(0)
    top_total = None
    for node in loop.walk():
        rec = by_header.get(node.header)
        if rec is not None:
            total = total_iterations(t, freq, rec.loop_id)
        else:
            total = Fraction(freq.get(f.name, 1))
            for n in [node, *node.ancestors()]:
                total *= n.local_count + 1
        if node is loop:
            top_total = total
        iters += total
        sw += total * region_sw_cycles(f, node, model)
    invocations = top_total / (loop.local_count + 1)
    return iters, sw, invocations


def synthesize_loop(program: MirProgram, t: Transcript, loop_id: int, model: CostModel, freq: dict,
                    diags: Diagnostics | None = None) -> Accelerator | None:
    """Build the accelerator for one loop, or warn and return None when it is unsupported."""
    diags = diags or Diagnostics()
    rec = t.loop(loop_id)
    f, node = locate_loop(program, t, loop_id)
    try:
        dfg = if_convert(f, node, model)
        sched = schedule(dfg, model)
    except (Unsupported, ScheduleError) as e:
        diags.warn(f"loop{loop_id} in '{f.name}' rejected: {e}", rec.unit)
        return None
    arrays = {g.name: g.size for g in program.globals().values()}
    arrays.update(f.arrays)
    spec = build_fsm(f"loop{loop_id}", loop_id, rec.unit, dfg, sched, model, arrays)
    iters, sw, inv = nest_workload(f, node, t, freq, model, rec.unit)
    est = estimate_and_filter(spec, model, iters, sw, inv)
    return Accelerator(loop_id, node, dfg, sched, spec, est)
