"""Randomized equivalence of an accelerator against software execution of its loop."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .. import arith
from ..frontend.ir import Assign, MirFunction, MirProgram, defined_values, var_of
from ..frontend.loops import LoopNode
from ..synth.costmodel import CostModel
from ..synth.fsm import FsmSpec
from .fsmsim import CycleLimit, machine_for, simulate_fsm
from .interp import Interpreter, Trap

MAX_ARRAY = 256
REGION_STEP_LIMIT = 40_000


@dataclass
class RegionResult:
    exit_id: int  # 1-based position in the loop's exit list, 0 on trap
    variables: dict  # current value of every variable written so far
    trap: str | None = None


def run_region(interp: Interpreter, f: MirFunction, loop: LoopNode, values: dict, mem: dict,
               step_limit: int = REGION_STEP_LIMIT, visits: dict | None = None) -> RegionResult:
    """Execute ``loop`` in software from its preheader edge until control leaves it.

    ``values`` gives the SSA values live into the loop.  Variables are tracked by
    name as they are written, so the result says what each source variable holds
    when the loop is left, independently of how the accelerator names values.
    ``visits``, when given, receives an execution count per block.
    """
    c = interp.function(f.name)
    # constants are pure, so their definitions may sit anywhere before the loop
    env = {s.dest: arith.wrap(s.args[0]) for _, s in f.statements()
           if isinstance(s, Assign) and s.op == "const"}
    env.update(values)
    current = {var_of(v): x for v, x in values.items()}
    defs = {b.id: [d for s in b.body() for d in defined_values(s)] for b in f}
    pre = [p for p in f.predecessors()[loop.header] if p not in loop.body]
    steps = 0
    try:
        for d, g in c.moves[(pre[0], loop.header)]:
            env[d] = g(env)
            current[var_of(d)] = env[d]
        bid = loop.header
        while True:
            for op in c.ops[bid]:
                op(env, mem, interp)
            if visits is not None:
                visits[bid] = visits.get(bid, 0) + 1
            for d in defs[bid]:
                current[var_of(d)] = env[d]
            steps += len(c.ops[bid]) + 1
            if steps > step_limit:
                raise Trap("steps", "step limit exceeded in loop region")
            t = c.terms[bid]
            succ = t.successors()
            if len(succ) == 1:
                nxt = succ[0]
            else:
                cond = t.cond if isinstance(t.cond, int) else env[t.cond]
                nxt = t.then if cond else t.else_
            mv = c.moves[(bid, nxt)]
            vals = [g(env) for _, g in mv]
            for (d, _), v in zip(mv, vals):
                env[d] = v
                current[var_of(d)] = v
            if nxt not in loop.body:
                return RegionResult(loop.exits.index((bid, nxt)) + 1, current)
            bid = nxt
    except Trap as t:
        return RegionResult(0, current, t.kind)


def random_value(rng: random.Random) -> int:
    r = rng.random()
    if r < 0.45:
        return rng.randint(-16, 16)
    if r < 0.8:
        return rng.randint(-300, 300)
    if r < 0.95:
        return rng.randint(-100_000, 100_000)
    return rng.choice([arith.INT_MIN, arith.INT_MAX, -1, 0, 1, 255, 256])


def random_memory(rng: random.Random, arrays: dict) -> dict:
    out = {}
    for name, size in arrays.items():
        out[name] = [rng.choice((rng.randint(-8, 8), rng.randint(0, size), random_value(rng)))
                     for _ in range(size)]
    return out


def random_index_value(rng: random.Random, arrays: dict) -> int:
    """Values that often land inside array bounds, for loops that index memory."""
    r = rng.random()
    if arrays and r < 0.35:
        return rng.randint(0, max(min(arrays.values()), 1) - 1)
    if arrays and r < 0.65:
        # small enough that products of two such values still index small arrays
        return rng.randint(0, 16)
    return random_value(rng)


@dataclass
class Mismatch:
    trial: int
    inputs: dict
    memory: dict
    software: str
    hardware: str

    def text(self) -> str:
        ins = " ".join(f"{k}={v}" for k, v in self.inputs.items())
        return f"trial {self.trial}: inputs {ins or '-'}\n  software: {self.software}\n  hardware: {self.hardware}"


@dataclass
class EquivalenceReport:
    name: str
    trials: int
    compared: int = 0
    skipped: int = 0
    mismatches: list = field(default_factory=list)
    bound_violations: list = field(default_factory=list)
    exits_seen: dict = field(default_factory=dict)
    segments: int = 0
    max_segment: int = 0
    min_segment: int = 0

    @property
    def ok(self) -> bool:
        return not self.mismatches and not self.bound_violations

    def text(self) -> str:
        lines = [f"accelerator={self.name}",
                 f"trials={self.trials}",
                 f"compared={self.compared}",
                 f"skipped={self.skipped}",
                 f"mismatches={len(self.mismatches)}",
                 f"bound_violations={len(self.bound_violations)}",
                 f"segments_observed={self.segments}",
                 f"observed_cycles_min={self.min_segment}",
                 f"observed_cycles_max={self.max_segment}",
                 "exits_seen=" + (",".join(f"{k}:{v}" for k, v in sorted(self.exits_seen.items())) or "-")]
        for m in self.mismatches[:5]:
            lines.append("counterexample " + m.text())
        for v in self.bound_violations[:5]:
            lines.append("bound violation " + v)
        return "\n".join(lines) + "\n"


def _describe(exit_id, outs, mem, trap) -> str:
    if trap:
        return f"trap {trap}"
    o = " ".join(f"{k}={v}" for k, v in sorted(outs.items()))
    return f"bb_idx={exit_id} {o}".rstrip() + (f" mem_digest={hash(mem) & 0xFFFFFFFF:08x}" if mem else "")


def check_equivalence(program: MirProgram, f: MirFunction, loop: LoopNode, spec: FsmSpec, trials: int = 1000,
                      seed: int = 0, model: CostModel | None = None) -> EquivalenceReport:
    model = model or CostModel()
    rng = random.Random(seed)
    interp = Interpreter(program)
    machine = machine_for(spec, model)
    report = EquivalenceReport(spec.name, trials)
    arrays = {}
    for g in program.globals().values():
        arrays[g.name] = g.size
    arrays.update(f.arrays)
    used = {a: arrays[a] for a in spec.arrays}
    var_out = {o.name: o.var for o in spec.outputs}
    for trial in range(trials):
        inputs = {name: random_index_value(rng, used) for name in spec.input_names}
        image = random_memory(rng, used)
        values = {value: inputs[name] for name, value in spec.inputs}
        sw_mem = {a: [0] * n for a, n in arrays.items()}
        sw_mem.update({a: list(v) for a, v in image.items()})
        interp.reset()
        sw = run_region(interp, f, loop, values, sw_mem)
        if sw.trap == "steps":
            report.skipped += 1
            continue
        hw_mem = {a: list(v) for a, v in image.items()}
        try:
            hw = simulate_fsm(spec, [inputs[n] for n in spec.input_names], hw_mem, model, machine=machine,
                              cycle_limit=REGION_STEP_LIMIT * 20)
        except CycleLimit:
            hw = None
        if hw is None:
            report.skipped += 1
            continue
        report.compared += 1
        sw_mem_used = {a: sw_mem[a] for a in used}
        if sw.trap or hw.trap:
            same = sw.trap == hw.trap
            sw_desc, hw_desc = _describe(0, {}, None, sw.trap), _describe(0, {}, None, hw.trap)
        else:
            k = sw.exit_id
            sw_outs = {}
            for out in spec.outputs:
                if out.sources[k - 1] is not None and hw.bb_idx == k:
                    sw_outs[out.name] = sw.variables.get(var_out[out.name], 0)
            hw_outs = {n: hw.outputs[n] for n in sw_outs}
            same = hw.bb_idx == k and sw_outs == hw_outs and sw_mem_used == hw_mem
            report.exits_seen[k] = report.exits_seen.get(k, 0) + 1
            sw_desc = _describe(k, sw_outs, tuple(tuple(v) for v in sw_mem_used.values()), None)
            hw_desc = _describe(hw.bb_idx, hw_outs, tuple(tuple(v) for v in hw_mem.values()), None)
            if same:
                _check_bounds(report, spec, trial, hw.segments)
        if not same:
            report.mismatches.append(Mismatch(trial, inputs, image, sw_desc, hw_desc))
    return report


def _check_bounds(report: EquivalenceReport, spec: FsmSpec, trial: int, segments: list) -> None:
    for s in segments:
        report.segments += 1
        report.max_segment = max(report.max_segment, s)
        report.min_segment = s if report.segments == 1 else min(report.min_segment, s)
        if not spec.best_cycles <= s <= spec.worst_cycles:
            report.bound_violations.append(
                f"trial {trial}: segment of {s} cycles outside [{spec.best_cycles}, {spec.worst_cycles}]")
