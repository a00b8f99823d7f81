"""Whole-program co-simulation: wrapper register traffic is served by FSM simulators."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from ..frontend.ir import MirProgram
from ..hdl import RegisterMap
from ..patcher import CTRL
from ..synth.costmodel import CostModel
from ..synth.estimate import stmt_sw_cycles
from ..synth.fsm import FsmSpec
from .equiv import run_region
from .fsmsim import machine_for, simulate_fsm
from .interp import ExecResult, Interpreter, Trap

HANDLE_STRIDE = 0x10000


class ConfigurationError(Exception):
    pass


@dataclass
class AccelTiming:
    name: str
    loop_id: int
    states: int
    calls: int = 0
    transfers: int = 0  # data register reads and writes (inputs, outputs, bb_idx)
    control_accesses: int = 0  # start writes and status polls
    cycles: int = 0
    sw_cycles: int = 0
    segments: list = field(default_factory=list)


@dataclass
class _Device:
    spec: FsmSpec
    regmap: RegisterMap
    timing: AccelTiming
    software: tuple | None  # (original function, loop) for the software cost
    machine: object = None
    regs: dict = field(default_factory=dict)
    done: bool = False

    def __post_init__(self):
        self.input_offsets = {e.offset for e in self.regmap.inputs}
        self.output_offsets = {e.offset for e in self.regmap.outputs}


class AcceleratorBus:
    """Services ``__accel_*`` intrinsics for the interpreter."""

    def __init__(self, devices: dict, model: CostModel, original: Interpreter | None = None):
        self.model = model
        self.by_id = {}
        self.by_handle = {}
        self.original = original
        for k, (lid, (spec, regmap, software)) in enumerate(sorted(devices.items())):
            dev = _Device(spec, regmap, AccelTiming(spec.name, lid, spec.state_count()), software,
                          machine_for(spec, model))
            self.by_id[lid] = dev
            self.by_handle[(k + 1) * HANDLE_STRIDE] = dev
        self.handle_of = {id(d): h for h, d in self.by_handle.items()}

    def reset(self) -> None:
        """Forget register contents and timing, keeping the decoded machines."""
        for dev in self.by_id.values():
            t = dev.timing
            dev.timing = AccelTiming(t.name, t.loop_id, t.states)
            dev.regs = {}
            dev.done = False

    def intrinsic(self, interp: Interpreter, name: str, args: list):
        if name == "__accel_base":
            dev = self.by_id.get(args[0])
            return 0 if dev is None else self.handle_of[id(dev)]
        dev = self.by_handle.get(args[0])
        if dev is None:
            raise ConfigurationError(f"register access through unknown accelerator handle {args[0]}")
        offset = args[1]
        if name == "__accel_write":
            if offset == CTRL:
                dev.timing.control_accesses += 1
                if args[2] & 1:
                    self._start(interp, dev)
                return None
            if offset not in dev.input_offsets:
                raise ConfigurationError(f"{dev.spec.name}: write to non-input register 0x{offset:02X}")
            dev.timing.transfers += 1
            dev.regs[offset] = args[2]
            return None
        if offset == CTRL:
            dev.timing.control_accesses += 1
            return (2 if dev.done else 0)
        if offset not in dev.output_offsets:
            raise ConfigurationError(f"{dev.spec.name}: read of non-output register 0x{offset:02X}")
        dev.timing.transfers += 1
        return dev.regs.get(offset, 0)

    def _start(self, interp: Interpreter, dev: _Device) -> None:
        spec = dev.spec
        inputs = [dev.regs.get(e.offset, 0) for e in dev.regmap.inputs]
        if len(interp.frames) < 2:
            raise ConfigurationError(f"{spec.name} started outside a wrapper call")
        view = interp.frames[-2][1]
        mem = {a: view[a] for a in spec.arrays}
        if dev.software is not None:
            dev.timing.sw_cycles += self._software_cycles(dev, inputs, mem)
        result = simulate_fsm(spec, inputs, mem, self.model, machine=dev.machine)
        if result.trap:
            raise Trap(result.trap, f"{spec.name}: {result.trap} inside the accelerator")
        dev.timing.calls += 1
        dev.timing.cycles += result.cycles
        dev.timing.segments += result.segments
        for e, out in zip(dev.regmap.outputs, spec.outputs):
            dev.regs[e.offset] = result.outputs[out.name]
        dev.regs[dev.regmap.offset_of("bb_idx")] = result.bb_idx
        dev.done = True

    def _software_cycles(self, dev: _Device, inputs: list, mem: dict) -> int:
        f, loop = dev.software
        interp = self.original
        values = {v: x for (_, v), x in zip(dev.spec.inputs, inputs)}
        scratch = {a: [0] * n for a, n in f.arrays.items()}
        for g in interp.program.globals().values():
            scratch[g.name] = [0] * g.size
        scratch.update({a: list(v) for a, v in mem.items()})
        visits = {}
        run_region(interp, f, loop, values, scratch, visits=visits)
        cost = 0
        for b, n in visits.items():
            blk = f.blocks[b]
            c = sum(stmt_sw_cycles(s, self.model) for s in blk.stmts) + stmt_sw_cycles(blk.term, self.model)
            cost += c * n
        return cost

    def timings(self) -> list:
        return [self.by_id[k].timing for k in sorted(self.by_id)]


@dataclass
class TimingReport:
    model: CostModel
    accelerators: list

    @property
    def calls(self) -> int:
        return sum(a.calls for a in self.accelerators)

    @property
    def transfers(self) -> int:
        return sum(a.transfers for a in self.accelerators)

    @property
    def sw_time_s(self) -> Fraction:
        return Fraction(sum(a.sw_cycles for a in self.accelerators)) / self.model.f_cpu

    @property
    def fixed_overhead_s(self) -> Fraction:
        return Fraction(self.calls * self.model.invocation_overhead_cycles) / self.model.f_accel

    @property
    def transfer_s(self) -> Fraction:
        return Fraction(self.transfers * self.model.reg_access_cycles) / self.model.f_accel

    @property
    def call_overhead_s(self) -> Fraction:
        return self.fixed_overhead_s + self.transfer_s

    @property
    def compute_s(self) -> Fraction:
        return Fraction(sum(a.cycles for a in self.accelerators)) / self.model.f_accel

    @property
    def hw_time_s(self) -> Fraction:
        return self.call_overhead_s + self.compute_s

    @property
    def relative_performance(self) -> Fraction | None:
        return self.sw_time_s / self.hw_time_s if self.calls and self.hw_time_s else None

    def key_values(self) -> list:
        lines = []
        for a in self.accelerators:
            p = f"accel.{a.name}"
            lines += [f"{p}.loop_id={a.loop_id}", f"{p}.fsm_states={a.states}", f"{p}.calls={a.calls}",
                      f"{p}.transfers={a.transfers}",
                      f"{p}.transfers_per_call={_frac(Fraction(a.transfers, a.calls)) if a.calls else '-'}",
                      f"{p}.control_accesses={a.control_accesses}", f"{p}.cycles={a.cycles}",
                      f"{p}.sw_cycles={a.sw_cycles}"]
        lines += [f"f_cpu_hz={_frac(self.model.f_cpu)}", f"f_accel_hz={_frac(self.model.f_accel)}",
                  f"reg_access_cycles={self.model.reg_access_cycles}",
                  f"invocation_overhead_cycles={self.model.invocation_overhead_cycles}",
                  f"calls={self.calls}", f"transfers={self.transfers}",
                  f"sw_time_s={_frac(self.sw_time_s)}"]
        if self.calls:
            lines += [f"fixed_overhead_s={_frac(self.fixed_overhead_s)}",
                      f"transfer_latency_s={_frac(self.transfer_s)}",
                      f"call_overhead_s={_frac(self.call_overhead_s)}",
                      f"compute_s={_frac(self.compute_s)}",
                      f"hw_time_s={_frac(self.hw_time_s)}",
                      f"relative_performance={_frac(self.relative_performance)}"]
        else:
            lines += ["hw_time_s=-", "relative_performance=-"]
        return lines

    def table(self) -> str:
        def mhz(x):
            return f"{float(x / 1_000_000):g} MHz"

        states = ",".join(str(a.states) for a in self.accelerators if a.calls) or "-"
        rows = [("", "Clock Rate", "FSM States", "Execution Time", "Relative Performance"),
                ("Software", mhz(self.model.f_cpu), "-", _us(self.sw_time_s), "1.00")]
        if self.calls:
            rows.append(("Hardware", mhz(self.model.f_accel), states, _us(self.hw_time_s),
                         f"{float(self.relative_performance):.2f}"))
        else:
            rows.append(("Hardware", "", "", "", ""))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"

    def text(self) -> str:
        return self.table() + "\n" + "\n".join(self.key_values()) + "\n"


def _frac(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _us(seconds: Fraction) -> str:
    return f"{float(seconds * 1_000_000):.3f} us"


def cosimulate(patched: MirProgram, fsms: dict, model: CostModel, entry: str, args: list,
               original: MirProgram | None = None, loops: dict | None = None,
               memory: dict | None = None, step_limit: int = 2_000_000) -> tuple:
    """Run ``entry`` of the patched program with simulated accelerators.

    ``fsms`` maps loop id to (FsmSpec, RegisterMap); ``loops`` maps loop id to
    (function name, LoopNode) in ``original`` and enables the software-time estimate.
    """
    for lid, (spec, regmap) in fsms.items():
        fn = patched.function(f"__accel_call_{lid}")
        if fn is not None and len(fn.params) != len(spec.inputs) + len(spec.outputs):
            raise ConfigurationError(f"wrapper for loop{lid} does not match {spec.name}'s registers")
    ref = Interpreter(original, step_limit=step_limit) if original is not None else None
    devices = {}
    for lid, (spec, regmap) in fsms.items():
        software = None
        if ref is not None and loops and lid in loops:
            fname, loop = loops[lid]
            software = (original.function(fname), loop)
        devices[lid] = (spec, regmap, software)
    bus = AcceleratorBus(devices, model, ref)
    interp = Interpreter(patched, bus, step_limit)
    result = interp.run(entry, args, memory)
    return result, TimingReport(model, bus.timings())


@dataclass
class ProgramTrialReport:
    entry: str
    trials: int
    compared: int = 0
    skipped: int = 0
    accelerated_calls: int = 0
    fallback_mismatches: list = field(default_factory=list)
    simulated_mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.fallback_mismatches and not self.simulated_mismatches

    def text(self) -> str:
        lines = [f"entry={self.entry}", f"trials={self.trials}", f"compared={self.compared}",
                 f"skipped={self.skipped}", f"accelerated_calls={self.accelerated_calls}",
                 f"fallback_mismatches={len(self.fallback_mismatches)}",
                 f"simulated_mismatches={len(self.simulated_mismatches)}"]
        for kind, ms in (("fallback", self.fallback_mismatches), ("simulated", self.simulated_mismatches)):
            for args, want, got in ms[:5]:
                lines.append(f"counterexample {kind} args={','.join(map(str, args))} "
                             f"original={_outcome(want)} patched={_outcome(got)}")
        return "\n".join(lines) + "\n"


def _outcome(r: ExecResult) -> str:
    if r.trap:
        return f"trap:{r.trap}"
    return f"value:{r.value}"


def compare_programs(original: MirProgram, patched: MirProgram, fsms: dict, model: CostModel, entry: str,
                     trials: int = 200, seed: int = 0, step_limit: int = 200_000) -> ProgramTrialReport:
    """Run ``entry`` on random arguments: the patched program must match the original
    both with no accelerator present and with every accelerator simulated."""
    from .equiv import random_value

    rng = random.Random(seed)
    f = original.function(entry)
    if f is None:
        raise ConfigurationError(f"entry function '{entry}' is not defined")
    arity = sum(1 for p in f.params if not p.out)
    ref = Interpreter(original, step_limit=step_limit)
    fallback = Interpreter(patched, step_limit=step_limit * 4)
    report = ProgramTrialReport(entry, trials)
    bus = AcceleratorBus({lid: (spec, regmap, None) for lid, (spec, regmap) in fsms.items()}, model)
    sim = Interpreter(patched, bus, step_limit * 4)
    for _ in range(trials):
        args = [random_value(rng) for _ in range(arity)]
        want = ref.run(entry, args)
        if want.trap == "steps":
            report.skipped += 1
            continue
        report.compared += 1
        got = fallback.run(entry, args)
        if got.observable() != want.observable():
            report.fallback_mismatches.append((args, want, got))
        bus.reset()
        got = sim.run(entry, args)
        report.accelerated_calls += sum(t.calls for t in bus.timings())
        if got.observable() != want.observable():
            report.simulated_mismatches.append((args, want, got))
    return report
