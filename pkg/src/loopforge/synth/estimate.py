"""Static speedup estimate used to accept or reject a synthesized loop."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..frontend.ir import Assign, Branch, Load, MirFunction, Phi, Store
from ..frontend.loops import LoopNode
from .costmodel import CostModel
from .fsm import FsmSpec


@dataclass
class CycleEstimate:
    best_cycles_per_iter: int
    worst_cycles_per_iter: int
    est_iterations: Fraction
    invocations: Fraction
    hw_time_s: Fraction
    sw_time_s: Fraction
    speedup: Fraction
    accepted: bool
    reject_reason: str | None = None

    def lines(self) -> list:
        out = [
            f"best_cycles_per_iter={self.best_cycles_per_iter}",
            f"worst_cycles_per_iter={self.worst_cycles_per_iter}",
            f"est_iterations={_frac(self.est_iterations)}",
            f"invocations={_frac(self.invocations)}",
            f"hw_time_s={_frac(self.hw_time_s)}",
            f"sw_time_s={_frac(self.sw_time_s)}",
            f"speedup={_frac(self.speedup)}",
            f"speedup_approx={float(self.speedup):.4f}",
            f"accepted={int(self.accepted)}",
        ]
        if self.reject_reason:
            out.append(f"reject_reason={self.reject_reason}")
        return out


def _frac(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def stmt_sw_cycles(s, model: CostModel) -> int:
    if isinstance(s, Phi):
        return 0
    if isinstance(s, Assign):
        return 0 if s.op == "const" else model.sw_cost(s.op)
    if isinstance(s, (Load, Store)):
        return model.sw_cycles["simple"]
    if isinstance(s, Branch):
        return model.sw_cycles["branch"]
    return 0


def region_sw_cycles(f: MirFunction, loop: LoopNode, model: CostModel) -> int:
    """CPU cycles of one pass over ``loop``'s own blocks (nested loops excluded)."""
    inner = set()
    for c in loop.children:
        inner |= c.body
    total = 0
    for b in sorted(loop.body - inner):
        blk = f.blocks[b]
        total += sum(stmt_sw_cycles(s, model) for s in blk.stmts)
        total += stmt_sw_cycles(blk.term, model)
    return total


def hardware_time(spec: FsmSpec, model: CostModel, iterations, invocations=1) -> Fraction:
    transfers = len(spec.inputs) + len(spec.output_names)
    fixed = model.invocation_overhead_cycles + model.reg_access_cycles * transfers
    cycles = Fraction(invocations) * fixed + spec.worst_cycles * Fraction(iterations)
    return cycles / model.f_accel


def decide(sw_time, hw_time, min_speedup) -> tuple:
    """(speedup, accepted, reason) for the given times."""
    sw_time, hw_time = Fraction(sw_time), Fraction(hw_time)
    speedup = sw_time / hw_time if hw_time else Fraction(0)
    if speedup >= Fraction(min_speedup):
        return speedup, True, None
    return speedup, False, (f"estimated speedup {float(speedup):.4f} is below the threshold "
                            f"{float(Fraction(min_speedup)):g}")


def estimate_and_filter(spec: FsmSpec, model: CostModel, iterations, sw_cycles,
                        invocations=1) -> CycleEstimate:
    """``iterations`` counts iteration starts over all levels of the nest and
    ``sw_cycles`` is the matching software cost in CPU cycles."""
    hw = hardware_time(spec, model, iterations, invocations)
    sw = Fraction(sw_cycles) / model.f_cpu
    speedup, ok, reason = decide(sw, hw, model.min_speedup)
    return CycleEstimate(spec.best_cycles, spec.worst_cycles, Fraction(iterations), Fraction(invocations),
                         hw, sw, speedup, ok, reason)
