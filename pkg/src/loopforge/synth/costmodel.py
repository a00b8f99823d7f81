"""Target timing parameters shared by the synthesizer, the estimator and co-simulation."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from math import ceil

MHZ = 1_000_000

# operation kind of each datapath / IR op
OP_CLASS = {
    "add": "add", "sub": "add", "neg": "add",
    "and": "logic", "or": "logic", "xor": "logic", "not": "logic",
    "land": "logic", "lor": "logic", "lnot": "logic", "select": "logic",
    "eq": "compare", "ne": "compare", "lt": "compare", "le": "compare", "gt": "compare", "ge": "compare",
    "shl": "shift", "shr": "shift",
    "mul": "mul",
    "div": "div", "mod": "div",
    "copy": "copy", "const": "copy",
    "load": "mem", "store": "mem",
}


def _default_delay():
    return {"add": 2, "logic": 2, "compare": 2, "shift": 1, "mul": 6, "div": 20, "copy": 0, "mem": 0}


def _default_sw():
    return {"simple": 1, "mul": 3, "div": 20, "branch": 2}


@dataclass
class CostModel:
    f_cpu: Fraction = Fraction(666 * MHZ)
    f_accel: Fraction = Fraction(333 * MHZ)
    invocation_overhead_cycles: int = 50
    reg_access_cycles: int = 14
    mem_penalty_cycles: int = 4
    clock_budget: int = 10
    op_delay: dict = field(default_factory=_default_delay)
    sw_cycles: dict = field(default_factory=_default_sw)
    min_speedup: Fraction = Fraction(1)

    def __post_init__(self):
        self.f_cpu = Fraction(self.f_cpu)
        self.f_accel = Fraction(self.f_accel)
        self.min_speedup = Fraction(self.min_speedup)
        if self.f_cpu <= 0 or self.f_accel <= 0:
            raise ValueError("clock frequencies must be positive")
        if self.min_speedup < 0:
            raise ValueError("min_speedup must not be negative")
        for name in ("invocation_overhead_cycles", "reg_access_cycles", "mem_penalty_cycles"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must not be negative")
        if self.clock_budget <= 0:
            raise ValueError("clock_budget must be positive")

    def delay(self, op: str) -> int:
        return self.op_delay[OP_CLASS.get(op, "logic")]

    def multicycle(self, op: str) -> int:
        """Cycles a node occupies; above 1 only for mul/div beyond the clock budget."""
        d = self.delay(op)
        if d <= self.clock_budget or OP_CLASS.get(op) not in ("mul", "div"):
            return 1
        return ceil(d / self.clock_budget)

    def sw_cost(self, op: str) -> int:
        cls = OP_CLASS.get(op, "add")
        if cls == "mul":
            return self.sw_cycles["mul"]
        if cls == "div":
            return self.sw_cycles["div"]
        return self.sw_cycles["simple"]

    def with_overrides(self, **kw) -> "CostModel":
        return replace(self, **kw)


FIELD_NAMES = tuple(f.name for f in fields(CostModel))


def parse_frequency(text: str) -> Fraction:
    """Accept ``666MHz``, ``333e6``, ``1.5GHz`` or a plain Hz value."""
    t = text.strip().lower().replace("_", "")
    for suffix, scale in (("ghz", 10 ** 9), ("mhz", 10 ** 6), ("khz", 10 ** 3), ("hz", 1)):
        if t.endswith(suffix):
            return Fraction(t[: -len(suffix)].strip()) * scale
    return Fraction(t)


def cost_model_from_config(values: dict, base: CostModel | None = None) -> CostModel:
    """Build a CostModel from ``key=value`` strings.

    ``op_delay.<kind>`` and ``sw_cycles.<kind>`` address single table entries.
    """
    m = base or CostModel()
    kw = {}
    delay = dict(m.op_delay)
    sw = dict(m.sw_cycles)
    for key, raw in values.items():
        if key in ("f_cpu", "f_accel"):
            kw[key] = parse_frequency(str(raw))
        elif key == "min_speedup":
            kw[key] = Fraction(str(raw))
        elif key in ("invocation_overhead_cycles", "reg_access_cycles", "mem_penalty_cycles", "clock_budget"):
            kw[key] = int(raw)
        elif key.startswith("op_delay."):
            kind = key.split(".", 1)[1]
            if kind not in delay:
                raise ValueError(f"unknown operation kind {kind!r}")
            delay[kind] = int(raw)
        elif key.startswith("sw_cycles."):
            kind = key.split(".", 1)[1]
            if kind not in sw:
                raise ValueError(f"unknown software cost kind {kind!r}")
            sw[kind] = int(raw)
        else:
            raise ValueError(f"unknown cost model key {key!r}")
    kw["op_delay"] = delay
    kw["sw_cycles"] = sw
    return replace(m, **kw)
