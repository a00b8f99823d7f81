"""Shared builders for the test suite (cached, since synthesis is not free)."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

from loopforge import arith
from loopforge.analyzer import analyze_frequencies, rank_and_select
from loopforge.collector import collect_program
from loopforge.corpus import program as corpus_program
from loopforge.diagnostics import Diagnostics
from loopforge.frontend.program import build_program
from loopforge.hdl import layout_registers
from loopforge.patcher import emit_c, patch_program
from loopforge.synth.costmodel import CostModel
from loopforge.synth.pipeline import locate_loop, synthesize_loop

# accept everything the synthesizer can build, so every eligible loop is exercised
OPEN_MODEL = CostModel(min_speedup=0)


@dataclass
class Built:
    name: str
    entry: str
    program: object
    transcript: object
    freq: dict
    chosen: list
    accelerators: dict = field(default_factory=dict)  # loop id -> Accelerator
    regmaps: dict = field(default_factory=dict)
    patched: object = None  # re-parsed from the emitted C
    diags: Diagnostics = None

    def locate(self, loop_id: int) -> tuple:
        return locate_loop(self.program, self.transcript, loop_id)

    def fsms(self) -> dict:
        return {lid: (a.spec, self.regmaps[lid]) for lid, a in self.accelerators.items()}


def build_sources(sources: list):
    d = Diagnostics()
    p = build_program(sources, d)
    return p, collect_program(p.units, d)


@functools.lru_cache(maxsize=None)
def corpus(name: str) -> Built:
    cp = corpus_program(name)
    d = Diagnostics()
    p = build_program(cp.sources(), d)
    t = collect_program(p.units, d)
    _, freq = analyze_frequencies(t, d)
    sel = rank_and_select(t, freq, 1000)
    b = Built(name, cp.entry, p, t, freq, list(sel.chosen), diags=d)
    sites = []
    for lid in sorted(sel.chosen):
        acc = synthesize_loop(p, t, lid, OPEN_MODEL, freq, d)
        if acc is None:
            continue
        b.accelerators[lid] = acc
        b.regmaps[lid] = layout_registers(acc.spec)
        f, node = locate_loop(p, t, lid)
        sites.append((lid, f.name, node, acc.spec))
    patched, _, _ = patch_program(p, sites, b.regmaps, d)
    b.patched = build_program(list(emit_c(patched).items()), Diagnostics())
    return b


# independent reference implementations of the chain program functions, written
# directly in Python with 32-bit wraparound
def ref_fun3(a: int, b: int) -> int:
    for _ in range(100):
        a = arith.wrap(a + b)
        if a > 200:
            break
        b = arith.wrap(b - 1)
    return a


def ref_fun2(a: int, b: int) -> int:
    for _ in range(30):
        a = arith.wrap(a + ref_fun3(a, b))
        b = arith.wrap(b - a)
    return arith.wrap(a + b)


def ref_fun1(a: int, b: int) -> int:
    c = 0  # locals start at zero in the interpreter
    for _ in range(10):
        c = arith.wrap(c + ref_fun2(arith.wrap(b + a), arith.wrap(a - b)))
    return c
