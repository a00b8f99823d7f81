"""Whole-program loop ranking from the transcript."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .diagnostics import Diagnostics
from .frontend.cfg import strongly_connected_components
from .transcript import Transcript

EXTERNAL = "<external>"
RANKING_KEYS = ("total", "total_stmts")


@dataclass
class CallGraph:
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)  # (caller, callee, site_weight)

    def successors(self) -> dict:
        succ = {n: [] for n in self.nodes}
        for a, b, _ in self.edges:
            if b not in succ[a]:
                succ[a].append(b)
        return succ


def loop_chain(t: Transcript, loop_id: int) -> list:
    """The loop and its enclosing loops, innermost first."""
    chain = []
    rec = t.loop(loop_id)
    while rec is not None:
        chain.append(rec)
        rec = t.loop(rec.parent) if rec.parent else None
    return chain


def trip_product(t: Transcript, loop_id: int) -> int:
    w = 1
    for rec in loop_chain(t, loop_id):
        w *= rec.local_count + 1
    return w


def build_call_graph(t: Transcript, diags: Diagnostics | None = None) -> CallGraph:
    diags = diags or Diagnostics()
    g = CallGraph()
    known = []
    for f in t.functions():
        if f.name not in known:
            known.append(f.name)
    g.nodes = list(known)
    for f in t.functions():
        for callee, lid in f.call_sites:
            target = callee
            if callee not in known:
                if EXTERNAL not in g.nodes:
                    g.nodes.append(EXTERNAL)
                diags.warn(f"call from '{f.name}' to unknown function '{callee}' treated as external", f.unit)
                target = EXTERNAL
            g.edges.append((f.name, target, trip_product(t, lid) if lid else 1))
    return g


def analyze_frequencies(t: Transcript, diags: Diagnostics | None = None) -> tuple:
    """Return (CallGraph, {function: Fraction frequency})."""
    diags = diags or Diagnostics()
    g = build_call_graph(t, diags)
    comps = strongly_connected_components(g.successors())
    comp_of = {n: i for i, c in enumerate(comps) for n in c}
    incoming = {i: [] for i in range(len(comps))}
    for a, b, w in g.edges:
        if comp_of[a] != comp_of[b]:
            incoming[comp_of[b]].append((a, w))
    freq = {}
    # Tarjan emits components callee-first, so walk them in reverse
    for i in reversed(range(len(comps))):
        if incoming[i]:
            value = sum((freq[a] * w for a, w in incoming[i]), Fraction(0))
        else:
            value = Fraction(1)
            internal = any(comp_of[a] == i and comp_of[b] == i for a, b, _ in g.edges)
            if internal:
                diags.note(f"functions {sorted(comps[i])} are unreachable from any root; frequency 1")
        for n in comps[i]:
            freq[n] = value
    freq.pop(EXTERNAL, None)
    return g, freq


@dataclass
class SelectionEntry:
    loop_id: int
    unit: str
    function: str
    total: Fraction
    key: Fraction
    eligible: bool
    reason: str = ""
    chosen: bool = False


@dataclass
class SelectionReport:
    entries: list = field(default_factory=list)
    chosen: list = field(default_factory=list)
    notices: list = field(default_factory=list)
    key: str = "total"

    def entry(self, loop_id: int) -> SelectionEntry | None:
        for e in self.entries:
            if e.loop_id == loop_id:
                return e
        return None

    def lines(self) -> str:
        out = []
        for e in self.entries:
            out.append(f"loop{e.loop_id} total={_num(e.total)} eligible={int(e.eligible)} "
                       f"reason={e.reason or '-'}")
        return "\n".join(out) + ("\n" if out else "")

    def table(self) -> str:
        rows = [("rank", "loop", "unit", "function", "total", f"key:{self.key}", "eligible", "chosen", "reason")]
        for k, e in enumerate(self.entries, 1):
            rows.append((str(k), f"loop{e.loop_id}", e.unit, e.function, _num(e.total), _num(e.key),
                         "yes" if e.eligible else "no", "yes" if e.chosen else "no", e.reason or ""))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        text = "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)
        return text + "\n" + "".join(f"note: {n}\n" for n in self.notices)


def _num(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def total_iterations(t: Transcript, freq: dict, loop_id: int) -> Fraction:
    rec = t.loop(loop_id)
    return freq.get(rec.function, Fraction(1)) * trip_product(t, loop_id)


def rank_and_select(t: Transcript, freq: dict, n: int, key: str = "total") -> SelectionReport:
    if n < 1:
        raise ValueError("n must be at least 1")
    if key not in RANKING_KEYS:
        raise ValueError(f"unknown ranking key {key!r}; expected one of {', '.join(RANKING_KEYS)}")
    entries = []
    for rec in t.loops():
        total = total_iterations(t, freq, rec.loop_id)
        value = total * max(rec.stmts, 1) if key == "total_stmts" else total
        if rec.has_call:
            eligible, reason = False, "contains call"
        elif not rec.well_nested:
            eligible, reason = False, "not well nested"
        else:
            eligible, reason = True, ""
        entries.append(SelectionEntry(rec.loop_id, rec.unit, rec.function, total, value, eligible, reason))
    entries.sort(key=lambda e: (-e.key, e.unit, e.loop_id))
    report = SelectionReport(entries, key=key)
    for e in entries:
        if not e.eligible or len(report.chosen) >= n:
            continue
        # a loop nest is one candidate: skip loops overlapping an already chosen one
        clash = next((c for c in report.chosen if _nested(t, c, e.loop_id) or _nested(t, e.loop_id, c)), None)
        if clash is not None:
            e.reason = f"overlaps chosen loop{clash}"
            continue
        e.chosen = True
        report.chosen.append(e.loop_id)
    eligible = sum(1 for e in entries if e.eligible)
    if eligible == 0:
        report.notices.append("no eligible loops; nothing selected")
    elif len(report.chosen) < n:
        report.notices.append(f"only {len(report.chosen)} eligible loop(s) available for top-{n}")
    return report


def _nested(t: Transcript, inner: int, outer: int) -> bool:
    return any(rec.loop_id == outer for rec in loop_chain(t, inner)[1:])
