"""The analysis transcript shared by the collect and synth runs.

The body follows a fixed line grammar (unit name, ``function=``, ``loop<id>``,
``count=``, ``call=``, ``well_nested=``, ``-callee`` lines, optional
``mem=``).  Everything else the second run needs (checksums, call sites
outside loops, loop nesting, the loop id counter) lives in ``#`` comment
lines at the top of the file, so the body stays in the plain format.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path

MAGIC = "# loopforge transcript"


class TranscriptError(Exception):
    def __init__(self, message: str, line: int = 0, path: str = "<transcript>"):
        super().__init__(message)
        self.message = message
        self.line = line
        self.path = path

    def __str__(self):
        return f"{self.path}:{self.line}: error: {self.message}"


@dataclass
class FunctionRecord:
    unit: str
    name: str
    callees: list = field(default_factory=list)
    # (callee, innermost loop id or 0) per distinct call site
    call_sites: list = field(default_factory=list)


@dataclass
class LoopRecord:
    loop_id: int
    unit: str
    function: str
    local_count: int
    has_call: bool
    well_nested: bool
    callees: list = field(default_factory=list)
    mem_accesses: int = 0
    parent: int = 0
    header: int = -1
    stmts: int = 0
    heuristic: bool = False
    arrays: list = field(default_factory=list)


@dataclass
class UnitSection:
    name: str
    checksum: str = ""
    functions: list = field(default_factory=list)
    loops: list = field(default_factory=list)

    def loops_of(self, fname: str) -> list:
        return [l for l in self.loops if l.function == fname]


@dataclass
class Transcript:
    units: list = field(default_factory=list)
    next_loop: int = 1

    def unit(self, name: str) -> UnitSection | None:
        for u in self.units:
            if u.name == name:
                return u
        return None

    def loops(self) -> list:
        return [l for u in self.units for l in u.loops]

    def loop(self, loop_id: int) -> LoopRecord | None:
        for l in self.loops():
            if l.loop_id == loop_id:
                return l
        return None

    def functions(self) -> list:
        return [f for u in self.units for f in u.functions]

    def replace_unit(self, section: UnitSection) -> None:
        for i, u in enumerate(self.units):
            if u.name == section.name:
                self.units[i] = section
                return
        self.units.append(section)


def _names(xs) -> str:
    return ",".join(xs) if xs else "-"


def _unnames(text: str) -> list:
    return [] if text == "-" else text.split(",")


def serialize(t: Transcript) -> str:
    head = [MAGIC, f"# next_loop={t.next_loop}"]
    for u in t.units:
        head.append(f"# unit={u.name} sha256={u.checksum or '-'}")
        for f in u.functions:
            sites = ",".join(f"{c}@{k}" for c, k in f.call_sites) or "-"
            head.append(f"# function={u.name}:{f.name} callees={_names(f.callees)} sites={sites}")
        for l in u.loops:
            head.append(f"# loop={l.loop_id} header={l.header} parent={l.parent} stmts={l.stmts} "
                        f"heuristic={int(l.heuristic)} arrays={_names(l.arrays)}")
    sections = []
    for u in t.units:
        lines = [u.name]
        order = [f.name for f in u.functions]
        order += [l.function for l in u.loops if l.function not in order]
        for fname in order:
            loops = u.loops_of(fname)
            if not loops:
                continue
            lines.append(f"function={fname}")
            for l in loops:
                lines += [f"loop{l.loop_id}", f"count={l.local_count}", f"call={int(l.has_call)}",
                          f"well_nested={int(l.well_nested)}"]
                lines += [f"-{c}" for c in l.callees]
                if l.mem_accesses:
                    lines.append(f"mem={l.mem_accesses}")
        sections.append("\n".join(lines))
    return "\n".join(head) + "\n" + "\n\n".join(sections) + ("\n" if sections else "")


def body_text(text: str) -> str:
    """The transcript without its comment header."""
    return "".join(ln for ln in text.splitlines(keepends=True) if not ln.startswith("#"))


_IDENT = re.compile(r"[A-Za-z_]\w*")


def parse(text: str, path: str = "<transcript>") -> Transcript:
    t = Transcript()
    meta_units, meta_funcs, meta_loops = {}, {}, {}
    unit = None
    func = None
    loop = None
    expect = None  # next mandatory field of the current loop
    seen_ids = set()
    order = ("count", "call", "well_nested")

    def fail(msg, n):
        raise TranscriptError(msg, n, path)

    def close_loop(n):
        if loop is not None and expect is not None:
            fail(f"loop{loop.loop_id} is missing '{expect}='", n)

    for n, raw in enumerate(text.split("\n"), 1):
        line = raw.rstrip("\r")
        if line.startswith("#"):
            m = re.fullmatch(r"# next_loop=(\d+)", line)
            if m:
                t.next_loop = int(m[1])
                continue
            m = re.fullmatch(r"# unit=(\S+) sha256=(\S+)", line)
            if m:
                meta_units[m[1]] = "" if m[2] == "-" else m[2]
                continue
            m = re.fullmatch(r"# function=(\S+):(\S+) callees=(\S+) sites=(\S+)", line)
            if m:
                sites = [] if m[4] == "-" else [(c, int(k)) for c, k in
                                                (s.rsplit("@", 1) for s in m[4].split(","))]
                meta_funcs.setdefault(m[1], []).append(FunctionRecord(m[1], m[2], _unnames(m[3]), sites))
                continue
            m = re.fullmatch(r"# loop=(\d+) header=(-?\d+) parent=(\d+) stmts=(\d+) heuristic=([01]) "
                             r"arrays=(\S+)", line)
            if m:
                meta_loops[int(m[1])] = (int(m[2]), int(m[3]), int(m[4]), m[5] == "1", _unnames(m[6]))
            continue
        if line == "":
            close_loop(n)
            if expect is None and loop is not None:
                loop = None
            unit = func = None
            continue
        if unit is None:
            if not _is_unit_name(line):
                fail(f"expected a unit name, got {line!r}", n)
            unit = UnitSection(line)
            if t.unit(line) is not None:
                fail(f"duplicate unit section {line!r}", n)
            t.units.append(unit)
            continue
        m = re.fullmatch(r"function=(\S+)", line)
        if m:
            close_loop(n)
            if not _IDENT.fullmatch(m[1]):
                fail(f"invalid function name {m[1]!r}", n)
            func, loop, expect = m[1], None, None
            continue
        m = re.fullmatch(r"loop(\d+)", line)
        if m:
            close_loop(n)
            if func is None:
                fail("loop record outside a function group", n)
            lid = int(m[1])
            if lid in seen_ids:
                fail(f"duplicate loop id {lid}", n)
            seen_ids.add(lid)
            loop = LoopRecord(lid, unit.name, func, 0, False, False)
            unit.loops.append(loop)
            expect = "count"
            continue
        if loop is None:
            fail(f"unexpected line {line!r}", n)
        m = re.fullmatch(r"(count|call|well_nested|mem)=(.*)", line)
        if m:
            key, val = m[1], m[2]
            if key != "mem" and key != expect:
                fail(f"expected '{expect}=' but found '{key}='", n)
            if not re.fullmatch(r"\d+", val):
                fail(f"{key} must be a nonnegative integer, got {val!r}", n)
            v = int(val)
            if key in ("call", "well_nested") and v not in (0, 1):
                fail(f"{key} must be 0 or 1", n)
            if key == "count":
                loop.local_count = v
            elif key == "call":
                loop.has_call = bool(v)
            elif key == "well_nested":
                loop.well_nested = bool(v)
            else:
                if expect is not None:
                    fail("mem= before the mandatory loop fields", n)
                loop.mem_accesses = v
            if key != "mem":
                i = order.index(key)
                expect = order[i + 1] if i + 1 < len(order) else None
            continue
        if line.startswith("-"):
            if expect is not None:
                fail("callee line before the mandatory loop fields", n)
            name = line[1:]
            if not _IDENT.fullmatch(name):
                fail(f"invalid callee name {name!r}", n)
            loop.callees.append(name)
            continue
        fail(f"unexpected line {line!r}", n)
    close_loop(len(text.split("\n")))

    for u in t.units:
        u.checksum = meta_units.get(u.name, "")
        u.functions = meta_funcs.get(u.name, [])
        if not u.functions:
            # plain transcripts without the header: one record per function group
            names = []
            for l in u.loops:
                if l.function not in names:
                    names.append(l.function)
            for name in names:
                sites = _innermost_sites(u, name)
                callees = list(dict.fromkeys(c for c, _ in sites))
                u.functions.append(FunctionRecord(u.name, name, callees, sites))
        for l in u.loops:
            if l.loop_id in meta_loops:
                l.header, l.parent, l.stmts, l.heuristic, l.arrays = meta_loops[l.loop_id]
            if l.has_call != bool(l.callees):
                raise TranscriptError(f"loop{l.loop_id}: call={int(l.has_call)} disagrees with its callee list",
                                      0, path)
    if seen_ids and t.next_loop <= max(seen_ids):
        t.next_loop = max(seen_ids) + 1
    return t


def _innermost_sites(u: UnitSection, fname: str) -> list:
    """Without nesting metadata every callee of a loop is attributed to that loop once."""
    sites = []
    for l in u.loops_of(fname):
        for c in l.callees:
            if (c, l.loop_id) not in sites:
                sites.append((c, l.loop_id))
    return sites


def _is_unit_name(line: str) -> bool:
    return bool(line) and not line.startswith(("function=", "loop", "-", " ")) and "=" not in line


def read(path) -> Transcript:
    p = Path(path)
    if not p.exists():
        return Transcript()
    return parse(p.read_text(encoding="utf-8"), str(path))


def write(path, t: Transcript) -> None:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    tmp = p.with_name(p.name + ".tmp")
    tmp.write_text(serialize(t), encoding="utf-8", newline="\n")
    os.replace(tmp, p)
