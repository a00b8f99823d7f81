"""Verilog emission: a loop-specific core plus a memory-mapped bus wrapper."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .synth.fsm import FsmSpec

INPUT_BASE = 0x10
VERILOG_KEYWORDS = {
    "always", "and", "assign", "begin", "buf", "case", "casex", "casez", "default", "else", "end",
    "endcase", "endfunction", "endmodule", "for", "function", "if", "initial", "inout", "input",
    "integer", "localparam", "module", "nand", "negedge", "nor", "not", "or", "output", "parameter",
    "posedge", "reg", "signed", "wire", "xor", "xnor", "while", "generate", "genvar",
}


@dataclass
class RegEntry:
    offset: int
    role: str
    name: str


@dataclass
class RegisterMap:
    entries: list = field(default_factory=list)

    def text(self) -> str:
        return "".join(f"0x{e.offset:02X} {e.role} {e.name}\n" for e in self.entries)

    def offset_of(self, name: str) -> int:
        for e in self.entries:
            if e.name == name:
                return e.offset
        raise KeyError(name)

    @property
    def inputs(self) -> list:
        return [e for e in self.entries if e.role.startswith("input")]

    @property
    def outputs(self) -> list:
        return [e for e in self.entries if e.role.startswith("output") or e.role == "bb_idx"]


def layout_registers(spec: FsmSpec) -> RegisterMap:
    entries = [RegEntry(0x00, "control-status", "CTRL")]
    off = INPUT_BASE
    for k, name in enumerate(spec.input_names):
        entries.append(RegEntry(off, f"input{k}", name))
        off += 4
    for k, out in enumerate(spec.outputs):
        entries.append(RegEntry(off, f"output{k}", out.name))
        off += 4
    entries.append(RegEntry(off, "bb_idx", "bb_idx"))
    return RegisterMap(entries)


def parse_regmap(text: str) -> RegisterMap:
    entries = []
    for line in text.splitlines():
        if not line.strip():
            continue
        off, role, name = line.split()
        entries.append(RegEntry(int(off, 16), role, name))
    return RegisterMap(entries)


class _Names:
    """Sanitized, collision-free Verilog identifiers."""

    def __init__(self, reserved=()):
        self.used = set(reserved)
        self.map = {}

    def get(self, raw: str, prefix: str = "") -> str:
        key = (prefix, raw)
        if key in self.map:
            return self.map[key]
        base = prefix + re.sub(r"[^A-Za-z0-9_]", "_", raw)
        if not re.match(r"[A-Za-z_]", base):
            base = "v_" + base
        name, k = base, 0
        while name in self.used or name in VERILOG_KEYWORDS:
            k += 1
            name = f"{base}_{k}"
        self.used.add(name)
        self.map[key] = name
        return name


CORE_FIXED = ["clk", "rst", "start", "done", "busy"]
MEM_PORTS = ["mem_req", "mem_we", "mem_array", "mem_addr", "mem_wdata", "mem_rdata", "mem_grant"]


def port_names(spec: FsmSpec) -> tuple:
    """Sanitized (input ports, output ports) in register-map order."""
    names = _Names(CORE_FIXED + MEM_PORTS)
    ins = [names.get(n, "in_") for n in spec.input_names]
    outs = [names.get(o.name, "out_") for o in spec.outputs] + [names.get("bb_idx", "out_")]
    return ins, outs


def expected_core_ports(spec: FsmSpec) -> dict:
    ins, outs = port_names(spec)
    ports = {"clk": ("input", 1), "rst": ("input", 1), "start": ("input", 1),
             "done": ("output", 1), "busy": ("output", 1)}
    for p in ins:
        ports[p] = ("input", 32)
    for p in outs:
        ports[p] = ("output", 32)
    if spec.mem_ports:
        ports.update({"mem_req": ("output", 1), "mem_we": ("output", 1), "mem_array": ("output", 8),
                      "mem_addr": ("output", 32), "mem_wdata": ("output", 32),
                      "mem_rdata": ("input", 32), "mem_grant": ("input", 1)})
    return ports


def _encoding(names: list) -> tuple:
    n = len(names)
    if n < 32:
        width = n
        codes = {s: f"{n}'b" + "".join("1" if j == n - 1 - i else "0" for j in range(n)) for i, s in enumerate(names)}
    else:
        width = max(1, (n - 1).bit_length())
        codes = {s: f"{width}'d{i}" for i, s in enumerate(names)}
    return width, codes


class _CoreWriter:
    def __init__(self, spec: FsmSpec):
        self.spec = spec
        self.ins, self.outs = port_names(spec)
        self.names = _Names(CORE_FIXED + MEM_PORTS + self.ins + self.outs + ["state", "wait_cnt"])
        self.levels = {lv.id: lv for lv in spec.levels}
        self.arrays = {a: k for k, a in enumerate(spec.arrays)}
        self.state_names = ["S_IDLE"]
        for lv in spec.levels:
            for st in lv.states:
                self.state_names.append(f"S_L{lv.id}_{st.index}")
                if st.compound is not None:
                    self.state_names.append(f"S_L{lv.id}_{st.index}_RET")
        self.state_names.append("S_DONE")
        self.width, self.codes = _encoding(self.state_names)

    def reg(self, v) -> str:
        if isinstance(v, int):
            return f"-32'sd{-v}" if v < 0 else f"32'sd{v}"
        return self.names.get(v, "r_")

    def truth(self, v) -> str:
        if isinstance(v, int):
            return "1'b1" if v else "1'b0"
        return f"({self.reg(v)} != 0)"

    def registers(self) -> list:
        regs = []
        for n in self.spec.nodes:
            if n.dest is not None:
                regs.append(n.dest)
        for lv in self.spec.levels:
            regs += [p.reg for p in lv.phis]
            if lv.childexit:
                regs.append(lv.childexit)
        regs += [v for _, v in self.spec.inputs]
        seen, out = set(), []
        for r in regs:
            if r not in seen:
                seen.add(r)
                out.append(r)
        return out

    def expr(self, n) -> str:
        a = [self.reg(x) for x in n.args]
        op = n.op
        binary = {"add": "+", "sub": "-", "mul": "*", "and": "&", "or": "|", "xor": "^"}
        compare = {"eq": "==", "ne": "!=", "lt": "<", "le": "<=", "gt": ">", "ge": ">="}
        if op in binary:
            return f"{a[0]} {binary[op]} {a[1]}"
        if op in compare:
            return f"{{31'b0, {a[0]} {compare[op]} {a[1]}}}"
        if op in ("div", "mod"):
            sym = "/" if op == "div" else "%"
            guard = f"{a[1]} != 0" if n.pred is None else f"{self.truth(n.pred)} && {a[1]} != 0"
            return f"({guard}) ? {a[0]} {sym} {a[1]} : 32'sd0"
        if op == "shl":
            return f"{a[0]} << {self.shift(n.args[1])}"
        if op == "shr":
            return f"{a[0]} >>> {self.shift(n.args[1])}"
        if op == "neg":
            return f"-{a[0]}"
        if op == "not":
            return f"~{a[0]}"
        if op == "lnot":
            return f"{{31'b0, {a[0]} == 0}}"
        if op == "land":
            return f"{{31'b0, {self.truth(n.args[0])} && {self.truth(n.args[1])}}}"
        if op == "lor":
            return f"{{31'b0, {self.truth(n.args[0])} || {self.truth(n.args[1])}}}"
        if op == "select":
            return f"{self.truth(n.args[0])} ? {a[1]} : {a[2]}"
        if op == "copy":
            return a[0]
        raise ValueError(f"no HDL form for '{op}'")

    def shift(self, v) -> str:
        return str(v & 31) if isinstance(v, int) else f"{self.reg(v)}[4:0]"

    def action(self, n) -> list:
        if n.op == "compound":
            return []
        if n.op == "load":
            gate = self.truth(n.pred) if n.pred is not None else "1'b1"
            return [f"{self.reg(n.dest)} = {gate} ? mem_rdata : 32'sd0;  // {n.array}[{n.args[0]}]"]
        if n.op == "store":
            gate = self.truth(n.pred) if n.pred is not None else "1'b1"
            return [f"mem_req <= {gate};",
                    "mem_we <= 1'b1;",
                    f"mem_array <= 8'd{self.arrays[n.array]};",
                    f"mem_addr <= {self.reg(n.args[0])};",
                    f"mem_wdata <= {self.reg(n.args[1])};"]
        return [f"{self.reg(n.dest)} = {self.expr(n)};"]

    def goto(self, name: str) -> str:
        return f"state <= {name};"

    def enter(self, lv_id: int) -> list:
        lv = self.levels[lv_id]
        lines = [f"{self.reg(p.reg)} = {self.reg(p.init)};" for p in lv.phis]
        lines.append(self.goto(f"S_L{lv_id}_0"))
        return lines

    def latch(self, lv) -> list:
        # parallel copy: all right-hand sides are read before any update
        lines = []
        for p in lv.phis:
            if len(p.latch) == 1:
                lines.append(f"{self.reg(p.reg)} <= {self.reg(p.latch[0][1])};")
                continue
            e = self.reg(p.latch[-1][1])
            for pred, v in reversed(p.latch[:-1]):
                e = f"{self.truth(pred)} ? {self.reg(v)} : ({e})"
            lines.append(f"{self.reg(p.reg)} <= {e};")
        lines.append(self.goto(f"S_L{lv.id}_0"))
        return lines

    def leave(self, lv, exit_) -> list:
        if lv.parent is None:
            lines = []
            for out, port in zip(self.spec.outputs, self.outs):
                src = out.sources[exit_.index]
                value = self.reg(src) if src is not None else "32'sd0"
                lines.append(f"{port} <= {value};")
            lines += [f"{self.outs[-1]} <= 32'sd{exit_.id};", "done <= 1'b1;", "busy <= 1'b0;",
                      self.goto("S_DONE")]
            return lines
        parent = self.levels[lv.parent]
        s = next(st.index for st in parent.states if st.compound == lv.id)
        return [f"{self.reg(lv.childexit)} = 32'sd{exit_.id};", self.goto(f"S_L{parent.id}_{s}_RET")]

    def finish_state(self, lv, st) -> list:
        lines = []
        first = True
        for k in st.exits:
            e = lv.exits[k]
            kw = "if" if first else "else if"
            lines.append(f"{kw} ({self.truth(e.pred)}) begin")
            lines += ["    " + x for x in self.leave(lv, e)]
            lines.append("end")
            first = False
        nxt = (self.latch(lv) if st.index == len(lv.states) - 1
               else [self.goto(f"S_L{lv.id}_{st.index + 1}")])
        if first:
            return lines + nxt
        return lines + ["else begin"] + ["    " + x for x in nxt] + ["end"]

    def state_body(self, lv, st) -> list:
        acts = []
        for i in st.nodes:
            acts += self.action(self.spec.nodes[i])
        if st.compound is not None:
            comp = self.spec.nodes[self.levels[st.compound].compound]
            entry = self.enter(st.compound)
            if comp.pred is None:
                body = entry
            else:
                body = [f"if ({self.truth(comp.pred)}) begin"] + ["    " + x for x in entry] + ["end", "else begin"]
                body += ["    " + x for x in self.finish_state(lv, st)] + ["end"]
            return acts + body
        body = acts + self.finish_state(lv, st)
        if st.cycles > 1:
            return ([f"if (wait_cnt != 8'd{st.cycles - 1}) begin", "    wait_cnt <= wait_cnt + 8'd1;", "end",
                     "else begin", "    wait_cnt <= 8'd0;"] + ["    " + x for x in body] + ["end"])
        return body

    def emit(self) -> str:
        s = self.spec
        mod = self.names.get(s.name + "_core", "")
        ports = ["    input wire clk", "    input wire rst", "    input wire start",
                 "    output reg done", "    output reg busy"]
        ports += [f"    input wire signed [31:0] {p}" for p in self.ins]
        ports += [f"    output reg signed [31:0] {p}" for p in self.outs]
        if s.mem_ports:
            ports += ["    output reg mem_req", "    output reg mem_we", "    output reg [7:0] mem_array",
                      "    output reg signed [31:0] mem_addr", "    output reg signed [31:0] mem_wdata",
                      "    input wire signed [31:0] mem_rdata", "    input wire mem_grant"]
        out = [f"// accelerator core for {s.name} ({s.function} in {s.unit})",
               f"// {len(self.state_names)} states, {'one-hot' if len(self.state_names) < 32 else 'binary'} encoding"]
        if s.mem_ports:
            out.append("// memory request/grant port is a stub and is left unconnected by the wrapper")
        out.append(f"module {mod} (")
        out.append(",\n".join(ports))
        out.append(");")
        for name in self.state_names:
            out.append(f"    localparam {name} = {self.codes[name]};")
        out.append(f"    reg [{self.width - 1}:0] state;")
        out.append("    reg [7:0] wait_cnt;")
        for r in self.registers():
            out.append(f"    reg signed [31:0] {self.reg(r)};")
        out.append("")
        out.append("    always @(posedge clk) begin")
        out.append("        if (rst) begin")
        out.append("            state <= S_IDLE;")
        out.append("            done <= 1'b0;")
        out.append("            busy <= 1'b0;")
        out.append("            wait_cnt <= 8'd0;")
        if s.mem_ports:
            out.append("            mem_req <= 1'b0;")
        out.append("        end")
        out.append("        else begin")
        if s.mem_ports:
            out.append("            mem_req <= 1'b0;")
            out.append("            mem_we <= 1'b0;")
        out.append("            case (state)")
        idle = ["if (start) begin", "    done <= 1'b0;", "    busy <= 1'b1;"]
        for (name, value), port in zip(s.inputs, self.ins):
            idle.append(f"    {self.reg(value)} = {port};")
        idle += ["    " + x for x in self.enter(0)] + ["end"]
        out += self._case("S_IDLE", idle)
        for lv in s.levels:
            for st in lv.states:
                out += self._case(f"S_L{lv.id}_{st.index}", self.state_body(lv, st))
                if st.compound is not None:
                    out += self._case(f"S_L{lv.id}_{st.index}_RET", self.finish_state(lv, st))
        # done stays asserted until the next start, which is accepted directly
        out += self._case("S_DONE", idle)
        out.append("                default: state <= S_IDLE;")
        out.append("            endcase")
        out.append("        end")
        out.append("    end")
        out.append("endmodule")
        return "\n".join(out) + "\n"

    def _case(self, name, lines) -> list:
        pad = " " * 16
        return [f"{pad}{name}: begin"] + [pad + "    " + x for x in lines] + [f"{pad}end"]


def emit_core(spec: FsmSpec) -> str:
    return _CoreWriter(spec).emit()


def emit_wrapper(spec: FsmSpec, regmap: RegisterMap) -> str:
    ins, outs = port_names(spec)
    core = _Names().get(spec.name + "_core")
    mod = _Names().get(spec.name + "_wrapper")
    lines = [f"// memory-mapped register wrapper for {spec.name}",
             "// CTRL write: bit0 = start; CTRL read: bit0 = busy, bit1 = done",
             f"module {mod} (",
             "    input wire clk,",
             "    input wire rst,",
             "    input wire [15:0] bus_addr,",
             "    input wire [31:0] bus_wdata,",
             "    input wire bus_we,",
             "    input wire bus_re,",
             "    output reg [31:0] bus_rdata,",
             "    output reg bus_ack",
             ");",
             "    reg start_pulse;",
             "    wire core_done;",
             "    wire core_busy;"]
    for p in ins:
        lines.append(f"    reg signed [31:0] {p}_q;")
    for p in outs:
        lines.append(f"    wire signed [31:0] {p}_w;")
    conn = ["        .clk(clk)", "        .rst(rst)", "        .start(start_pulse)",
            "        .done(core_done)", "        .busy(core_busy)"]
    conn += [f"        .{p}({p}_q)" for p in ins]
    conn += [f"        .{p}({p}_w)" for p in outs]
    if spec.mem_ports:
        conn += ["        .mem_req()", "        .mem_we()", "        .mem_array()", "        .mem_addr()",
                 "        .mem_wdata()", "        .mem_rdata(32'd0)", "        .mem_grant(1'b0)"]
    lines.append(f"    {core} u_core (")
    lines.append(",\n".join(conn))
    lines.append("    );")
    lines += ["",
              "    always @(posedge clk) begin",
              "        if (rst) begin",
              "            start_pulse <= 1'b0;",
              "            bus_ack <= 1'b0;",
              "            bus_rdata <= 32'd0;",
              "        end",
              "        else begin",
              "            start_pulse <= 1'b0;",
              "            bus_ack <= bus_we | bus_re;",
              "            case (bus_addr)"]
    port_of = dict(zip(spec.input_names, ins))
    out_port = dict(zip([o.name for o in spec.outputs] + ["bb_idx"], outs))
    for e in regmap.entries:
        lines.append(f"                16'h{e.offset:04X}: begin  // {e.name}")
        if e.role == "control-status":
            lines.append("                    if (bus_we) start_pulse <= bus_wdata[0];")
            lines.append("                    if (bus_re) bus_rdata <= {30'd0, core_done, core_busy};")
        elif e.role.startswith("input"):
            lines.append(f"                    if (bus_we) {port_of[e.name]}_q <= bus_wdata;")
            lines.append(f"                    if (bus_re) bus_rdata <= {port_of[e.name]}_q;")
        else:
            lines.append(f"                    if (bus_re) bus_rdata <= {out_port[e.name]}_w;")
        lines.append("                end")
    lines += ["                default: if (bus_re) bus_rdata <= 32'd0;",
              "            endcase",
              "        end",
              "    end",
              "endmodule"]
    return "\n".join(lines) + "\n"


def emit_verilog(spec: FsmSpec, regmap: RegisterMap) -> tuple:
    return emit_core(spec), emit_wrapper(spec, regmap)


# structural checking

_PORT = re.compile(r"^\s*(input|output)\s+(?:wire|reg)?\s*(?:signed\s+)?(?:\[(\d+):0\]\s*)?([A-Za-z_][A-Za-z0-9_]*)\s*,?\s*$")
_DECODE = re.compile(r"^\s*16'h([0-9A-Fa-f]+):\s*begin\s*//\s*(\S+)\s*$")


def scan_ports(text: str) -> dict:
    """Port declarations of the first module in ``text``: name -> (direction, width)."""
    m = re.search(r"module\s+\w+\s*\((.*?)\);", text, re.S)
    if not m:
        return {}
    ports = {}
    for line in m.group(1).splitlines():
        pm = _PORT.match(line)
        if pm:
            width = int(pm.group(2)) + 1 if pm.group(2) is not None else 1
            ports[pm.group(3)] = (pm.group(1), width)
    return ports


def scan_decoder(text: str) -> list:
    return [(int(m.group(1), 16), m.group(2)) for m in map(_DECODE.match, text.splitlines()) if m]


def check_structure(spec: FsmSpec, regmap: RegisterMap, core: str, wrapper: str) -> list:
    """Problems found when re-reading emitted HDL against the accelerator description."""
    problems = []
    got = scan_ports(core)
    want = expected_core_ports(spec)
    if got != want:
        missing = sorted(set(want) - set(got))
        extra = sorted(set(got) - set(want))
        wrong = sorted(k for k in set(want) & set(got) if want[k] != got[k])
        problems.append(f"core ports differ: missing={missing} extra={extra} mismatched={wrong}")
    expected_map = layout_registers(spec)
    if [(e.offset, e.role, e.name) for e in regmap.entries] != \
            [(e.offset, e.role, e.name) for e in expected_map.entries]:
        problems.append("register map does not follow the layout rule")
    offs = [e.offset for e in regmap.entries]
    if any(o % 4 for o in offs) or offs != sorted(set(offs)) or (offs and offs[0] != 0):
        problems.append("register offsets must be aligned, increasing and start with CTRL at 0")
    decoded = scan_decoder(wrapper)
    if sorted(decoded) != sorted((e.offset, e.name) for e in regmap.entries):
        problems.append(f"wrapper decodes {decoded}, register map has "
                        f"{[(e.offset, e.name) for e in regmap.entries]}")
    for e in regmap.entries:
        if sum(1 for _, n in decoded if n == e.name) != 1:
            problems.append(f"register '{e.name}' is not decoded exactly once")
    if core.count("module ") != 1 or "endmodule" not in core:
        problems.append("core must contain exactly one module")
    return problems
