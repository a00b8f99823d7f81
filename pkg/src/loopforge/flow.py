"""Whole-program stages shared by the command line and the test-suite.

``synthesize_program`` runs selection, synthesis, estimation and patching
in memory; ``write_artifacts`` and ``load_artifacts`` move the result to and
from an output directory; ``verify_artifacts`` re-checks everything that was
written there.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import transcript as T
from .analyzer import RANKING_KEYS, SelectionReport, analyze_frequencies, rank_and_select
from .diagnostics import CompileError, Diagnostics
from .frontend.ir import Call, MirProgram
from .frontend.program import build_program
from .hdl import check_structure, emit_verilog, layout_registers, parse_regmap
from .patcher import accel_table_text, emit_c, emit_runtime, patch_program, wrapper_name
from .synth.costmodel import FIELD_NAMES, CostModel, cost_model_from_config
from .synth.fsm import from_json, to_text, validate_fsm
from .synth.pipeline import Accelerator, StaleSelection, locate_loop, synthesize_loop
from .verifier.cosim import ProgramTrialReport, TimingReport, compare_programs, cosimulate
from .verifier.equiv import check_equivalence


class ConfigError(Exception):
    pass


class ArtifactError(Exception):
    """The output directory is missing or does not hold synthesis results."""


SETTING_KEYS = ("top_n", "rank_key", "seed", "trials", "program_trials", "entry", "args", "out")


@dataclass
class Settings:
    model: CostModel = field(default_factory=CostModel)
    top_n: int = 1
    rank_key: str = "total"
    seed: int = 0
    trials: int = 1000
    program_trials: int = 200
    entry: str | None = None
    args: list | None = None
    out: str | None = None

    def lines(self) -> list:
        m = self.model
        out = [f"top_n={self.top_n}", f"rank_key={self.rank_key}", f"seed={self.seed}",
               f"trials={self.trials}", f"program_trials={self.program_trials}",
               f"entry={self.entry or ''}",
               f"args={','.join(map(str, self.args)) if self.args is not None else ''}",
               f"f_cpu={_frac(m.f_cpu)}", f"f_accel={_frac(m.f_accel)}",
               f"invocation_overhead_cycles={m.invocation_overhead_cycles}",
               f"reg_access_cycles={m.reg_access_cycles}", f"mem_penalty_cycles={m.mem_penalty_cycles}",
               f"clock_budget={m.clock_budget}", f"min_speedup={_frac(m.min_speedup)}"]
        out += [f"op_delay.{k}={v}" for k, v in sorted(m.op_delay.items())]
        out += [f"sw_cycles.{k}={v}" for k, v in sorted(m.sw_cycles.items())]
        return out


def _frac(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_config_text(text: str, path: str = "<config>") -> dict:
    """``key=value`` lines; ``#`` starts a comment."""
    values = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{n}: missing key")
        values[key] = value
    return values


def make_settings(values: dict) -> Settings:
    """Settings from string values; cost-model keys go to the CostModel."""
    s = Settings()
    model_values = {}
    try:
        for key, value in values.items():
            if key == "top_n":
                s.top_n = int(value)
            elif key == "rank_key":
                s.rank_key = value
            elif key == "seed":
                s.seed = int(value)
            elif key == "trials":
                s.trials = int(value)
            elif key == "program_trials":
                s.program_trials = int(value)
            elif key == "entry":
                s.entry = value or None
            elif key == "args":
                s.args = [int(a, 0) for a in value.split(",") if a.strip()] if value else None
            elif key == "out":
                s.out = value or None
            elif key in FIELD_NAMES or key.startswith(("op_delay.", "sw_cycles.")):
                model_values[key] = value
            else:
                raise ConfigError(f"unknown configuration key {key!r}")
        s.model = cost_model_from_config(model_values)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if s.top_n < 1:
        raise ConfigError("top_n must be at least 1")
    if s.rank_key not in RANKING_KEYS:
        raise ConfigError(f"rank_key must be one of {', '.join(RANKING_KEYS)}")
    if s.trials < 0 or s.program_trials < 0:
        raise ConfigError("trial counts must not be negative")
    return s


# synthesis

@dataclass
class Rejection:
    loop_id: int
    reason: str
    accelerator: Accelerator | None = None


@dataclass
class SynthOutcome:
    selection: SelectionReport
    accepted: list
    rejected: list
    patched: MirProgram
    plans: list
    regmaps: dict
    sources: dict  # unit name -> patched C

    def estimates_text(self) -> str:
        blocks = []
        for a in self.accepted:
            blocks.append([f"[loop{a.loop_id}]", f"function={a.spec.function}", f"unit={a.spec.unit}",
                           f"fsm_states={a.spec.state_count()}"] + a.estimate.lines())
        for r in self.rejected:
            lines = [f"[loop{r.loop_id}]"]
            if r.accelerator is not None:
                lines += [f"function={r.accelerator.spec.function}", f"unit={r.accelerator.spec.unit}",
                          f"fsm_states={r.accelerator.spec.state_count()}"] + r.accelerator.estimate.lines()
            else:
                lines += ["accepted=0", f"reject_reason={r.reason}"]
            blocks.append(lines)
        blocks.sort(key=lambda b: int(b[0][5:-1]))
        return "\n".join("\n".join(b) + "\n" for b in blocks)


def stale_units(program: MirProgram, t: T.Transcript) -> list:
    """Problems that make ``t`` unusable for ``program``; empty when it matches."""
    problems = []
    have = {u.name: u.checksum for u in program.units}
    for u in t.units:
        if u.name not in have:
            problems.append(f"transcript unit {u.name} is not among the sources")
        elif u.checksum and u.checksum != have[u.name]:
            problems.append(f"{u.name} changed since the transcript was collected")
        elif not u.checksum:
            problems.append(f"transcript has no checksum for {u.name}")
    for name in have:
        if t.unit(name) is None:
            problems.append(f"{name} is missing from the transcript")
    return problems


def synthesize_program(program: MirProgram, t: T.Transcript, settings: Settings,
                       diags: Diagnostics | None = None) -> SynthOutcome:
    diags = diags or Diagnostics()
    _, freq = analyze_frequencies(t, diags)
    selection = rank_and_select(t, freq, settings.top_n, settings.rank_key)
    accepted, rejected = [], []
    for loop_id in selection.chosen:
        try:
            acc = synthesize_loop(program, t, loop_id, settings.model, freq, diags)
        except StaleSelection as e:
            raise CompileError(str(e) + "; rerun collect", t.loop(loop_id).unit) from None
        if acc is None:
            reason = diags.items[-1].message if diags.items else "unsupported"
            rejected.append(Rejection(loop_id, reason))
        elif not acc.estimate.accepted:
            rejected.append(Rejection(loop_id, acc.estimate.reject_reason, acc))
        else:
            accepted.append(acc)
    accepted.sort(key=lambda a: a.loop_id)
    rejected.sort(key=lambda r: r.loop_id)
    regmaps = {a.loop_id: layout_registers(a.spec) for a in accepted}
    sites = []
    for a in accepted:
        f, node = locate_loop(program, t, a.loop_id)
        sites.append((a.loop_id, f.name, node, a.spec))
    patched, plans, _ = patch_program(program, sites, regmaps, diags)
    return SynthOutcome(selection, accepted, rejected, patched, plans, regmaps, emit_c(patched))


def default_entry(program: MirProgram) -> str | None:
    if program.function("main") is not None:
        return "main"
    called = {s.func for f in program.functions() for _, s in f.statements() if isinstance(s, Call)}
    for f in program.functions():
        if f.name not in called:
            return f.name
    return None


# artifact directory

MANIFEST = "manifest.txt"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    tmp.replace(path)


def write_artifacts(out: Path, program: MirProgram, originals: list, t: T.Transcript, outcome: SynthOutcome,
                    settings: Settings) -> list:
    """Write every synthesis product below ``out``; returns the relative paths written."""
    out = Path(out)
    written = []

    def put(rel: str, text: str) -> None:
        _write(out / rel, text)
        written.append(rel)

    entry = settings.entry or default_entry(program)
    ids = [a.loop_id for a in outcome.accepted]
    put(MANIFEST, "\n".join([
        "format=loopforge-artifacts-1",
        "units=" + ",".join(name for name, _ in originals),
        "accelerators=" + ",".join(f"loop{i}" for i in ids),
        f"entry={entry or ''}",
    ]) + "\n")
    put("config.txt", "\n".join(settings.lines()) + "\n")
    put("transcript.txt", T.serialize(t))
    for name, text in originals:
        put(f"sources/{name}", text)
    for name, text in outcome.sources.items():
        put(f"patched/{name}", text)
    put("selection.txt", outcome.selection.table())
    put("estimates.txt", outcome.estimates_text())
    put("patch_plan.txt", "\n".join(p.text() for p in outcome.plans))
    put("accel_runtime.c", emit_runtime(ids))
    put("accel_table.txt", accel_table_text([(a.loop_id, wrapper_name(a.loop_id), f"{a.name}_regmap.txt")
                                             for a in outcome.accepted]))
    for a in outcome.accepted:
        regmap = outcome.regmaps[a.loop_id]
        core, wrapper = emit_verilog(a.spec, regmap)
        put(f"{a.name}_core.v", core)
        put(f"{a.name}_wrapper.v", wrapper)
        put(f"{a.name}_regmap.txt", regmap.text())
        put(f"{a.name}_fsm.json", a.spec.to_json())
        put(f"{a.name}_fsm.txt", to_text(a.spec))
    return written


@dataclass
class Artifacts:
    out: Path
    units: list
    entry: str | None
    loop_ids: list
    settings: Settings
    original: MirProgram
    patched: MirProgram
    transcript: T.Transcript
    specs: dict = field(default_factory=dict)  # loop id -> FsmSpec or an error message
    regmaps: dict = field(default_factory=dict)


def read_manifest(out: Path) -> dict:
    p = Path(out) / MANIFEST
    if not p.is_file():
        raise ArtifactError(f"{out} holds no synthesis results (missing {MANIFEST}); run synth first")
    values = parse_config_text(p.read_text(encoding="utf-8"), str(p))
    if values.get("format") != "loopforge-artifacts-1":
        raise ArtifactError(f"{p}: unrecognised artifact format")
    return values


def load_artifacts(out: Path, overrides: dict | None = None, diags: Diagnostics | None = None) -> Artifacts:
    """Read a synth output directory.  A spec that does not load is recorded as a string."""
    out = Path(out)
    diags = diags or Diagnostics()
    man = read_manifest(out)
    values = parse_config_text((out / "config.txt").read_text(encoding="utf-8"), str(out / "config.txt"))
    values.update(overrides or {})
    settings = make_settings({k: v for k, v in values.items() if v != "" or k in ("entry", "args")})
    units = [u for u in man.get("units", "").split(",") if u]
    ids = [int(x[4:]) for x in man.get("accelerators", "").split(",") if x]
    missing = [f"sources/{u}" for u in units if not (out / "sources" / u).is_file()]
    missing += [f"patched/{u}" for u in units if not (out / "patched" / u).is_file()]
    for i in ids:
        missing += [f"loop{i}{s}" for s in ("_fsm.json", "_regmap.txt") if not (out / f"loop{i}{s}").is_file()]
    if missing:
        raise ArtifactError(f"{out}: missing artifacts: {', '.join(missing)}")
    original = build_program([out / "sources" / u for u in units], diags)
    patched = build_program([out / "patched" / u for u in units], diags)
    t = T.read(out / "transcript.txt")
    arts = Artifacts(out, units, settings.entry or man.get("entry") or None, ids, settings, original, patched, t)
    for i in ids:
        try:
            arts.specs[i] = from_json((out / f"loop{i}_fsm.json").read_text(encoding="utf-8"))
        except (ValueError, KeyError, TypeError) as e:
            arts.specs[i] = f"cannot load loop{i}_fsm.json: {type(e).__name__}: {e}"
        try:
            arts.regmaps[i] = parse_regmap((out / f"loop{i}_regmap.txt").read_text(encoding="utf-8"))
        except ValueError as e:
            arts.specs[i] = f"cannot load loop{i}_regmap.txt: {e}"
    return arts


@dataclass
class VerifyResult:
    problems: list = field(default_factory=list)
    equivalence: dict = field(default_factory=dict)  # loop id -> EquivalenceReport
    programs: ProgramTrialReport | None = None
    timing: TimingReport | None = None
    files: dict = field(default_factory=dict)  # relative path -> text

    @property
    def ok(self) -> bool:
        return not self.problems


def verify_artifacts(arts: Artifacts, diags: Diagnostics | None = None) -> VerifyResult:
    diags = diags or Diagnostics()
    s = arts.settings
    model = s.model
    res = VerifyResult()
    fsms = {}
    loops = {}
    for i in arts.loop_ids:
        spec = arts.specs[i]
        name = f"loop{i}"
        if isinstance(spec, str):
            res.problems.append(spec)
            continue
        for p in validate_fsm(spec, model):
            res.problems.append(f"{name}: schedule validator: {p}")
        core = (arts.out / f"{name}_core.v").read_text(encoding="utf-8") if (arts.out / f"{name}_core.v").is_file() else ""
        wrapper = (arts.out / f"{name}_wrapper.v").read_text(encoding="utf-8") \
            if (arts.out / f"{name}_wrapper.v").is_file() else ""
        for p in check_structure(spec, arts.regmaps[i], core, wrapper):
            res.problems.append(f"{name}: HDL structure: {p}")
        try:
            f, node = locate_loop(arts.original, arts.transcript, i)
        except StaleSelection as e:
            res.problems.append(f"{name}: {e}")
            continue
        report = check_equivalence(arts.original, f, node, spec, s.trials, s.seed, model)
        res.equivalence[i] = report
        res.files[f"verify/{name}_equivalence.txt"] = report.text()
        if report.mismatches:
            res.problems.append(f"{name}: {len(report.mismatches)} equivalence mismatches")
        if report.bound_violations:
            res.problems.append(f"{name}: {len(report.bound_violations)} cycle-bound violations")
        fsms[i] = (spec, arts.regmaps[i])
        loops[i] = (f.name, node)
    entry = arts.entry
    if entry is None or arts.original.function(entry) is None:
        res.files["verify/program_trials.txt"] = f"entry={entry or '-'}\nskipped=no entry function\n"
    else:
        pr = compare_programs(arts.original, arts.patched, fsms, model, entry, s.program_trials, s.seed)
        res.programs = pr
        res.files["verify/program_trials.txt"] = pr.text()
        if not pr.ok:
            res.problems.append(f"whole program: {len(pr.fallback_mismatches)} fallback and "
                                f"{len(pr.simulated_mismatches)} simulated mismatches")
        arity = sum(1 for p in arts.original.function(entry).params if not p.out)
        args = list(s.args) if s.args is not None else [0] * arity
        if len(args) != arity:
            res.problems.append(f"args has {len(args)} values but {entry} takes {arity}")
        else:
            result, timing = cosimulate(arts.patched, fsms, model, entry, args, arts.original, loops)
            want = cosimulate(arts.original, {}, model, entry, args)[0]
            res.timing = timing
            head = f"entry={entry}\nargs={','.join(map(str, args))}\nresult={result.value if not result.trap else 'trap:' + result.trap}\n"
            res.files["verify/timing_report.txt"] = timing.text() + "\n" + head
            if result.observable() != want.observable():
                res.problems.append(f"cosimulation of {entry}({', '.join(map(str, args))}) differs from the original")
    summary = [f"accelerators={','.join(f'loop{i}' for i in arts.loop_ids) or '-'}",
               f"trials={s.trials}", f"seed={s.seed}", f"program_trials={s.program_trials}",
               f"status={'ok' if res.ok else 'failed'}"]
    summary += [f"problem {p}" for p in res.problems]
    for i, r in sorted(res.equivalence.items()):
        for m in r.mismatches[:3]:
            summary.append(f"counterexample loop{i} {m.text()}")
    res.files["verify/summary.txt"] = "\n".join(summary) + "\n"
    return res


def write_verify(out: Path, res: VerifyResult) -> None:
    for rel, text in sorted(res.files.items()):
        _write(Path(out) / rel, text)
