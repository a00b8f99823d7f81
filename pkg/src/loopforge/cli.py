"""Command-line driver: ``collect`` then ``synth`` then ``verify``, with ``report`` to review."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import transcript as T
from .collector import collect_program
from .diagnostics import CompileError, Diagnostics
from .flow import (ArtifactError, ConfigError, load_artifacts, make_settings, parse_config_text, read_manifest,
                   stale_units, synthesize_program, verify_artifacts, write_artifacts, write_verify)
from .frontend.program import build_program
from .frontend.validate import IRError, validate_program
from .patcher import PatchError

OK, FAILED, USAGE = 0, 1, 2

log = logging.getLogger("loopforge")


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loopforge", description="Move hot loops of C programs into FSM accelerators.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("collect", help="record functions and loops of all units in a transcript")
    c.add_argument("sources", nargs="+", help="C source files, in link order")
    c.add_argument("-o", "--output", required=True, help="transcript file to write")

    s = sub.add_parser("synth", help="select, synthesize and patch loops using a transcript")
    s.add_argument("sources", nargs="+")
    s.add_argument("--transcript", required=True)
    s.add_argument("--top-n", type=int)
    s.add_argument("--min-speedup")
    s.add_argument("--config", help="key=value file; command-line options win")
    s.add_argument("--out", help="output directory")
    s.add_argument("--entry", help="entry function for whole-program checks")

    v = sub.add_parser("verify", help="check synthesized accelerators against software execution")
    v.add_argument("--out", required=True)
    v.add_argument("--trials", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--config")

    r = sub.add_parser("report", help="print the selection, estimate and timing reports")
    r.add_argument("--out", required=True)
    return p


def _config_values(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file {path} not found")
    return parse_config_text(p.read_text(encoding="utf-8"), path)


def _sources(paths: list) -> list:
    missing = [s for s in paths if not Path(s).is_file()]
    if missing:
        raise UsageError(f"no such source file: {', '.join(missing)}")
    names = [Path(s).name for s in paths]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        raise UsageError(f"source file names must be unique: {', '.join(dup)}")
    return [(Path(s).name, Path(s).read_text(encoding="utf-8")) for s in paths]


def cmd_collect(args, diags: Diagnostics) -> int:
    sources = _sources(args.sources)
    # every unit must compile before anything is written
    program = build_program(sources, diags)
    t = collect_program(program.units, diags)
    T.write(args.output, t)
    log.info("wrote %s (%d loops)", args.output, len(t.loops()))
    return OK


def cmd_synth(args, diags: Diagnostics) -> int:
    values = _config_values(args.config)
    if args.top_n is not None:
        values["top_n"] = str(args.top_n)
    if args.min_speedup is not None:
        values["min_speedup"] = args.min_speedup
    if args.out is not None:
        values["out"] = args.out
    if args.entry is not None:
        values["entry"] = args.entry
    settings = make_settings(values)
    if settings.out is None:
        raise UsageError("no output directory: pass --out or set out= in the config")
    if not Path(args.transcript).is_file():
        raise UsageError(f"transcript {args.transcript} not found; run collect first")
    sources = _sources(args.sources)
    program = build_program(sources, diags)
    t = T.read(args.transcript)
    stale = stale_units(program, t)
    if stale:
        for s in stale:
            print(f"loopforge: {s}", file=sys.stderr)
        print("loopforge: the transcript does not match the sources; rerun collect", file=sys.stderr)
        return FAILED
    outcome = synthesize_program(program, t, settings, diags)
    try:
        validate_program(outcome.patched)
    except IRError as e:
        print(f"loopforge: patched program is malformed: {e}", file=sys.stderr)
        return FAILED
    out = Path(settings.out)
    write_artifacts(out, program, sources, t, outcome, settings)
    for n in outcome.selection.notices:
        print(f"note: {n}")
    for a in outcome.accepted:
        print(f"loop{a.loop_id}: accelerator {a.name} in {a.spec.function} "
              f"({a.spec.state_count()} states, estimated speedup {float(a.estimate.speedup):.2f})")
    for r in outcome.rejected:
        print(f"loop{r.loop_id}: rejected: {r.reason}")
    print(f"wrote {out}")
    return OK


def cmd_verify(args, diags: Diagnostics) -> int:
    out = Path(args.out)
    if not out.is_dir():
        raise UsageError(f"output directory {out} does not exist")
    read_manifest(out)
    overrides = _config_values(args.config)
    if args.trials is not None:
        overrides["trials"] = str(args.trials)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    arts = load_artifacts(out, overrides, diags)
    res = verify_artifacts(arts, diags)
    write_verify(out, res)
    for i, r in sorted(res.equivalence.items()):
        print(f"loop{i}: {r.compared} trials compared, {len(r.mismatches)} mismatches, "
              f"{len(r.bound_violations)} cycle-bound violations")
    if res.programs is not None:
        pr = res.programs
        print(f"{pr.entry}: {pr.compared} whole-program trials, {len(pr.fallback_mismatches)} fallback and "
              f"{len(pr.simulated_mismatches)} simulated mismatches")
    if res.timing is not None:
        print(res.timing.table(), end="")
    if not res.ok:
        for p in res.problems:
            print(f"loopforge: {p}", file=sys.stderr)
        for i, r in sorted(res.equivalence.items()):
            for m in r.mismatches[:1]:
                print(f"loopforge: loop{i} counterexample {m.text()}", file=sys.stderr)
        return FAILED
    return OK


def cmd_report(args, diags: Diagnostics) -> int:
    out = Path(args.out)
    if not out.is_dir():
        raise UsageError(f"output directory {out} does not exist")
    read_manifest(out)
    parts = []
    for title, rel in (("selection", "selection.txt"), ("estimates", "estimates.txt"),
                       ("verification", "verify/summary.txt"), ("timing", "verify/timing_report.txt")):
        p = out / rel
        if p.is_file():
            parts.append(f"== {title} ==\n" + p.read_text(encoding="utf-8"))
    if not (out / "verify" / "summary.txt").is_file():
        parts.append("== verification ==\nnot run; use loopforge verify\n")
    print("\n".join(parts), end="")
    return OK


COMMANDS = {"collect": cmd_collect, "synth": cmd_synth, "verify": cmd_verify, "report": cmd_report}


def main(argv: list | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return USAGE if e.code else OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    diags = Diagnostics.to_stderr()
    try:
        return COMMANDS[args.command](args, diags)
    except UsageError as e:
        print(f"loopforge: {e}", file=sys.stderr)
        return USAGE
    except ArtifactError as e:
        print(f"loopforge: {e}", file=sys.stderr)
        return USAGE
    except ConfigError as e:
        print(f"loopforge: configuration: {e}", file=sys.stderr)
        return USAGE
    except (CompileError, T.TranscriptError, PatchError) as e:
        print(str(e) if not isinstance(e, PatchError) else f"loopforge: {e}", file=sys.stderr)
        return FAILED
    except OSError as e:
        print(f"loopforge: {e}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
