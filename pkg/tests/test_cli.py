from __future__ import annotations

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from loopforge import transcript as T
from loopforge.cli import main
from loopforge.corpus import program as corpus_program
from loopforge.flow import ConfigError, make_settings, parse_config_text
from test_collector import SAMPLE_TRANSCRIPT


def copy_program(name: str, dest: Path) -> list:
    dest.mkdir(parents=True, exist_ok=True)
    out = []
    for f in corpus_program(name).files:
        shutil.copy(f, dest / f.name)
        out.append(str(dest / f.name))
    return out


def tree(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def chain(tmp_path):
    srcs = copy_program("chain", tmp_path / "src")
    tr = tmp_path / "t.txt"
    assert main(["collect", *srcs, "-o", str(tr)]) == 0
    return tmp_path, srcs, tr


def synth(srcs, tr, out, *extra):
    return main(["synth", *srcs, "--transcript", str(tr), "--out", str(out), *extra])


def test_collect_writes_sample_transcript(chain):
    _, _, tr = chain
    assert T.body_text(tr.read_text()) == SAMPLE_TRANSCRIPT


def test_collect_without_sources_is_a_usage_error(tmp_path):
    assert main(["collect", "-o", str(tmp_path / "t.txt")]) == 2


def test_collect_syntax_error_writes_nothing(tmp_path, capsys):
    bad = tmp_path / "bad.c"
    bad.write_text("int f( {")
    assert main(["collect", str(bad), "-o", str(tmp_path / "t.txt")]) == 1
    assert not (tmp_path / "t.txt").exists()
    assert "bad.c:1:" in capsys.readouterr().err


def test_synth_selects_loop3_only(chain, capsys):
    root, srcs, tr = chain
    assert synth(srcs, tr, root / "out", "--top-n", "1", "--min-speedup", "0") == 0
    out = capsys.readouterr().out
    assert "loop3: accelerator loop3 in fun3" in out
    files = tree(root / "out")
    assert "loop3_core.v" in files and "loop3_regmap.txt" in files
    assert not any(k.startswith(("loop1_", "loop2_")) for k in files)
    sel = files["selection.txt"].decode()
    assert "contains call" in sel


def test_top_n_above_eligible_count_gives_notice(chain, capsys):
    root, srcs, tr = chain
    assert synth(srcs, tr, root / "out", "--top-n", "5") == 0
    out = capsys.readouterr().out
    assert "note: only 1 eligible" in out
    assert out.count(": accelerator ") == 1


def test_high_threshold_rejects_line_of_sight(tmp_path, capsys):
    srcs = copy_program("los", tmp_path / "src")
    tr = tmp_path / "t.txt"
    assert main(["collect", *srcs, "-o", str(tr)]) == 0
    assert synth(srcs, tr, tmp_path / "out", "--top-n", "1", "--min-speedup", "10") == 0
    out = capsys.readouterr().out
    assert "rejected: estimated speedup" in out and "below the threshold 10" in out
    assert not list((tmp_path / "out").glob("*_core.v"))


def test_stale_transcript_asks_for_collect(chain, capsys):
    root, srcs, tr = chain
    Path(srcs[1]).write_text(Path(srcs[1]).read_text() + "\nint extra(int x) { return x; }\n")
    assert synth(srcs, tr, root / "out") == 1
    assert "rerun collect" in capsys.readouterr().err


def test_verify_passes_and_reports(chain, capsys):
    root, srcs, tr = chain
    out = root / "out"
    (root / "quick.cfg").write_text("# fewer trials\nprogram_trials=20\n")
    assert synth(srcs, tr, out, "--min-speedup", "0") == 0
    assert main(["verify", "--out", str(out), "--trials", "200", "--config", str(root / "quick.cfg")]) == 0
    text = capsys.readouterr().out
    assert "loop3: 200 trials compared, 0 mismatches, 0 cycle-bound violations" in text
    assert "Relative Performance" in text
    assert (out / "verify" / "timing_report.txt").is_file()
    assert main(["report", "--out", str(out)]) == 0
    rep = capsys.readouterr().out
    assert "== selection ==" in rep and "== timing ==" in rep


def test_verify_rejects_a_corrupted_spec(chain, capsys):
    root, srcs, tr = chain
    out = root / "out"
    assert synth(srcs, tr, out, "--min-speedup", "0") == 0
    p = out / "loop3_fsm.json"
    d = json.loads(p.read_text())
    ex = d["levels"][0]["exits"]
    ex[0]["id"], ex[1]["id"] = ex[1]["id"], ex[0]["id"]
    p.write_text(json.dumps(d))
    assert main(["verify", "--out", str(out), "--trials", "100", "--config", str(_quick(root))]) == 1
    err = capsys.readouterr().err
    assert "counterexample" in err


def _quick(root: Path) -> Path:
    p = root / "quick.cfg"
    p.write_text("program_trials=10\n")
    return p


def test_verify_on_empty_directory_is_a_usage_error(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["verify", "--out", str(tmp_path / "empty")]) == 2
    assert main(["verify", "--out", str(tmp_path / "missing")]) == 2


def test_synth_output_is_deterministic(chain):
    root, srcs, tr = chain
    assert synth(srcs, tr, root / "a", "--min-speedup", "0") == 0
    assert synth(srcs, tr, root / "b", "--min-speedup", "0") == 0
    assert tree(root / "a") == tree(root / "b")


def test_bad_config_is_a_usage_error(chain):
    root, srcs, tr = chain
    cfg = root / "bad.cfg"
    cfg.write_text("f_cpu=-3\n")
    assert main(["synth", *srcs, "--transcript", str(tr), "--out", str(root / "o"), "--config", str(cfg)]) == 2


def test_config_parsing():
    vals = parse_config_text("# comment\ntop_n = 2\nf_accel=100MHz\n")
    s = make_settings(vals)
    assert s.top_n == 2 and s.model.f_accel == 100 * 10 ** 6
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign here\n")
    with pytest.raises(ConfigError):
        make_settings({"bogus": "1"})


def test_console_entry_point_runs(tmp_path):
    r = subprocess.run([sys.executable, "-m", "loopforge", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "collect" in r.stdout
