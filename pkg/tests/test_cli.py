import json
import subprocess
import sys

import pytest
import yaml

from purposekg.cli import main
from purposekg.serialize import Workspace


def _run(*argv):
    return main([str(a) for a in argv])


def _edit_purpose(directory, **changes):
    path = directory / "purpose.yaml"
    data = yaml.safe_load(path.read_text())
    data.update(changes)
    path.write_text(yaml.safe_dump(data))
    return path


def test_run_passes_and_writes_workspace(ehr_dir, tmp_path, capsys):
    ws = tmp_path / "ws"
    assert _run("run", "--purpose", ehr_dir / "purpose.yaml", "--workspace", ws) == 0
    summary = json.loads((ws / "summary.json").read_text())
    assert summary["status"] == "pass"
    assert summary["entities"] == 9
    assert summary["triples"] == len((ws / "04_integration" / "eg.nt").read_text().splitlines())
    assert summary["verdicts"] == {p: "pass" for p in ("inception", "modeling", "alignment", "integration")}
    assert len(json.loads((ws / "history.json").read_text())) == 4
    for name in ("01_inception/gate.json", "02_modeling/model.yaml", "03_alignment/etg.yaml", "03_alignment/cleaned/d1.json"):
        assert (ws / name).is_file()
    assert not (ws / ".lock").exists()
    assert "pass: 9 entities" in capsys.readouterr().out


def test_phase_by_phase_matches_run(ehr_dir, tmp_path):
    purpose = ehr_dir / "purpose.yaml"
    stepwise, full = tmp_path / "a", tmp_path / "b"
    for command in ("inception", "model", "align", "integrate"):
        assert _run(command, "--purpose", purpose, "--workspace", stepwise) == 0
    assert _run("run", "--purpose", purpose, "--workspace", full) == 0
    for name in ("04_integration/eg.nt", "03_alignment/etg.yaml", "02_modeling/model.yaml"):
        assert (stepwise / name).read_bytes() == (full / name).read_bytes()


def test_gate_failure_exits_2(ehr_copy, tmp_path, capsys):
    override = tmp_path / "strict.yaml"
    override.write_text("coverage_core: 0.95\n")
    code = _run(
        "inception", "--purpose", ehr_copy / "purpose.yaml", "--workspace", tmp_path / "ws", "--thresholds-override", override
    )
    assert code == 2
    assert "core coverage 0.800 < 0.95" in capsys.readouterr().out
    # the next phase refuses to run on a failed gate
    assert _run("model", "--purpose", ehr_copy / "purpose.yaml", "--workspace", tmp_path / "ws") == 1


def test_exhaustion_exits_3(ehr_dir, tmp_path):
    override = tmp_path / "strict.yaml"
    override.write_text("thresholds:\n  sparsity_min: 0.9\n")
    ws = tmp_path / "ws"
    code = _run("run", "--purpose", ehr_dir / "purpose.yaml", "--workspace", ws, "--thresholds-override", override)
    assert code == 3
    assert json.loads((ws / "summary.json").read_text())["status"] == "exhausted"
    history = json.loads((ws / "history.json").read_text())
    assert sum(e["verdict"] == "fail" for e in history) == 4
    assert history[-1]["phase"] == "alignment"


def test_errors_exit_1(ehr_dir, tmp_path, capsys):
    ws = tmp_path / "ws"
    assert _run("integrate", "--purpose", ehr_dir / "purpose.yaml", "--workspace", ws) == 1
    assert "missing artifact" in capsys.readouterr().err
    assert _run("run", "--purpose", tmp_path / "nope.yaml", "--workspace", ws) == 1
    assert _run("run", "--purpose", ehr_dir / "purpose.yaml", "--workspace", ws, "--base-iri", "not an iri") == 1
    with pytest.raises(SystemExit) as info:
        _run("frobnicate")
    assert info.value.code == 1


def test_locked_workspace(ehr_dir, tmp_path, capsys):
    ws = tmp_path / "ws"
    holder = Workspace(ws)
    with holder:
        assert _run("run", "--purpose", ehr_dir / "purpose.yaml", "--workspace", ws) == 1
    assert "in use" in capsys.readouterr().err
    assert _run("run", "--purpose", ehr_dir / "purpose.yaml", "--workspace", ws) == 0


def test_unaligned_run(ehr_copy, tmp_path):
    purpose = _edit_purpose(ehr_copy, ontologies=[])
    ws = tmp_path / "ws"
    assert _run("run", "--purpose", purpose, "--workspace", ws) == 3
    assert _run("run", "--purpose", purpose, "--workspace", ws, "--allow-unaligned") == 0
    summary = json.loads((ws / "summary.json").read_text())
    assert summary["etg_provenance"] == ["model"]
    etg = yaml.safe_load((ws / "03_alignment" / "etg.yaml").read_text())
    assert {p["provenance"] for e in etg["etypes"] for p in e["properties"]} == {"model"}


def test_report(ehr_dir, tmp_path, capsys):
    ws = tmp_path / "ws"
    assert _run("report", "--workspace", ws) == 1
    assert "holds no phase artifacts" in capsys.readouterr().err
    _run("run", "--purpose", ehr_dir / "purpose.yaml", "--workspace", ws)
    capsys.readouterr()
    assert _run("report", "--workspace", ws) == 0
    out = capsys.readouterr().out
    assert "1. inception    pass" in out
    assert "datasets_kept                3" in out
    assert "coverage_core                0.800" in out
    assert "connectivity  0.222" in out


def test_report_shows_backtrack_chain(ehr_dir, tmp_path, capsys):
    override = tmp_path / "strict.yaml"
    override.write_text("sparsity_min: 0.9\nmax_backtrack_iterations: 1\n")
    ws = tmp_path / "ws"
    _run("run", "--purpose", ehr_dir / "purpose.yaml", "--workspace", ws, "--thresholds-override", override)
    capsys.readouterr()
    _run("report", "--workspace", ws)
    out = capsys.readouterr().out
    assert "alignment    fail -> back to modeling" in out
    assert "backtrack chain: alignment->modeling, alignment->modeling" in out


def test_seed_only_and_env_workspace(ehr_dir, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PURPOSEKG_WORKSPACE", str(tmp_path / "from_env"))
    assert _run("run", "--purpose", ehr_dir / "purpose.yaml", "--seed-only") == 0
    assert "ok: 3 CQs, 3 datasets, 1 ontologies" in capsys.readouterr().out
    assert not (tmp_path / "from_env").exists()
    assert _run("inception", "--purpose", ehr_dir / "purpose.yaml") == 0
    assert (tmp_path / "from_env" / "01_inception" / "gate.json").is_file()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "purposekg", "report", "--workspace", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 1
    assert "error:" in proc.stderr
