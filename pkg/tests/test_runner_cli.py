import json
import shutil

import pytest

from dgm import textio
from dgm.cli import main
from dgm.errors import MissingArtifactError, ReplayMismatchError, UsageError
from dgm.runner import RunConfig, data_dir, execute, read_trace, replay


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipeline-run")
    execute(RunConfig.load(domain="pipeline"), out)
    return out


def copy_run(run_dir, tmp_path):
    dst = tmp_path / "copy"
    shutil.copytree(run_dir, dst)
    return dst


def config_with(tmp_path, **changes):
    base = data_dir("circuit")
    raw = textio.read(base / "config.json")
    for key in ("rules", "policy", "models", "requirements", "meta"):
        raw[key] = str(base / raw[key])
    raw.update(changes)
    path = tmp_path / "config.json"
    textio.write(path, raw)
    return path


def test_run_writes_every_artifact(run_dir):
    for name in ("config.json", "trace.jsonl", "report.json", "timing.json", "store"):
        assert (run_dir / name).exists()
    report = textio.read(run_dir / "report.json")
    assert len(report["switches"]) == 3
    mins = report["certified_min_utilities"]
    assert all(b > a for a, b in zip(mins, mins[1:]))
    kinds = {r["type"] for r in read_trace(run_dir / "trace.jsonl")}
    assert {"episode_start", "step", "episode_end", "revise", "switch", "end"} <= kinds


def test_step_records_carry_the_state_hashes(run_dir):
    for r in read_trace(run_dir / "trace.jsonl"):
        if r["type"] == "step":
            assert {"rules", "policy", "meta", "action", "concept", "reward", "utility"} <= set(r)


def test_replay_reproduces_the_run(run_dir):
    assert replay(run_dir) == textio.read(run_dir / "report.json")


def test_replay_detects_a_tampered_trace(run_dir, tmp_path):
    out = copy_run(run_dir, tmp_path)
    lines = (out / "trace.jsonl").read_text().splitlines()
    k = next(i for i, line in enumerate(lines) if '"type": "step"' in line or '"type":"step"' in line)
    rec = json.loads(lines[k])
    rec["reward"] += 1.0
    lines[k] = textio.record_line(rec)
    (out / "trace.jsonl").write_text("\n".join(lines) + "\n")
    with pytest.raises(ReplayMismatchError):
        replay(out)


def test_replay_detects_a_tampered_report(run_dir, tmp_path):
    out = copy_run(run_dir, tmp_path)
    report = textio.read(out / "report.json")
    report["certified_min_utilities"][0] += 1.0
    textio.write(out / "report.json", report)
    with pytest.raises(ReplayMismatchError):
        replay(out, deep=False)


def test_replay_reports_missing_snapshots(run_dir, tmp_path):
    out = copy_run(run_dir, tmp_path)
    shutil.rmtree(out / "store" / "snapshots")
    with pytest.raises(MissingArtifactError):
        replay(out)


def test_config_overrides_and_validation(tmp_path):
    cfg = RunConfig.load(seed=5, switch_limit=1)
    assert cfg.seed == 5 and cfg.switch_limit == 1
    with pytest.raises(UsageError):
        RunConfig.load(seed=-1)
    with pytest.raises(UsageError):
        RunConfig.load(domain="nowhere")
    with pytest.raises(UsageError):
        RunConfig.load(config_with(tmp_path), domain="pipeline")


def test_cli_exit_codes(run_dir, tmp_path):
    assert main([]) == 1
    assert main(["run"]) == 1
    assert main(["run", "--out", str(tmp_path / "r"), "--config", str(tmp_path / "absent.json")]) == 1
    assert main(["replay", "--out", str(run_dir)]) == 0
    assert main(["replay", "--out", str(tmp_path / "nothing-here")]) == 3
    assert main(["check", "--certificate", str(tmp_path / "none.json"), "--out", str(run_dir)]) == 3


def test_cli_check_valid_and_tampered(run_dir, tmp_path, capsys):
    report = textio.read(run_dir / "report.json")
    cert_path = run_dir / "store" / "certificates" / f"{report['switches'][0]['certificate']}.json"
    assert main(["check", "--certificate", str(cert_path)]) == 0
    bad = textio.read(cert_path)
    bad["conclusion"] = not bad["conclusion"]
    textio.write(tmp_path / "bad.json", bad)
    assert main(["check", "--certificate", str(tmp_path / "bad.json"), "--store", str(run_dir / "store")]) == 2
    bad["basis"] = "0" * 64
    textio.write(tmp_path / "gone.json", bad)
    assert main(["check", "--certificate", str(tmp_path / "gone.json"), "--store", str(run_dir / "store")]) == 3
    capsys.readouterr()


def test_cli_certify(run_dir, tmp_path, capsys):
    report = textio.read(run_dir / "report.json")
    proposal = run_dir / "store" / "proposals" / f"{report['switches'][0]['proposal']}.json"
    assert main(["certify", "--domain", "pipeline", "--out", str(run_dir), "--proposal", str(proposal)]) == 0
    assert json.loads(capsys.readouterr().out)["conclusion"] is True
    assert main(["certify", "--domain", "pipeline", "--out", str(run_dir),
                 "--proposal", str(tmp_path / "missing.json")]) == 3


def test_cli_budget_exceeded(tmp_path):
    path = config_with(tmp_path, params={"max_expansions": 5})
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "r"), "--quiet"]) == 4


def test_cli_oracles(capsys):
    assert main(["oracle", "enumerate", "--bound", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["match"] is True
    assert main(["oracle", "truth-table"]) == 0
    rows = json.loads(capsys.readouterr().out)["rows"]
    assert [(r["C"], r["S"]) for r in rows] == [(0, 0), (0, 1), (0, 1), (1, 0)]
    assert main(["oracle", "reward"]) == 0
    assert main(["oracle", "equivalence", "--horizon", "3"]) == 0
    assert main(["oracle", "truth-table", "--domain", "pipeline"]) == 1
    capsys.readouterr()


def test_rules_override_is_recorded(tmp_path):
    rules = textio.read(data_dir("circuit") / "rules.json")
    rules["rules"] = [r for r in rules["rules"] if r["id"] != "driven-outputs-have-a-source"]
    textio.write(tmp_path / "rules.json", rules)
    cfg = RunConfig.load(rules=tmp_path / "rules.json", switch_limit=0)
    execute(cfg, tmp_path / "out")
    assert textio.read(tmp_path / "out" / "config.json")["rules"] == rules
