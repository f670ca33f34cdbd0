import json
import os
from pathlib import Path

import pytest

from select_ensemble.cli import main
from select_ensemble.pipeline import PipelineConfig


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    out = root / "syn"
    assert main(["synth", "--out", str(out), "--nodes", "30", "--ticks", "50", "--events", "3", "--seed", "2"]) == 0
    return out


def snapshot(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def embeds_manifest(path: Path) -> bool:
    text = path.read_text()
    if path.suffix == ".json":
        return "manifest" in json.loads(text)
    return text.startswith("# manifest: {")


def test_synth_outputs(synth):
    assert {p.name for p in synth.iterdir()} == {"edges.csv", "truth.txt"}
    lines = [l for l in (synth / "truth.txt").read_text().splitlines() if not l.startswith("#")]
    assert len(lines) == 3


def test_detect_writes_one_csv_per_component(synth, tmp_path):
    out = tmp_path / "det"
    assert main(["detect", "--input", str(synth / "edges.csv"), "--out", str(out)]) == 0
    csvs = sorted(p.name for p in (out / "scores").iterdir())
    cfg = PipelineConfig()
    assert len(csvs) == len(cfg.detectors) * len(cfg.features)
    assert "EBED_weighted-in-degree.csv" in csvs
    body = (out / "scores" / csvs[0]).read_text().splitlines()
    assert body[1] == "tick,score" and len(body) == 2 + 50


def test_missing_input_exit_2(tmp_path, capsys):
    missing = tmp_path / "absent.csv"
    assert main(["detect", "--input", str(missing), "--out", str(tmp_path / "o")]) == 2
    assert str(missing) in capsys.readouterr().err


def test_empty_truth_exit_1(synth, tmp_path):
    (tmp_path / "t.txt").write_text("")
    rc = main(["evaluate", "--input", str(synth / "edges.csv"), "--truth", str(tmp_path / "t.txt"), "--out", str(tmp_path / "o")])
    assert rc == 1


def test_bad_usage_exit_1(synth, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["detect", "--out", str(tmp_path)])
    assert exc.value.code == 1
    assert main(["ensemble", "--input", str(synth / "edges.csv"), "--out", str(tmp_path / "o"), "--strategy", "nope"]) == 1


def test_malformed_edge_file_exit_1(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("0,a,b\n1,a\n")
    assert main(["detect", "--input", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "line 2" in capsys.readouterr().err


def test_every_command_is_deterministic_and_contained(synth, tmp_path):
    edges, truth = str(synth / "edges.csv"), str(synth / "truth.txt")
    work = tmp_path / "work"
    work.mkdir()
    cwd = os.getcwd()
    os.chdir(work)
    try:
        commands = [
            ["detect", "--input", edges, "--out", "out/detect"],
            ["ensemble", "--input", edges, "--out", "out/ensemble", "--strategy", "horizontal"],
            ["evaluate", "--input", edges, "--truth", truth, "--out", "out/evaluate", "--trials", "4", "--delay-max", "2"],
            ["noise", "--input", edges, "--truth", truth, "--out", "out/noise", "--k-max", "1", "--repeats", "2"],
            ["synth", "--out", "out/synth", "--nodes", "20", "--ticks", "30", "--events", "2"],
        ]
        for cmd in commands:
            assert main(cmd) == 0, cmd
        first = snapshot(work)
        for cmd in commands:
            assert main(cmd) == 0, cmd
        assert snapshot(work) == first
    finally:
        os.chdir(cwd)
    assert all(k.startswith("out") for k in first)
    for rel in first:
        assert embeds_manifest(work / rel), rel


def test_manifest_contents(synth, tmp_path):
    out = tmp_path / "ens"
    assert main(["ensemble", "--input", str(synth / "edges.csv"), "--out", str(out), "--seed", "9"]) == 0
    m = json.loads((out / "report.json").read_text())["manifest"]
    assert m["seed"] == 9 and m["inputs"] == [str(synth / "edges.csv")] and m["out"] == str(out)
    assert m["config"] is None and m["version"]
    final = (out / "final.csv").read_text().splitlines()
    assert final[1] == "rank,tick,score" and len(final) == 2 + 50


def test_config_and_flag_override(synth, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("pipeline:\n  strategy: vertical\n  consensus_set: [inverse_rank, rra]\nevaluation:\n  trials: 0\n")
    out = tmp_path / "ev"
    args = ["evaluate", "--config", str(cfg), "--input", str(synth / "edges.csv"), "--truth", str(synth / "truth.txt")]
    assert main(args + ["--out", str(out)]) == 0
    m = json.loads((out / "eval.json").read_text())["manifest"]
    assert m["options"]["pipeline"]["strategy"]["name"] == "vertical"
    assert m["options"]["trials"] == 0
    assert main(args + ["--out", str(out), "--strategy", "full"]) == 0
    m = json.loads((out / "eval.json").read_text())["manifest"]
    assert m["options"]["pipeline"]["strategy"]["name"] == "full"


def test_bad_config_exit_1(synth, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("pipline:\n  strategy: full\n")
    assert main(["detect", "--config", str(cfg), "--input", str(synth / "edges.csv"), "--out", str(tmp_path / "o")]) == 1


def test_noise_k0_matches_clean_run(synth, tmp_path):
    edges, truth = str(synth / "edges.csv"), str(synth / "truth.txt")
    assert main(["noise", "--input", edges, "--truth", truth, "--out", str(tmp_path / "n"), "--k-max", "0", "--strategy", "full"]) == 0
    rows = [l for l in (tmp_path / "n" / "noise.csv").read_text().splitlines() if not l.startswith("#")]
    assert rows[0] == "strategy,k,mean_ap" and len(rows) == 2
    assert main(["evaluate", "--input", edges, "--truth", truth, "--out", str(tmp_path / "e"), "--trials", "0", "--delay-max", "0", "--strategy", "full"]) == 0
    ap = json.loads((tmp_path / "e" / "eval.json").read_text())["ap_by_delay"]["0"]
    assert float(rows[1].split(",")[2]) == ap
