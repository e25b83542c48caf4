import json
import subprocess
import sys

import pytest

from followback.cli import main


def _corpus_args(corpus_dir):
    return ["--corpus", str(corpus_dir)]


def test_exit_codes(corpus_dir, tmp_path, capsys):
    assert main(["communities", *_corpus_args(corpus_dir), "--out", str(tmp_path / "a")]) == 0
    assert main(["train", "--model", "svm"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["report", str(tmp_path / "a" / "partition.json"), "--format", "yaml"]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[nowhere]\nx = 1\n")
    assert main(["ingest", "--config", str(bad)]) == 2
    assert main(["ingest", "--corpus", str(tmp_path / "empty"), "--out", str(tmp_path / "b")]) == 3
    err = capsys.readouterr().err
    assert "empty" in err and "accounts.jsonl" in err
    assert main(["features", *_corpus_args(corpus_dir), "--out", str(tmp_path / "a")]) == 0
    code = main(["train", *_corpus_args(corpus_dir), "--out", str(tmp_path / "a"), "--split", "random",
                 "--test-positives", "1000000"])
    assert code == 4
    assert "train" in capsys.readouterr().err


def test_stages_flag_limits_outputs(corpus_dir, tmp_path):
    out = tmp_path / "o"
    assert main(["run", *_corpus_args(corpus_dir), "--out", str(out), "--stages", "communities"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["partition.json"]
    assert main(["run", *_corpus_args(corpus_dir), "--out", str(out), "--stages", "communities,bogus"]) == 2


def test_config_file_with_flag_override(corpus_dir, tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text(f"[corpus]\naccounts = {corpus_dir / 'accounts.jsonl'}\nedges = {corpus_dir / 'edges.csv'}\n"
                   f"[run]\noutput = {tmp_path / 'from_ini'}\n[communities]\nmin_size = 100\n")
    assert main(["communities", "--config", str(ini), "--min-size", "5000"]) == 0
    part = json.loads((tmp_path / "from_ini" / "partition.json").read_text())
    # every detected group is smaller than 5000, so all members are pooled into None
    assert len(part["communities"]) == 1


def test_report_formats(full_run, capsys):
    summary = str(full_run / "summary.json")
    assert main(["report", summary, "--format", "markdown"]) == 0
    assert capsys.readouterr().out.count("## ") == 3
    assert main(["report", summary, "--format", "csv", "--table", "communities"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert len(rows) == 14
    assert main(["report", summary, "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["modularity"] > 0


def test_evaluate_report_copy(full_run, corpus_dir, tmp_path):
    target = tmp_path / "eval.json"
    assert main(["evaluate", *_corpus_args(corpus_dir), "--out", str(full_run), "--report", str(target)]) == 0
    assert json.loads(target.read_text())["model"] == "forest"


def test_synth_and_honeypot_commands(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"communities": [
        {"size": 40, "follow_back_ratio": 0.5, "automation_ratio": 0.5, "intra_mutual_prob": 0.3,
         "inter_edge_prob": 0.01, "name": "A"}], "background_accounts": 60}))
    assert main(["synth", "--spec", str(spec), "--seed", "3", "--out", str(tmp_path / "w")]) == 0
    capsys.readouterr()
    assert (tmp_path / "w" / "planted.json").exists()
    assert main(["honeypot-sim", "--strategy", "random", "--budget", "50", "--world", str(tmp_path / "w"),
                 "--out", str(tmp_path / "h")]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["stages"][0]["follows"] == 50 and result["max_follows_per_day"] <= 400
    assert (tmp_path / "h" / "follow_log.jsonl").exists()
    assert main(["honeypot-sim", "--strategy", "teleport", "--budget", "5"]) == 2
    assert main(["honeypot-sim", "--strategy", "random", "--world", str(tmp_path / "w")]) == 2
    assert main(["honeypot-sim", "--strategy", "random", "--budget", "5", "--world", str(tmp_path)]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([{"size": 5, "follow_back_ratio": 0.5, "automation_ratio": 0.1,
                                "intra_mutual_prob": 0.01, "inter_edge_prob": 0.1}]))
    assert main(["synth", "--spec", str(bad), "--out", str(tmp_path / "x")]) == 2


@pytest.mark.slow
def test_stages_in_separate_processes_match_single_run(full_run, corpus_dir, tmp_path):
    out = tmp_path / "split"
    for stage in ("ingest", "communities", "characterize", "coordination", "abuse", "features", "train",
                  "evaluate"):
        proc = subprocess.run([sys.executable, "-m", "followback.cli", stage, *_corpus_args(corpus_dir),
                               "--out", str(out)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "followback.cli", "run", *_corpus_args(corpus_dir),
                           "--out", str(out), "--stages", "summary"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "summary.json").read_bytes() == (full_run / "summary.json").read_bytes()
