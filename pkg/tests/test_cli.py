from __future__ import annotations

import json

import pytest

from shopbench.cli import main
from shopbench.eval_harness import read_report
from shopbench.session_model import read_sessions
from shopbench.shopsim import read_catalog


@pytest.fixture()
def workdir(tmp_path):
    return tmp_path / "run"


def run(argv) -> int:
    return main([str(a) for a in argv])


def test_gen_catalog_writes_the_requested_count(tmp_path):
    out = tmp_path / "catalog.jsonl"
    assert run(["gen-catalog", "--seed", 5, "--n", 37, "--out", out]) == 0
    catalog = read_catalog(out)
    assert len(catalog.products) == 37
    assert catalog.seed == 5


def test_gen_sessions_requires_an_existing_catalog(tmp_path, capsys):
    rc = run(["gen-sessions", "--catalog", tmp_path / "nope.jsonl", "--out", tmp_path / "s.jsonl"])
    assert rc == 2
    assert "--catalog" in capsys.readouterr().err


def test_gen_sessions_honors_flags_over_defaults(tmp_path):
    cat = tmp_path / "catalog.jsonl"
    out = tmp_path / "sessions.jsonl"
    run(["gen-catalog", "--seed", 5, "--n", 120, "--out", cat])
    assert run(["gen-sessions", "--catalog", cat, "--seed", 1, "--n", 40, "--out", out,
                "--typo-prob", 0.0]) == 0
    sessions = read_sessions(out)
    assert len(sessions) == 40


def test_config_file_feeds_oracle_settings(tmp_path):
    cat = tmp_path / "catalog.jsonl"
    out = tmp_path / "sessions.jsonl"
    cfg = tmp_path / "oracle.json"
    run(["gen-catalog", "--seed", 5, "--n", 120, "--out", cat])
    cfg.write_text(json.dumps({"purchase_rate": 1.0}), encoding="utf-8")
    assert run(["gen-sessions", "--catalog", cat, "--seed", 1, "--n", 12, "--out", out,
                "--config", cfg]) == 0
    sessions = read_sessions(out)
    assert all(s.steps[-1].action.target_name == "product_page.buy_now" for s in sessions)


def test_full_pipeline_replay_reaches_perfect_scores(workdir, capsys):
    assert run(["pipeline", "--workdir", workdir, "--seed", 13,
                "--n-sessions", 30, "--n-products", 120]) == 0
    report = read_report(workdir / "report.json")
    assert report.macro_accuracy == 1.0
    assert report.outcome_f1 == 1.0
    capsys.readouterr()
    # rerun: all stages skip
    assert run(["pipeline", "--workdir", workdir, "--seed", 13,
                "--n-sessions", 30, "--n-products", 120]) == 0
    out = capsys.readouterr().out
    assert out.count("skipping") == 4


def test_synthesize_and_export_training(workdir, capsys):
    assert run(["pipeline", "--workdir", workdir, "--seed", 2,
                "--n-sessions", 12, "--n-products", 120]) == 0
    train = workdir / "train.jsonl"
    assert run(["export-training", "--in", workdir / "reasoned.jsonl", "--out", train]) == 0
    out = capsys.readouterr().out
    masked = int(out.split("masked characters (context): ")[1].split("\n")[0])
    trained = int(out.split("trained characters (reasoning+action): ")[1].split("\n")[0])
    lines = train.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 12
    total = sum(len(seg["text"]) for line in lines for seg in json.loads(line)["segments"])
    assert masked + trained == total


def test_export_training_rejects_missing_reasoning(workdir, capsys):
    assert run(["pipeline", "--workdir", workdir, "--seed", 2,
                "--n-sessions", 5, "--n-products", 120]) == 0
    rc = run(["export-training", "--in", workdir / "sessions.jsonl", "--out", workdir / "t.jsonl"])
    assert rc == 2
    assert "without reasoning" in capsys.readouterr().err


def test_evaluate_and_report_commands(workdir, capsys):
    assert run(["pipeline", "--workdir", workdir, "--seed", 4,
                "--n-sessions", 25, "--n-products", 120]) == 0
    random_report = workdir / "random.json"
    assert run(["evaluate", "--agent", "random", "--dataset", workdir / "reasoned.jsonl",
                "--out", random_report]) == 0
    capsys.readouterr()
    assert run(["report", "--a", workdir / "report.json", "--b", random_report,
                "--mcnemar"]) == 0
    out = capsys.readouterr().out
    assert "step-level McNemar p" in out
    assert (workdir / "random.json.steps.jsonl").exists()


def test_report_on_a_single_run_prints_the_summary(workdir, capsys):
    assert run(["pipeline", "--workdir", workdir, "--seed", 9,
                "--n-sessions", 10, "--n-products", 120]) == 0
    capsys.readouterr()
    assert run(["report", "--a", workdir / "report.json"]) == 0
    out = capsys.readouterr().out
    assert "Generated Next Action" in out and "Session Outcome" in out


def test_endpoint_agent_requires_endpoint_and_model(workdir, capsys):
    assert run(["pipeline", "--workdir", workdir, "--seed", 4,
                "--n-sessions", 5, "--n-products", 120]) == 0
    rc = run(["evaluate", "--agent", "endpoint", "--dataset", workdir / "reasoned.jsonl",
              "--out", workdir / "e.json"])
    assert rc == 2
    assert "--endpoint" in capsys.readouterr().err


def test_synthesize_reasoning_command_with_stub(workdir):
    assert run(["pipeline", "--workdir", workdir, "--seed", 6,
                "--n-sessions", 8, "--n-products", 120]) == 0
    out = workdir / "re2.jsonl"
    assert run(["synthesize-reasoning", "--in", workdir / "sessions.jsonl", "--out", out,
                "--stub", "--cache-dir", workdir / "cache"]) == 0
    sessions = read_sessions(out)
    assert all(step.reasoning for s in sessions for step in s.steps)
    meta = json.loads((workdir / "re2.jsonl.meta.json").read_text(encoding="utf-8"))
    assert meta["reasoning"] == "synthetic"
