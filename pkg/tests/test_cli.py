import json
import os
import subprocess
import sys

import pytest

from supportrefine.cli import EXIT_CONFIG, EXIT_MISSING, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, run
from supportrefine.config import load_config, ConfigError

FAST = ["corpus.n_conversations=30", "model.embedding_dim=16", "model.layer_count=1", "model.head_count=2",
        "model.max_sequence_len=48", "model.feedforward_dim=16", "train.epochs=2", "train.lr=0.003",
        "decode.max_len=6", "eval.resamples=1000", "coherence.n_base_pairs=5"]


def args(workdir, command, *extra):
    out = [command, "--seed", "1", "--set", f"run.workdir={workdir}"]
    for s in FAST:
        out += ["--set", s]
    return out + list(extra)


def last_json(text):
    return json.loads(text.strip().splitlines()[-1])


def test_unknown_command_is_usage_error(capsys):
    assert run(["trian-base"]) == EXIT_USAGE
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == EXIT_USAGE and err["error"] == "usage"


def test_usage_error_via_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "supportrefine", "trian-base"], capture_output=True, text=True)
    assert p.returncode == EXIT_USAGE
    assert json.loads(p.stderr.strip().splitlines()[-1])["exit_code"] == EXIT_USAGE


def test_config_errors(tmp_path, capsys):
    assert run(["sample", "--set", "decode.K=abc"]) == EXIT_CONFIG
    assert run(["sample", "--set", "nosuch.key=1"]) == EXIT_CONFIG
    bad = tmp_path / "bad.ini"
    bad.write_text("[mystery]\nx = 1\n")
    assert run(["sample", "--config", str(bad)]) == EXIT_CONFIG
    assert run(["sample", "--config", str(tmp_path / "absent.ini")]) == EXIT_MISSING


def test_missing_inputs(tmp_path, capsys):
    assert run(args(tmp_path, "sample")) == EXIT_MISSING
    assert json.loads(capsys.readouterr().err.strip())["error"] == "input-missing"
    assert run(args(tmp_path, "train-base", "--set", "corpus.source=file",
                    "--set", f"corpus.path={tmp_path / 'none.jsonl'}")) == EXIT_MISSING


def test_dry_run_has_no_side_effects(tmp_path, capsys):
    work = tmp_path / "w"
    assert run(args(work, "train-base", "--dry-run")) == EXIT_OK
    out = last_json(capsys.readouterr().out)
    assert out["dry_run"] and out["config"]["seed"] == 1
    assert not work.exists()


def test_lock_rejects_concurrent_runs(tmp_path, capsys):
    (tmp_path / ".lock").write_text("123")
    assert run(args(tmp_path, "train-base")) == EXIT_RUNTIME
    assert json.loads(capsys.readouterr().err.strip())["error"] == "locked"


def test_config_file_and_precedence(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nseed = 5\n\n[hyperparams]\nlambda_margin = 0.05\n\n[decode]\nK = 4\ngroup_count = 4\n")
    cfg = load_config(str(ini), ["hyperparams.lambda_margin=0.02"], seed=9)
    assert cfg.seed == 9 and cfg.hyperparams.seed == 9 and cfg.split.seed == 9
    assert cfg.hyperparams.lambda_margin == 0.02 and cfg.decode.K == 4
    with pytest.raises(ConfigError):
        load_config(None, ["judge.kind=remote"])


def test_secrets_never_come_from_config():
    with pytest.raises(ConfigError):
        load_config(None, ["judge.api_key=abc"])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    work = tmp_path_factory.mktemp("run")
    for cmd in ("train-base", "sample", "annotate", "refine", "evaluate", "synthesize-coherence"):
        assert run(args(work, cmd)) == EXIT_OK, cmd
    return work


def test_happy_path_artifacts(pipeline):
    names = ["corpus.jsonl", "tokenizer.json", "base.ckpt", "candidates.jsonl", "feedback.jsonl", "refined.ckpt",
             "refine_report.json", "loss_log.jsonl", "eval_report.json", "eval_report.txt", "coherence.jsonl"]
    for n in names:
        assert (pipeline / n).stat().st_size > 0, n
    report = json.loads((pipeline / "refine_report.json").read_text())
    assert report["config"]["seed"] == 1 and report["report"]["steps"] > 0
    ev = json.loads((pipeline / "eval_report.json").read_text())
    assert set(ev["metrics"]) == {"base", "refined"} and ev["config"]["seed"] == 1
    assert not (pipeline / ".lock").exists()


def test_rerun_is_idempotent(pipeline, capsys):
    before = {p.name: p.read_bytes() for p in pipeline.iterdir() if p.is_file()}
    for cmd in ("sample", "annotate", "refine", "evaluate"):
        assert run(args(pipeline, cmd)) == EXIT_OK
        assert last_json(capsys.readouterr().out)["status"] == "up-to-date"
    assert {p.name: p.read_bytes() for p in pipeline.iterdir() if p.is_file()} == before


def test_forced_evaluate_is_byte_identical(pipeline):
    before = (pipeline / "eval_report.json").read_bytes()
    assert run(args(pipeline, "evaluate", "--force")) == EXIT_OK
    assert (pipeline / "eval_report.json").read_bytes() == before


def test_upstream_change_invalidates_stamp(pipeline, capsys):
    assert run(args(pipeline, "evaluate")) == EXIT_OK
    capsys.readouterr()
    # a new refined checkpoint (different refine seed) must trigger re-evaluation
    assert run(args(pipeline, "refine", "--set", "hyperparams.seed=7")) == EXIT_OK
    capsys.readouterr()
    assert run(args(pipeline, "evaluate")) == EXIT_OK
    assert last_json(capsys.readouterr().out)["status"] == "ok"


def test_report_command_prints_tables(pipeline, capsys):
    assert run(args(pipeline, "report")) == EXIT_OK
    assert "Helpful responses" in capsys.readouterr().out
