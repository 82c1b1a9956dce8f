import json
import subprocess
import sys
from pathlib import Path

import pytest

from minimtl.cli import main

SMALL_CONFIG = {
    "epochs": 2,
    "num_layers": 2,
    "hidden_dim": 16,
    "ffn_dim": 24,
    "max_len": 24,
    "tap_top_k": 2,
    "proj_dim": 16,
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli")
    cfg = path / "small.json"
    cfg.write_text(json.dumps(SMALL_CONFIG))
    return path


@pytest.fixture(scope="module")
def trained(workdir):
    """One shared (data, checkpoint) pair for the read-only command tests."""
    data = _synth(workdir, "shared.jsonl")
    ckpt = _train(workdir, data, name="shared_ckpt.json")
    return data, ckpt


def _run(args):
    return main([str(a) for a in args])


def _synth(workdir, name="d.jsonl", n=120, seed=7):
    out = workdir / name
    assert _run(["synth", "--n", n, "--seed", seed, "--out", out]) == 0
    return out


def test_synth_deterministic_bytes(workdir):
    a = _synth(workdir, "a.jsonl")
    b = _synth(workdir, "b.jsonl")
    assert a.read_bytes() == b.read_bytes()


def test_synth_refuses_overwrite_without_force(workdir, capsys):
    path = _synth(workdir)
    assert _run(["synth", "--n", "10", "--seed", "0", "--out", path]) == 2
    assert "exists" in capsys.readouterr().err
    assert _run(["synth", "--n", "10", "--seed", "0", "--out", path, "--force"]) == 0


def test_synth_rejects_zero_n(workdir):
    with pytest.raises(SystemExit) as err:
        _run(["synth", "--n", "0", "--seed", "1", "--out", workdir / "x.jsonl"])
    assert err.value.code == 64


def test_usage_error_exit_code_for_unknown_flag():
    with pytest.raises(SystemExit) as err:
        _run(["synth", "--frequency", "3"])
    assert err.value.code == 64


def _train(workdir, data, strategy="cotask", seed=3, name="m.json"):
    ckpt = workdir / name
    code = _run(["train", "--data", data, "--strategy", strategy,
                 "--config", workdir / "small.json", "--seed", seed,
                 "--out-checkpoint", ckpt])
    assert code == 0
    return ckpt


def test_train_writes_checkpoint_and_log(workdir, trained, capsys):
    data, _ = trained
    ckpt = _train(workdir, data, name="fresh_ckpt.json")
    out = capsys.readouterr().out
    summary = json.loads(out.strip().splitlines()[-1])
    assert set(summary) >= {"final_train_loss", "dev_weighted_f1", "threshold"}
    assert ckpt.exists()
    log = ckpt.with_suffix(".log.jsonl")
    records = [json.loads(line) for line in log.read_text().splitlines()]
    assert len(records) == SMALL_CONFIG["epochs"]
    assert set(records[0]) == {"epoch", "train_loss", "dev_weighted_f1", "threshold"}


def test_train_rerun_same_seed_identical_summary(workdir, trained, capsys):
    data, _ = trained
    capsys.readouterr()
    _train(workdir, data, seed=9, name="rerun_a.json")
    first = capsys.readouterr().out.strip().splitlines()[-1]
    _train(workdir, data, seed=9, name="rerun_b.json")
    second = capsys.readouterr().out.strip().splitlines()[-1]
    assert json.loads(first)["final_train_loss"] == json.loads(second)["final_train_loss"]
    assert json.loads(first)["dev_weighted_f1"] == json.loads(second)["dev_weighted_f1"]


def test_train_defaults_recorded_in_checkpoint(workdir, trained):
    data, _ = trained
    ckpt_path = workdir / "defaults.json"
    # epochs must stay tiny for test speed; everything else left at defaults
    code = _run(["train", "--data", data, "--strategy", "stl", "--epochs", "1",
                 "--out-checkpoint", ckpt_path])
    assert code == 0
    doc = json.loads(ckpt_path.read_text())
    tc = doc["train_config"]
    assert tc["batch_size"] == 32
    assert tc["learning_rate"] == 0.0001
    assert tc["dropout_p"] == 0.5
    assert tc["loss_weight_primary"] == 0.7
    assert tc["loss_weight_aux"] == 0.3
    assert doc["model_config"]["proj_dim"] == 256
    assert doc["model_config"]["encoder"]["tap_top_k"] == 3
    names = {p["name"] for p in doc["parameters"]}
    assert "task_factors" not in names and "layer_factors" not in names


def test_eval_emits_schema_conformant_json(trained, capsys):
    data, ckpt = trained
    capsys.readouterr()
    assert _run(["eval", "--checkpoint", ckpt, "--data", data, "--split", "test"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload) == {"per_class", "weighted", "micro", "threshold", "split", "aux"}
    assert set(payload["weighted"]) == {"precision", "recall", "f1"}
    assert len(payload["per_class"]) == 9
    assert set(payload["aux"]) == {"per_class", "weighted", "micro"}
    assert len(payload["aux"]["per_class"]) == 3


def test_eval_missing_checkpoint_is_io_error(workdir, trained):
    data, _ = trained
    assert _run(["eval", "--checkpoint", workdir / "nope.json", "--data", data]) == 2


def test_predict_output_contract(trained, capsys):
    data, ckpt = trained
    capsys.readouterr()
    assert _run(["predict", "--checkpoint", ckpt, "--text", "so sleepless again tonight"]) == 0
    payload = json.loads(capsys.readouterr().out)
    primary = payload["primary"]["probabilities"]
    assert len(primary) == 9
    assert all(0.0 < v < 1.0 for v in primary.values())
    assert len(payload["aux"]["probabilities"]) == 3
    assert list(primary) == [
        "Lack of Interest", "Feeling Down", "Sleeping Disorder", "Lack of Energy",
        "Eating Disorder", "Low Self-Esteem", "Concentration Problem",
        "Hyper/Lower Activity", "Self-Harm"]


def test_predict_rejects_empty_text(trained):
    data, ckpt = trained
    with pytest.raises(SystemExit) as err:
        _run(["predict", "--checkpoint", ckpt, "--text", "   "])
    assert err.value.code == 64


def test_predict_matches_before_and_after_round_trip(trained, capsys):
    data, ckpt = trained
    capsys.readouterr()
    _run(["predict", "--checkpoint", ckpt, "--text", "a storm of insomnia again"])
    first = capsys.readouterr().out
    _run(["predict", "--checkpoint", ckpt, "--text", "a storm of insomnia again"])
    assert capsys.readouterr().out == first


def test_gradcheck_single_strategy(capsys):
    # the full four-strategy sweep runs in the acceptance suite
    assert _run(["gradcheck", "--seed", "1", "--strategy", "cotask"]) == 0
    assert "co_task_aware: pass" in capsys.readouterr().out


def test_compare_row_contract(workdir, trained, capsys):
    data, _ = trained
    out_json = workdir / "cmp.json"
    code = _run(["compare", "--data", data, "--seeds", "1",
                 "--strategies", "stl", "hard", "--config", workdir / "small.json",
                 "--out", out_json])
    assert code == 0
    rows = json.loads(out_json.read_text())
    keys = {(r["strategy"], r["task"]) for r in rows}
    assert keys == {("single_task", "primary"), ("single_task", "aux"),
                    ("hard_shared", "primary"), ("hard_shared", "aux")}
    assert all(r["seeds"] == 1 and r["iqr"] == 0.0 for r in rows)


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "minimtl", "gradcheck",
                           "--strategy", "stl"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "single_task: pass" in proc.stdout
