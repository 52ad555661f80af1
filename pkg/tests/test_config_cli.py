import csv
import json

import numpy as np
import pytest

from sutrack.cli import main, parse_axis
from sutrack.config import ConfigError, RunConfig, load_config, parse_config, parse_overrides
from sutrack.data import read_sequence
from sutrack.tracker import format_results, parse_results

TINY = [
    "--dim", "16", "--depth", "1", "--heads", "2", "--head_hidden", "16", "--task_hidden", "8",
    "--steps", "3", "--batch", "2", "--num_sequences", "5", "--length", "6", "--frame_size", "64",
    "--eval_sequences", "5", "--eval_samples", "10",
]


# --- configuration ---------------------------------------------------------

def test_defaults_match_toy_model():
    cfg = RunConfig()
    m = cfg.model_config()
    assert (m.dim, m.depth, m.patch_size, m.template_size, m.search_size) == (64, 2, 16, 32, 64)
    t = cfg.train_config()
    assert (t.lr_encoder, t.lr_other, t.weight_decay) == (1e-5, 1e-4, 1e-4)
    assert (t.lambda_giou, t.lambda_l1, t.lr_drop_at) == (2.0, 5.0, 0.8)
    assert cfg.tracker_kwargs()["update_interval"] == 25


def test_json_syntax_error_reports_line_and_column():
    with pytest.raises(ConfigError, match=r"^run\.json:3:"):
        parse_config('{\n "dim": 16,\n "depth" 2\n}', "run.json")


def test_unknown_key_reports_its_line():
    with pytest.raises(ConfigError, match=r"run\.json:3: unknown config key 'dimm'"):
        parse_config('{\n "seed": 1,\n "dimm": 16\n}', "run.json")


def test_type_errors():
    with pytest.raises(ConfigError, match="expects an integer"):
        parse_config('{"dim": 16.5}')
    with pytest.raises(ConfigError, match="true/false"):
        parse_config('{"task_loss": 1}')
    with pytest.raises(ConfigError, match="top level"):
        parse_config("[1, 2]")
    # ints are accepted where floats are expected
    assert parse_config('{"window_weight": 1}') == {"window_weight": 1.0}


def test_aliases_and_invalid_values(tmp_path):
    assert parse_config('{"token_type": "hard"}') == {"token_type_mode": "hard"}
    p = tmp_path / "c.json"
    p.write_text('{"fusion": "xor"}')
    with pytest.raises(ConfigError, match="invalid configuration"):
        load_config(p)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")


def test_overrides_last_wins_and_beat_file(tmp_path):
    got = parse_overrides(["--steps", "5", "--steps=7", "--token-type", "none"])
    assert got == {"steps": 7, "token_type_mode": "none"}
    p = tmp_path / "c.json"
    p.write_text('{"steps": 3, "seed": 9}')
    cfg = load_config(p, {"steps": 11})
    assert (cfg.steps, cfg.seed) == (11, 9)
    with pytest.raises(ConfigError, match="missing value"):
        parse_overrides(["--steps"])
    with pytest.raises(ConfigError, match="unexpected"):
        parse_overrides(["steps", "3"])


def test_parse_axis():
    assert parse_axis("token_type=none,hard,soft") == ("token_type_mode", ["none", "hard", "soft"])
    assert parse_axis("window_weight=0,1") == ("window_weight", [0.0, 1.0])
    with pytest.raises(ConfigError):
        parse_axis("steps")
    with pytest.raises(ConfigError):
        parse_axis("nope=1,2")


# --- command line ----------------------------------------------------------

@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen", "--out", str(root / "data"), *TINY]) == 0
    assert main(["train", "--data", str(root / "data"), "--out", str(root / "a.ckpt"), *TINY]) == 0
    return root


def test_gen_writes_sequences(workspace):
    names = sorted(p.name for p in (workspace / "data").iterdir())
    assert names == [f"seq_{i:05d}" for i in range(5)]
    seq = read_sequence(workspace / "data" / "seq_00000")
    assert len(seq) == 6 and seq.frames[0].rgb.shape == (64, 64, 3)


def test_train_outputs_and_bitwise_repeatability(workspace):
    root = workspace
    assert main(["train", "--data", str(root / "data"), "--out", str(root / "b.ckpt"), *TINY]) == 0
    a = (root / "a.ckpt.loss.csv").read_bytes()
    assert a == (root / "b.ckpt.loss.csv").read_bytes()
    assert (root / "a.ckpt").read_bytes() == (root / "b.ckpt").read_bytes()
    rows = list(csv.reader(a.decode().splitlines()))
    assert rows[0] == ["step", "class", "iou", "l1", "task", "total"] and len(rows) == 4
    saved = json.loads((root / "a.ckpt.config.json").read_text())
    assert saved["dim"] == 16 and saved["steps"] == 3


def test_track_then_eval(workspace, capsys):
    root = workspace
    assert main(["track", "--ckpt", str(root / "a.ckpt"), "--data", str(root / "data"), "--out", str(root / "pred")]) == 0
    boxes, conf = parse_results((root / "pred" / "seq_00000.txt").read_text())
    gt = read_sequence(root / "data" / "seq_00000").boxes
    assert boxes.shape == (6, 4) and np.array_equal(boxes[0], gt[0]) and conf[0] == 1.0
    assert main(["eval", "--pred", str(root / "pred"), "--data", str(root / "data")]) == 0
    result = json.loads((root / "pred" / "metrics.json").read_text())
    assert set(result["overall"]) == {"success_auc", "precision", "mean_iou"}
    assert len(result["sequences"]) == 5
    assert "success_auc" in capsys.readouterr().out


def test_eval_of_ground_truth_is_perfect(workspace, tmp_path):
    for name in sorted(p.name for p in (workspace / "data").iterdir()):
        gt = read_sequence(workspace / "data" / name).boxes.astype(float)
        (tmp_path / f"{name}.txt").write_text(format_results(gt, np.ones(len(gt))))
    out = tmp_path / "m.json"
    assert main(["eval", "--pred", str(tmp_path), "--data", str(workspace / "data"), "--out", str(out)]) == 0
    overall = json.loads(out.read_text())["overall"]
    assert overall["precision"] == 1.0 and overall["mean_iou"] == 1.0
    assert overall["success_auc"] == pytest.approx(20 / 21)


def test_ablate_token_type_axis(tmp_path):
    out = tmp_path / "abl.csv"
    assert main(["ablate", "--axis", "token_type=none,hard,soft", "--out", str(out), *TINY]) == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert [r["token_type_mode"] for r in rows] == ["none", "hard", "soft"]
    assert list(rows[0]) == [
        "token_type_mode", "final_loss", "task_accuracy", "task_ce", "success_auc", "precision", "mean_iou"
    ]


def test_errors_exit_nonzero(workspace, tmp_path, capsys):
    assert main(["track", "--ckpt", str(tmp_path / "none.ckpt"), "--data", str(workspace / "data"), "--out", str(tmp_path)]) == 1
    assert "checkpoint not found" in capsys.readouterr().err
    assert main(["gen", "--out", str(tmp_path / "d"), "--bogus", "1"]) == 1
    assert "unknown config key 'bogus'" in capsys.readouterr().err
    assert main(["eval", "--pred", str(tmp_path), "--data", str(workspace / "data")]) == 1
    assert "missing result file" in capsys.readouterr().err
    assert main(["train", "--data", str(tmp_path / "empty"), "--out", str(tmp_path / "x.ckpt")]) == 1
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"junk")
    assert main(["track", "--ckpt", str(bad), "--data", str(workspace / "data"), "--out", str(tmp_path)]) == 1


def test_thread_limit_env(workspace, tmp_path, monkeypatch):
    monkeypatch.setenv("SUTRACK_THREADS", "zero")
    assert main(["gen", "--out", str(tmp_path / "d"), *TINY]) == 1
    monkeypatch.setenv("SUTRACK_THREADS", "1")
    assert main(["gen", "--out", str(tmp_path / "d"), *TINY]) == 0


def test_missing_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
