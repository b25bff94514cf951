import json

import numpy as np
import pytest

from parapush.cli import main
from parapush.neural_net import load_model


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_gen_data_is_byte_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    code1, out1, _ = run(["gen-data", "--samples", "60", "--seed", "3",
                          "--out", str(a), "--workers", "1"], capsys)
    code2, out2, _ = run(["gen-data", "--samples", "60", "--seed", "3",
                          "--out", str(b), "--workers", "2"], capsys)
    assert code1 == 0 and code2 == 0
    assert a.read_bytes() == b.read_bytes()
    assert "contact rate" in out1


def test_gen_data_active_semantics(tmp_path, capsys):
    path = tmp_path / "d.csv"
    code, _, _ = run(["gen-data", "--samples", "10", "--sliders", "4",
                      "--active", "2", "--seed", "1", "--out", str(path),
                      "--workers", "1"], capsys)
    assert code == 0
    lines = path.read_text().strip().split("\n")
    header = lines[1].split(",")
    s3x = header.index("s3x")
    rows = [line.split(",") for line in lines[2:]]
    parked = {(float(r[s3x]), float(r[s3x + 1])) for r in rows}
    assert parked == {(-0.52, -0.52)}  # slider 4 pinned to its parking slot


def test_train_single_epoch_yields_loadable_weights(tmp_path, capsys):
    data = tmp_path / "d.csv"
    run(["gen-data", "--samples", "80", "--seed", "2", "--out", str(data),
         "--workers", "1"], capsys)
    weights = tmp_path / "w.json"
    losses = tmp_path / "l.csv"
    code, out, _ = run(["train", "--data", str(data), "--epochs", "1",
                        "--batch-size", "32", "--hidden", "16,8",
                        "--out", str(weights), "--loss-out", str(losses),
                        "--seed", "5"], capsys)
    assert code == 0
    model = load_model(weights)
    assert model.input_dim == 30 and model.output_dim == 24
    assert losses.read_text().startswith("# config:")
    doc = json.loads(weights.read_text())
    assert set(doc) >= {"input_dim", "output_dim", "normalization", "layers"}
    assert doc["layers"][0]["rows"] == 16 and doc["layers"][-1]["activation"] == "linear"


def test_convergence_analytical_single_slider(tmp_path, capsys):
    out = tmp_path / "conv.csv"
    code, stdout, _ = run(["convergence", "--scenes", "2", "--actions", "4",
                           "--coarse", "analytical", "--sliders", "1",
                           "--seed", "9", "--out", str(out), "--workers", "1"],
                          capsys)
    assert code == 0
    assert "median total RMS" in stdout
    lines = out.read_text().strip().split("\n")
    assert lines[1] == "scene_id,iteration,slider_index,rms_m,wall_clock_s"
    # exact zero at k = 4 shows up in the summary
    assert "k=4: 0.000e+00" in stdout


def test_convergence_analytical_refuses_multiple_active(tmp_path, capsys):
    code, _, err = run(["convergence", "--scenes", "1", "--coarse", "analytical",
                        "--sliders", "4", "--seed", "1",
                        "--out", str(tmp_path / "x.csv"), "--workers", "1"], capsys)
    assert code == 1
    assert "single active slider" in err


def test_convergence_learned_requires_weights(tmp_path, capsys):
    code, _, err = run(["convergence", "--scenes", "1", "--coarse", "learned",
                        "--sliders", "4", "--out", str(tmp_path / "x.csv"),
                        "--workers", "1"], capsys)
    assert code == 1
    assert "--weights" in err


def test_mpc_smoke_with_analytical_predictor(tmp_path, capsys):
    out = tmp_path / "ep.jsonl"
    code, stdout, _ = run(["mpc", "--episodes", "1", "--predictor", "analytical",
                           "--max-steps", "2", "--candidates", "4", "--rounds", "1",
                           "--elites", "2", "--seed", "4", "--out", str(out),
                           "--workers", "1"], capsys)
    assert code == 0
    assert "success rate:" in stdout
    lines = out.read_text().strip().split("\n")
    meta = json.loads(lines[0])
    assert meta["type"] == "meta" and meta["predictor"] == "analytical"
    if len(lines) > 1:
        rec = json.loads(lines[1])
        assert len(rec["state"]) == 28


def test_unknown_subcommand_is_usage_error(capsys):
    code, _, _ = run(["frobnicate"], capsys)
    assert code == 1


def test_missing_dataset_is_runtime_error(tmp_path, capsys):
    code, _, err = run(["train", "--data", str(tmp_path / "nope.csv")], capsys)
    assert code == 2
    assert "error" in err.lower()


def test_config_file_supplies_defaults_and_flags_win(tmp_path, capsys):
    config = tmp_path / "run.toml"
    config.write_text('[gen_data]\nsamples = 7\nseed = 12\n')
    out = tmp_path / "d.csv"
    code, stdout, _ = run(["gen-data", "--config", str(config), "--out", str(out),
                           "--workers", "1"], capsys)
    assert code == 0
    assert "wrote 7 samples" in stdout

    out2 = tmp_path / "d2.csv"
    code, stdout, _ = run(["gen-data", "--config", str(config), "--samples", "5",
                           "--out", str(out2), "--workers", "1"], capsys)
    assert code == 0
    assert "wrote 5 samples" in stdout  # explicit flag beats the config value


def test_config_rejects_unknown_keys(tmp_path, capsys):
    config = tmp_path / "bad.toml"
    config.write_text('[gen_data]\nbogus_key = 1\n')
    code, _, _ = run(["gen-data", "--config", str(config), "--workers", "1"],
                     capsys)
    assert code == 1
