import json

import pytest

from bols_edgeworth.cli import load_config, main
from bols_edgeworth.errors import ConfigError


def test_normal_command(tmp_path, capsys):
    assert main(["normal", "--config", "table1_gamma", "--alphas", "0.025,0.975", "--out", str(tmp_path), "--format", "csv"]) == 0
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines[0] == "method,alpha,quantile,stderr"
    assert lines[1] == "normal,0.025,-1.959964,0.000000"
    assert lines[2] == "normal,0.975,1.959964,0.000000"
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seed"] == 20240101 and len(man["config_digest"]) == 64
    assert "Normal approximation | -1.96 | 1.96" in (tmp_path / "table.md").read_text()


def test_normal_row_of_gamma_table(tmp_path):
    main(["normal", "--config", "table1_gamma", "--out", str(tmp_path)])
    md = (tmp_path / "table.md").read_text()
    assert "| Normal approximation | -1.96 | -1.64 | 1.64 | 1.96 |" in md


def test_missing_noise_key(tmp_path, capsys):
    cfg = {"stages": 2, "n": [50, 50], "stage1_probs": [0.5, 0.5], "stage2_policy": {"type": "eps_greedy", "clip": 0.2}}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert main(["normal", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "noise" in capsys.readouterr().err
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert exc.value.keys == ("noise",)


def test_infeasible_design(tmp_path, capsys):
    cfg = json.loads(json.dumps(load_config("table2_normal").to_dict()))
    cfg["n"] = [8, 50]
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(cfg))
    assert main(["normal", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "batch size 8" in capsys.readouterr().err


def test_overrides():
    cfg = load_config("table3_mixture", seed=5, reps=1000, is_draws=2000, alphas=[0.1])
    assert (cfg.seed, cfg.mc_reps, cfg.is_draws, cfg.alphas) == (5, 1000, 2000, (0.1,))


def test_small_table_deterministic(tmp_path):
    args = ["table", "--config", "table1_gamma", "--reps", "20000", "--is-draws", "5000"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b"), "--workers", "3"])
    a = (tmp_path / "a" / "results.csv").read_bytes()
    assert a == (tmp_path / "b" / "results.csv").read_bytes()
    assert len(a.splitlines()) == 13
