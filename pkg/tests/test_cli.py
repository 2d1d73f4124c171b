"""CLI subcommands, config handling, CSV schema, determinism."""

import math
import os
import subprocess
import sys

import pytest

from tailent.cli import ExperimentConfig, load_config, main


def run_cli(args, tmp_path, name="out.csv", env=None):
    out = tmp_path / name
    code = main(list(args) + ["--out", str(out)])
    text = out.read_text() if out.exists() else ""
    return code, text


def parse_csv(text):
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
    return header, rows


def test_unknown_map_spec_exits_2(tmp_path, capsys):
    code = main(["entropy", "--map", "henon:1.4", "--out",
                 str(tmp_path / "x.csv")])
    assert code == 2
    assert "map" in capsys.readouterr().err


def test_bad_schedule_exits_2(tmp_path, capsys):
    code = main(["tail", "--eps-ratio", "1.5", "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert "eps-ratio" in capsys.readouterr().err


def test_numeric_error_exits_3(tmp_path, capsys):
    code = main(["entropy", "--map", "tent", "--eps-start", "1e-6",
                 "--eps-count", "1", "--grid-bits", "10",
                 "--out", str(tmp_path / "x.csv")])
    assert code == 3
    assert "grid" in capsys.readouterr().err


def test_entropy_identity_all_rates_zero(tmp_path):
    code, text = run_cli(["entropy", "--map", "identity", "--eps-count", "2",
                          "--n-max", "6", "--grid-bits", "10"], tmp_path)
    assert code == 0
    header, rows = parse_csv(text)
    assert header[:2] == ["schema", "config"]
    assert rows and all(float(r["slope"]) == 0.0 for r in rows)
    assert all(r["schema"] == "1" for r in rows)


def test_tail_tent_rows_and_bound_columns(tmp_path):
    code, text = run_cli(["tail", "--map", "tent", "--eps-start", "0.125",
                          "--eps-count", "6", "--n-max", "12"], tmp_path)
    assert code == 0
    header, rows = parse_csv(text)
    assert len(rows) == 6
    for r in rows:
        eps = float(r["eps"])
        assert float(r["bound_log2"]) == pytest.approx(
            math.log(2) / abs(math.log(eps)))
        assert float(r["bound_log4"]) == pytest.approx(
            math.log(4) / abs(math.log(eps)))


def test_sft_sweep_reference_column(tmp_path):
    code, text = run_cli(["sft", "--p-min", "3", "--p-max", "10"], tmp_path)
    assert code == 0
    _, rows = parse_csv(text)
    assert len(rows) == 8
    for r in rows:
        p = int(r["p"])
        assert float(r["reference"]) == pytest.approx(math.log(2 ** p - 1) / p)
        assert abs(float(r["entropy"]) - float(r["reference"])) <= 2.0 ** (1 - p)


def test_snake_thickness_weights_bounds_smoke(tmp_path):
    assert run_cli(["snake", "--eps-start", "0.1", "--eps-count", "2"],
                   tmp_path, "s.csv")[0] == 0
    code, text = run_cli(["thickness", "--cantor", "remove-middle 1/3 depth 8"],
                         tmp_path, "t.csv")
    assert code == 0 and "1.0" in text
    assert run_cli(["weights", "--weight", "kpow2", "--k-max", "10"],
                   tmp_path, "w.csv")[0] == 0
    assert run_cli(["bounds", "--map", "quadratic:4.0", "--eps-count", "3"],
                   tmp_path, "b.csv")[0] == 0


def test_modulus_smoke(tmp_path):
    code, text = run_cli(["modulus", "--map", "identity", "--eps-start", "0.1",
                          "--eps-count", "1", "--grid-bits", "10"], tmp_path)
    assert code == 0
    _, rows = parse_csv(text)
    assert int(rows[0]["p_eps"]) >= 1


def test_determinism_across_threads(tmp_path):
    texts = []
    for threads in ("1", "3"):
        _, text = run_cli(["tail", "--map", "tent", "--eps-count", "2",
                           "--n-max", "10", "--threads", threads],
                          tmp_path, f"d{threads}.csv")
        texts.append(text)
    assert texts[0] == texts[1]


def test_config_file_and_flag_override(tmp_path):
    cfg_file = tmp_path / "exp.cfg"
    cfg_file.write_text("map_spec = identity\neps-count = 2\nn_max = 5\n")
    cfg = load_config("entropy", str(cfg_file), {"n_max": 7})
    assert cfg.map_spec == "identity"
    assert cfg.eps_count == 2
    assert cfg.n_max == 7  # flag wins


def test_config_hash_excludes_threads():
    a = ExperimentConfig(name="tail", threads=1, out="x.csv")
    b = ExperimentConfig(name="tail", threads=8, out="y.csv")
    c = ExperimentConfig(name="tail", eps_count=3)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()


def test_bad_config_key_exits_2(tmp_path, capsys):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text("speed = 11\n")
    code = main(["entropy", "--config", str(cfg_file),
                 "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert "speed" in capsys.readouterr().err


def test_env_thread_default(tmp_path, monkeypatch):
    monkeypatch.setenv("TAILENT_THREADS", "2")
    code, text = run_cli(["tail", "--map", "tent", "--eps-count", "1",
                          "--n-max", "8"], tmp_path)
    assert code == 0 and text


def test_verify_subcommand_combinatorics(capsys):
    assert main(["verify", "--tag", "combinatorics"]) == 0
    out = capsys.readouterr().out
    assert "PASS 1-combinatorics" in out


def test_console_entry_point(tmp_path):
    """The installed script runs end to end."""
    out = tmp_path / "cli.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "tailent.cli", "sft", "--p-min", "3",
         "--p-max", "4", "--out", str(out)],
        capture_output=True, text=True,
        env={**os.environ, "PYTHONPATH": "src"})
    assert proc.returncode == 0
    assert out.read_text().startswith("schema,config")
