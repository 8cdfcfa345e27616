import json
import os

import numpy as np
import pytest

from ipm1d.cli import RunConfig, main, parse_config


def test_parse_defaults():
    cfg = parse_config(["profile"])
    assert cfg.command == "profile"
    assert cfg.A == 1.0
    assert cfg.n == 256


def test_parse_negative_A_rejected():
    assert main(["profile", "--A", "-1"]) == 2


def test_parse_unknown_config_key(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"A": 2.0, "warp": 9}))
    code = main(["profile", "--config", str(path)])
    assert code == 2
    assert "warp" in capsys.readouterr().err


def test_flag_overrides_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"A": 2.0, "n": 64}))
    cfg = parse_config(["profile", "--config", str(path), "--A", "0.5"])
    assert cfg.A == 0.5
    assert cfg.n == 64


def test_impossible_shoot_target_rejected():
    assert main(["shoot", "--target-L", "1.6"]) == 2


def test_profile_run_writes_manifest_and_csv(tmp_path):
    code = main(["profile", "--A", "1.0", "--n", "64", "--output-dir", str(tmp_path)])
    assert code == 0
    out = tmp_path / "profile"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "profile"
    assert manifest["results"]["L"] < np.pi / 2
    assert manifest["files"][0]["name"] == "profile.csv"
    header = (out / "profile.csv").read_text().splitlines()[0]
    assert header == "theta,M,G,Gp"
    # hashes in the manifest match the emitted files
    import hashlib

    digest = hashlib.sha256((out / "profile.csv").read_bytes()).hexdigest()
    assert manifest["files"][0]["sha256"] == digest


def test_profile_run_deterministic(tmp_path):
    for sub in ("a", "b"):
        assert main(["profile", "--A", "1.0", "--n", "64", "--output-dir", str(tmp_path / sub)]) == 0
    a = (tmp_path / "a" / "profile" / "profile.csv").read_bytes()
    b = (tmp_path / "b" / "profile" / "profile.csv").read_bytes()
    assert a == b


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("IPM_OUTPUT_DIR", str(tmp_path))
    assert main(["profile", "--A", "1.0", "--n", "64"]) == 0
    assert (tmp_path / "profile" / "manifest.json").exists()


def test_evolve_run_columns(tmp_path):
    code = main(
        [
            "evolve",
            "--frame",
            "t",
            "--A",
            "1.0",
            "--n",
            "64",
            "--t-max",
            "0.2",
            "--output-dir",
            str(tmp_path),
        ]
    )
    assert code == 0
    lines = (tmp_path / "evolve" / "series.csv").read_text().splitlines()
    assert lines[0] == "t,sup_P,sup_P_times_1mt,accum_grad"
    law = np.array([float(l.split(",")[2]) for l in lines[1:]])
    assert np.all((law > 3.9) & (law < 4.1))


def test_csv_floats_have_17_significant_digits(tmp_path):
    assert main(["profile", "--A", "1.0", "--n", "64", "--output-dir", str(tmp_path)]) == 0
    row = (tmp_path / "profile" / "profile.csv").read_text().splitlines()[2]
    m_field = row.split(",")[1]
    mantissa = m_field.replace("-", "").replace(".", "").split("e")[0].lstrip("0")
    assert len(mantissa) >= 15  # %.17g keeps full double precision


def test_validate_rejects_bad_frame():
    cfg = RunConfig(command="evolve", frame="x")
    with pytest.raises(ValueError):
        cfg.validate()


def test_spectrum_run_dumps_matrices(tmp_path):
    code = main(["spectrum", "--A", "1.0", "--n", "64", "--output-dir", str(tmp_path)])
    assert code == 0
    out = tmp_path / "spectrum"
    for name in ("spectrum.csv", "l_full.csv", "l_bar.csv", "l_k.csv"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["results"]["L_K_numerical_rank"] <= 8
    # dumped decomposition is consistent: L_full = L_bar + L_K
    full = np.genfromtxt(out / "l_full.csv", delimiter=",", skip_header=1)
    bar = np.genfromtxt(out / "l_bar.csv", delimiter=",", skip_header=1)
    lk = np.genfromtxt(out / "l_k.csv", delimiter=",", skip_header=1)
    assert np.max(np.abs(full - bar - lk)) <= 1e-10


def test_decay_run_writes_curve(tmp_path):
    code = main(
        [
            "decay",
            "--A",
            "1.0",
            "--n",
            "64",
            "--s-max",
            "0.3",
            "--dt",
            "0.005",
            "--output-dir",
            str(tmp_path),
        ]
    )
    assert code == 0
    out = tmp_path / "decay"
    lines = (out / "decay.csv").read_text().splitlines()
    assert lines[0] == "s,sup_perturbation,weighted_norm"
    assert len(lines) > 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert "decayed" in manifest["results"]
    assert "min_sup" in manifest["results"]
