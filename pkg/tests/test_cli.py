"""Experiment drivers: schemas, config precedence, determinism, exits."""
import csv
import io
import json

import numpy as np
import pytest

import topoqc.cli as cli
from topoqc import measure
from topoqc.invariants import MeshGrid, OverlapField


def _run(capsys, *args):
    rc = cli.main(list(args))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_chern_exact_mu_list(capsys):
    rc, out, _ = _run(capsys, "chern", "--mu-list", "1.9,2.1")
    assert rc == 0
    rows = _rows(out)
    assert [r["C"] for r in rows] == ["1", "0"]
    assert [r["mu"] for r in rows] == ["1.9", "2.1"]
    assert all(r["admissible"] == "true" for r in rows)
    assert all(float(r["residual"]) < 1e-9 for r in rows)
    assert list(rows[0]) == ["mu", "trial", "C", "admissible", "residual"]


def test_chern_requires_mu(capsys):
    rc, out, err = _run(capsys, "chern")
    assert rc == 1 and out == "" and "mu" in err


def test_unknown_flag_is_config_error(capsys):
    rc, _, err = _run(capsys, "chern", "--mu", "1.9", "--bogus", "3")
    assert rc == 1 and "error" in err


def test_requires_subcommand(capsys):
    assert _run(capsys)[0] == 1


def test_mu_and_mu_list_conflict(capsys):
    rc, _, err = _run(capsys, "chern", "--mu", "1.9", "--mu-list", "1.9,2.1")
    assert rc == 1 and "not both" in err


def test_single_mu_commands_reject_lists(capsys):
    for command in ("mistake-ratio", "nfield", "zak", "egp"):
        rc, _, err = _run(capsys, command, "--mu-list", "1.9,2.1")
        assert rc == 1 and "single mu" in err


def test_critical_mesh_rejected(capsys):
    # mu=2 closes the gap at the (-pi, -pi) mesh corner
    rc, _, err = _run(capsys, "chern", "--mu", "2.0")
    assert rc == 1 and "error" in err


def test_exact_and_noise_free_modes_agree(capsys):
    rc, out_a, _ = _run(capsys, "chern", "--mu-list=-1,1.9,2.1",
                        "--mode", "exact-oracle")
    rc_b, out_b, _ = _run(capsys, "chern", "--mu-list=-1,1.9,2.1",
                          "--mode", "noise-free-circuit")
    assert rc == rc_b == 0
    assert [r["C"] for r in _rows(out_a)] == [r["C"] for r in _rows(out_b)]


def test_noisy_chern_rows_and_determinism(tmp_path, capsys):
    args = ("chern", "--mu", "1.9", "--mode", "noisy-circuit",
            "--eps1", "0.005", "--trials", "3", "--seed", "42")
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(list(args) + ["--out", str(out1)]) == 0
    assert cli.main(list(args) + ["--out", str(out2)]) == 0
    capsys.readouterr()
    assert out1.read_bytes() == out2.read_bytes()
    rows = _rows(out1.read_text())
    assert [r["trial"] for r in rows] == ["0", "1", "2"]
    assert all(r["C"] == "1" for r in rows)


def test_csv_json_parity(capsys):
    rc, out_csv, _ = _run(capsys, "chern", "--mu-list", "1.9,2.1")
    rc_j, out_json, _ = _run(capsys, "chern", "--mu-list", "1.9,2.1",
                             "--format", "json")
    assert rc == rc_j == 0
    doc = json.loads(out_json)
    assert doc["meta"]["command"] == "chern"
    assert doc["meta"]["config"]["mu_list"] == [1.9, 2.1]
    assert doc["meta"]["config"]["seed"] == 42
    for csv_row, json_row in zip(_rows(out_csv), doc["rows"], strict=True):
        assert float(csv_row["mu"]) == json_row["mu"]
        assert int(csv_row["C"]) == json_row["C"]
        assert (csv_row["admissible"] == "true") == json_row["admissible"]
        assert float(csv_row["residual"]) == json_row["residual"]


def test_nfield_sum(capsys):
    for mu, want in (("1.9", 1), ("2.1", 0)):
        rc, out, _ = _run(capsys, "nfield", "--mu", mu)
        assert rc == 0
        lines = out.strip().split("\n")
        assert lines[0] == "i,j,n"
        body, total = lines[1:-1], lines[-1]
        assert len(body) == 64
        ns = [int(line.split(",")[2]) for line in body]
        assert all(abs(n) <= 2 for n in ns)
        assert total == f"sum,,{want}"
        assert sum(ns) == want


def test_nfield_json_sum(capsys):
    rc, out, _ = _run(capsys, "nfield", "--mu", "1.9", "--format", "json")
    assert rc == 0
    doc = json.loads(out)
    assert doc["sum"] == 1
    assert sum(r["n"] for r in doc["rows"]) == 1


def test_mistake_ratio_zero_noise(capsys):
    rc, out, _ = _run(capsys, "mistake-ratio", "--mu", "1.9",
                      "--eps1", "0", "--trials", "3")
    assert rc == 0
    rows = _rows(out)
    assert rows[0]["ratio"] == "0.0"
    assert rows[0]["mistakes"] == "0"
    assert rows[0]["trials"] == "3"


def test_mistake_ratio_sweep_schema(capsys):
    rc, out, _ = _run(capsys, "mistake-ratio", "--mu", "1.9",
                      "--eps1", "0.005,0.015", "--trials", "2")
    assert rc == 0
    rows = _rows(out)
    assert [r["eps1"] for r in rows] == ["0.005", "0.015"]
    for r in rows:
        assert 0.0 <= float(r["ratio"]) <= 1.0


def test_zak_exact_profiles(capsys):
    for mu, want in (("1.9", "1"), ("2.1", "0")):
        rc, out, _ = _run(capsys, "zak", "--mu", mu)
        assert rc == 0
        rows = _rows(out)
        assert len(rows) == 8
        assert list(rows[0]) == ["ky", "trial", "phi", "winding"]
        assert all(r["winding"] == want for r in rows)
        phis = [float(r["phi"]) for r in rows]
        assert all(-np.pi < p <= np.pi for p in phis)


def test_egp_zak_limit_through_cli(capsys):
    rc, out_e, _ = _run(capsys, "egp", "--mu", "1.9", "--beta", "50")
    rc_z, out_z, _ = _run(capsys, "zak", "--mu", "1.9")
    assert rc == rc_z == 0
    egp_rows, zak_rows = _rows(out_e), _rows(out_z)
    assert list(egp_rows[0]) == ["ky", "trial", "phiE", "winding"]
    for a, b in zip(egp_rows, zak_rows, strict=True):
        assert a["ky"] == b["ky"]
        assert abs(float(a["phiE"]) - float(b["phi"])) < 1e-3
    assert all(r["winding"] == "1" for r in egp_rows)


def test_egp_nl_overrides_loop_length(capsys):
    rc, out, _ = _run(capsys, "egp", "--mu", "1.9", "--beta", "50",
                      "--nl", "16", "--format", "json")
    assert rc == 0
    assert json.loads(out)["meta"]["config"]["n_L"] == 16


def test_config_file_and_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"mu": 2.1, "format": "json", "trials": 2}))
    rc, out, _ = _run(capsys, "chern", "--config", str(cfg))
    assert rc == 0
    doc = json.loads(out)
    assert [r["C"] for r in doc["rows"]] == [0, 0]
    # flags override the file
    rc, out, _ = _run(capsys, "chern", "--config", str(cfg), "--mu", "1.9",
                      "--trials", "1")
    doc = json.loads(out)
    assert [r["C"] for r in doc["rows"]] == [1]


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"mu": 1.9, "mesh_size": 8}))
    rc, _, err = _run(capsys, "chern", "--config", str(cfg))
    assert rc == 1 and "mesh_size" in err


def test_config_validation_errors(capsys):
    checks = [
        ("chern", "--mu", "1.9", "--mode", "hardware"),
        ("chern", "--mu", "1.9", "--format", "yaml"),
        ("chern", "--mu", "1.9", "--mesh", "8"),
        ("chern", "--mu", "1.9", "--trials", "0"),
        ("chern", "--mu", "1.9", "--eps1", "1.5"),
        ("egp", "--mu", "1.9", "--beta", "-2"),
        ("chern", "--mu", "1.9", "--eps1", "0.005,0.01"),
    ]
    for args in checks:
        assert _run(capsys, *args)[0] == 1, args


def test_all_trials_failed_exit(monkeypatch, capsys):
    mesh = MeshGrid(8, 8)
    raw = np.full((8, 8, 2, 2, 2), np.nan, dtype=complex)
    raw[:, :, :, 1, 1] = 0.0  # every link dead

    def dead_field(params, m, band_pairs=measure.MINUS_PAIR, modulus_floor=None):
        return OverlapField(mesh=mesh, raw=raw)

    monkeypatch.setattr(cli.measure, "oracle_overlap_field", dead_field)
    rc, out, err = _run(capsys, "chern", "--mu", "1.9", "--trials", "2")
    assert rc == 2
    rows = _rows(out)
    assert len(rows) == 2
    assert all(r["C"] == "" for r in rows)
    assert "warning" in err
