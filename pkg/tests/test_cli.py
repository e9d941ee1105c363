import json
import math
import os

import mpmath
import pytest

from rdmodes import cli


def _read_table(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# manifest: ")
    assert lines[1].startswith("# units: ")
    manifest = lines[0].split(": ", 1)[1]
    header = lines[2].split(",")
    rows = [line.split(",") for line in lines[3:]]
    return manifest, header, rows


# ---------------------------------------------------------------------------
# formatting


def test_fmt():
    assert cli._fmt(True) == "true"
    assert cli._fmt(False) == "false"
    assert cli._fmt(3) == "3"
    assert cli._fmt("skip") == "skip"
    assert cli._fmt(0.5) == "0.5"
    assert cli._fmt(5e-5) == "5.000000000000e-05"
    assert cli._fmt(float("inf")) == "inf"
    assert cli._fmt(0.0) == "0"
    # values below double range keep their magnitude in the CSV
    assert "e-400" in cli._fmt(mpmath.mpf("1e-400"))


# ---------------------------------------------------------------------------
# condition sweep


def test_condition_outputs(tmp_path):
    out = tmp_path / "run"
    rc = cli.main(
        [
            "condition",
            "--out",
            str(out),
            "--precision",
            "16",
            "--delta-min",
            "0.5",
            "--delta-max",
            "1.0",
            "--delta-steps",
            "2",
        ]
    )
    assert rc == 0
    manifest_name, header, rows = _read_table(out / "condition.csv")
    assert header == ["delta", "n", "K_y", "K_lambda", "reliable", "status"]
    assert len(rows) == 2 * 4  # two deltas, four modes
    assert all(row[-1] == "ok" for row in rows)
    assert {row[0] for row in rows} == {"0.5", "1"}
    for row in rows:
        assert math.isfinite(float(row[2]))
        assert math.isfinite(float(row[3]))

    with open(out / manifest_name) as fh:
        manifest = json.load(fh)
    assert manifest["subcommand"] == "condition"
    assert manifest["config_digest"] in manifest_name
    assert manifest["outputs"] == ["condition.csv"]
    assert manifest["precision"] == 16
    assert manifest["config"]["deltas"] == [0.5, 1.0]


def test_condition_deterministic_bytes(tmp_path):
    argv = [
        "condition",
        "--precision",
        "16",
        "--delta-min",
        "0.75",
        "--delta-steps",
        "1",
    ]
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(argv + ["--out", str(a)]) == 0
    assert cli.main(argv + ["--out", str(b)]) == 0
    assert (a / "condition.csv").read_bytes() == (b / "condition.csv").read_bytes()


def test_condition_requires_tail(tmp_path):
    rc = cli.main(["condition", "--out", str(tmp_path), "--n2", "0"])
    assert rc == 1


def test_condition_breakdown_exit(tmp_path):
    rc = cli.main(
        [
            "condition",
            "--out",
            str(tmp_path),
            "--precision",
            "16",
            "--delta-min",
            "40",
            "--delta-steps",
            "1",
        ]
    )
    assert rc == 2


# ---------------------------------------------------------------------------
# esprit sweep


def test_esprit_outputs(tmp_path):
    rc = cli.main(
        [
            "esprit",
            "--out",
            str(tmp_path),
            "--delta-min",
            "0.5",
            "--delta-steps",
            "1",
            "--epsilon",
            "1e-6",
        ]
    )
    assert rc == 0
    _, header, rows = _read_table(tmp_path / "esprit.csv")
    assert header == ["delta", "n", "E_lambda", "E_y", "status"]
    assert len(rows) == 4
    for row in rows:
        assert row[-1] == "ok"
        assert math.isfinite(float(row[2]))
        assert math.isfinite(float(row[3]))


def test_esprit_rejects_zero_epsilon(tmp_path):
    rc = cli.main(["esprit", "--out", str(tmp_path), "--epsilon", "0"])
    assert rc == 1


# ---------------------------------------------------------------------------
# bounds table


def test_bounds_outputs(tmp_path):
    rc = cli.main(
        [
            "bounds",
            "--out",
            str(tmp_path),
            "--delta-min",
            "1.0",
            "--delta-steps",
            "1",
        ]
    )
    assert rc == 0
    _, header, rows = _read_table(tmp_path / "bounds.csv")
    assert header[:3] == ["delta", "n", "main_count"]
    assert header[-2:] == ["identities_ok", "brackets_ok"]
    assert len(rows) == 4
    assert all(row[-2] == "true" and row[-1] == "true" for row in rows)


# ---------------------------------------------------------------------------
# configuration handling


def test_config_model_override(tmp_path):
    cfg = tmp_path / "model.toml"
    cfg.write_text(
        "precision = 16\n"
        "[model]\n"
        "rates = [1.0, 3.0]\n"
        "amplitudes = [2.0, 1.0]\n"
        "tail_rates = [7.0]\n"
        "tail_amplitudes = [1.0]\n"
        "epsilon = 1e-5\n"
        "[sweep]\n"
        "deltas = [1.0]\n"
    )
    out = tmp_path / "out"
    assert cli.main(["condition", "--config", str(cfg), "--out", str(out)]) == 0
    _, _, rows = _read_table(out / "condition.csv")
    assert [row[1] for row in rows] == ["1", "2"]  # two main modes, not the default 4


def test_missing_config(tmp_path):
    rc = cli.main(["condition", "--config", str(tmp_path / "nope.toml")])
    assert rc == 1


def test_unparsable_config(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = [unclosed\n")
    assert cli.main(["condition", "--config", str(bad)]) == 1


def test_bad_precision_via_config(tmp_path):
    cfg = tmp_path / "p.toml"
    cfg.write_text("precision = 17\n")
    assert cli.main(["condition", "--config", str(cfg)]) == 1


def test_bad_strides(tmp_path):
    assert cli.main(["pipeline", "--out", str(tmp_path), "--strides", "0,2"]) == 1
    assert cli.main(["pipeline", "--out", str(tmp_path), "--strides", "a,b"]) == 1


def test_unknown_subcommand_exits_one(capsys):
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["transmogrify"])
    assert excinfo.value.code == 1


# ---------------------------------------------------------------------------
# simulation commands (coarse settings to keep runtime down)


def test_simulate_outputs(tmp_path):
    cfg = tmp_path / "sim.toml"
    cfg.write_text(
        "precision = 16\n"
        "seed = 5\n"
        "n1 = 2\n"
        "n2 = 1\n"
        "[pde]\n"
        "interior_points = 16\n"
        "sample_count = 33\n"
        "snapshot_count = 3\n"
    )
    out = tmp_path / "out"
    rc = cli.main(["simulate", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    _, fheader, frows = _read_table(out / "field.csv")
    assert fheader == ["t", "x", "z"]
    assert len(frows) == 3 * 16
    _, mheader, mrows = _read_table(out / "measurements.csv")
    assert mheader == ["t", "y"]
    assert len(mrows) == 33
    assert float(mrows[0][0]) == 0.0
    assert float(mrows[-1][0]) == 2.0
    # the state decays, so the series should too
    assert abs(float(mrows[-1][1])) < abs(float(mrows[0][1]))

    manifests = [p for p in os.listdir(out) if p.startswith("manifest-simulate-")]
    assert len(manifests) == 1
    with open(out / manifests[0]) as fh:
        manifest = json.load(fh)
    assert manifest["outputs"] == ["field.csv", "measurements.csv"]


def test_pipeline_outputs(tmp_path):
    cfg = tmp_path / "pipe.toml"
    cfg.write_text(
        "precision = 32\n"
        "seed = 5\n"
        "n1 = 2\n"
        "n2 = 1\n"
        "[model]\n"
        "epsilon = 1e-4\n"
        "[pde]\n"
        "interior_points = 16\n"
        "sample_count = 65\n"
        "[pipeline]\n"
        "strides = [4, 8]\n"
    )
    out = tmp_path / "out"
    rc = cli.main(["pipeline", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    _, lheader, lrows = _read_table(out / "pipeline.csv")
    assert lheader == ["delta", "stride", "n", "lambda_rel_error", "initial_mode", "status"]
    ok_rows = [r for r in lrows if r[-1] == "ok"]
    assert ok_rows, "no stride produced a usable fit"
    for row in ok_rows:
        assert math.isfinite(float(row[3]))
    _, pheader, prows = _read_table(out / "pipeline_pq.csv")
    assert pheader == [
        "delta",
        "stride",
        "p_hat",
        "q_hat",
        "p_rel_error",
        "q_rel_error",
        "status",
    ]
    assert len(prows) == 2
    pq_ok = [r for r in prows if r[-1] == "ok"]
    assert pq_ok
    # the estimates should land near the configured coefficients
    assert float(pq_ok[0][2]) == pytest.approx(0.1, rel=0.3)


# ---------------------------------------------------------------------------
# verify plumbing


def test_find_suite_prefers_cwd(tmp_path, monkeypatch):
    suite = tmp_path / "tests" / "test_acceptance.py"
    suite.parent.mkdir()
    suite.write_text("")
    monkeypatch.chdir(tmp_path)
    assert cli._find_acceptance_suite() == str(suite)


def test_verify_exit_codes(tmp_path, monkeypatch):
    suite = tmp_path / "tests" / "test_acceptance.py"
    suite.parent.mkdir()
    suite.write_text("")
    monkeypatch.chdir(tmp_path)
    calls = []

    class _Result:
        def __init__(self, rc):
            self.returncode = rc

    def fake_run(cmd):
        calls.append(cmd)
        return _Result(fake_run.rc)

    monkeypatch.setattr(cli.subprocess, "run", fake_run)
    fake_run.rc = 0
    assert cli.main(["verify", "--out", str(tmp_path / "o")]) == 0
    assert calls[0][-2:] == [str(suite), "-v"]
    fake_run.rc = 3
    assert cli.main(["verify", "--out", str(tmp_path / "o")]) == 1
