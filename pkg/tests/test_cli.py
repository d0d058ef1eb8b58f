import csv
import hashlib
import json
import math

import numpy as np
import pytest

from polyphase import diophantine as dio
from polyphase.cli import main
from polyphase.config import ConfigError, ExperimentConfig, parse_seeds
from polyphase.ensemble import EnsembleParams
from polyphase.fluctuations import fluctuation_samples, moment_from_samples


def _config(tmp_path, name="cfg.json", **blocks):
    path = tmp_path / name
    path.write_text(json.dumps(blocks))
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _run(*argv):
    return main([str(a) for a in argv])


SMALL = {"ensemble": {"N": 40, "d": 3}, "grid": {"E_values": [1.0, 2.0], "eta_values": [0.2, 0.5]}}


def test_config_round_trip():
    cfg = ExperimentConfig.from_dict({"ensemble": {"N": 12, "d": 2, "density": "raised_cosine", "a": 0.3},
                                      "descent": {"E": 1.5}, "seeds": [4, 2], "tolerances": {"ward": 1e-9}})
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg and again.digest() == cfg.digest()
    assert cfg.ensemble.params(7).density.a == 0.3


@pytest.mark.parametrize(
    "bad",
    [{"ensembel": {}}, {"ensemble": {"M": 3}}, {"ensemble": {"N": "ten"}}, {"seeds": []}, {"tolerances": {"foo": 1}},
     {"ensemble": {"N": 0}}, {"grid": {"lattice": 1}}],
)
def test_config_rejects_invalid(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_parse_seeds():
    assert parse_seeds("1,2,5-7") == [1, 2, 5, 6, 7]
    assert parse_seeds("3,3,1") == [3, 1]
    assert parse_seeds("") == []
    for bad in ("x", "5-2"):
        with pytest.raises(ConfigError):
            parse_seeds(bad)


def test_empty_seed_list_is_usage_error_without_files(tmp_path):
    out = tmp_path / "out"
    assert _run("locallaw", "--config", _config(tmp_path, **SMALL), "--out", out, "--seeds", "") == 1
    assert not out.exists()
    assert list(tmp_path.iterdir()) == [tmp_path / "cfg.json"]


def test_usage_errors(tmp_path):
    assert _run("nosuch") == 1
    assert _run("spectrum") == 1  # no output directory
    assert _run("spectrum", "--out", tmp_path / "o", "--parallel", "0") == 1
    assert _run("spectrum", "--config", tmp_path / "missing.json", "--out", tmp_path / "o") == 2


def test_output_directory_is_create_only(tmp_path):
    cfg = _config(tmp_path, ensemble={"N": 10, "d": 2})
    out = tmp_path / "out"
    assert _run("rigidity", "--config", cfg, "--out", out) == 0
    first = (out / "rigidity.csv").read_bytes()
    assert _run("rigidity", "--config", cfg, "--out", out, "--seeds", "2") == 1
    assert (out / "rigidity.csv").read_bytes() == first
    assert _run("rigidity", "--config", cfg, "--out", out, "--seeds", "2", "--force") == 0
    assert (out / "rigidity.csv").read_bytes() != first
    assert sorted(p.name for p in tmp_path.iterdir()) == ["cfg.json", "out"]


def test_single_entry_spectrum(tmp_path):
    out = tmp_path / "out"
    assert _run("spectrum", "--config", _config(tmp_path, ensemble={"N": 1, "d": 1}), "--out", out) == 0
    rows = _rows(out / "eigenvalues.csv")
    assert len(rows) == 1 and float(rows[0]["eigenvalue"]) == 1.0


def test_counting_table_rebuilds_from_eigenvalues(tmp_path):
    out = tmp_path / "out"
    assert _run("spectrum", "--config", _config(tmp_path, **SMALL), "--out", out, "--seeds", "1,2") == 0
    lam = {}
    for r in _rows(out / "eigenvalues.csv"):
        lam.setdefault(int(r["seed"]), []).append(float(r["eigenvalue"]))
    for r in _rows(out / "counting.csv"):
        vals = np.array(lam[int(r["seed"])])
        assert float(r["F_N"]) == np.count_nonzero(vals <= float(r["E"])) / vals.size


def _checksums(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


@pytest.mark.parametrize("command", ["spectrum", "locallaw", "rigidity", "deloc", "moments", "dio", "exponents"])
def test_repeated_runs_are_byte_identical(tmp_path, monkeypatch, command):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    blocks = dict(SMALL, moments={"replicas": [50], "p_values": [1, 2]},
                  diophantine={"N": 5, "d": 2, "p": 1, "gamma": 0.3}, exponents={"d_min": 18, "d_max": 24},
                  descent={"E": 2.0, "eta_start": 0.5, "eta_stop": 0.3, "s": 0.5})
    cfg = _config(tmp_path, **blocks)
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(command, "--config", cfg, "--out", a, "--seeds", "1,2") == 0
    assert _run(command, "--config", cfg, "--out", b, "--seeds", "1,2", "--parallel", "2") == 0
    assert _checksums(a) == _checksums(b)
    manifest = json.loads((a / "manifest.json").read_text())
    listed = set(manifest["outputs"])
    assert listed == {p.name for p in a.iterdir()} - {"manifest.json"}
    for name, digest in manifest["outputs"].items():
        assert hashlib.sha256((a / name).read_bytes()).hexdigest() == digest


def test_two_seed_summary_matches_per_seed_values(tmp_path):
    cfg = _config(tmp_path, **SMALL)
    outs = {}
    for seeds in ("1", "2", "1,2"):
        out = tmp_path / f"s{seeds.replace(',', '_')}"
        assert _run("locallaw", "--config", cfg, "--out", out, "--seeds", seeds) == 0
        outs[seeds] = json.loads((out / "summary.json").read_text())
    both = outs["1,2"]
    singles = [outs["1"]["mean_sup_err_eta"], outs["2"]["mean_sup_err_eta"]]
    assert both["mean_sup_err_eta"] == pytest.approx(sum(singles) / 2, rel=1e-15)
    assert both["per_seed_sup_err_eta"] == {"1": singles[0], "2": singles[1]}
    rows = _rows(tmp_path / "s1_2" / "sweep.csv")
    assert both["flag_count"] == sum(r["flag"] == "1" for r in rows)
    assert both["rows"] == len(rows) == 8


def test_flags_are_data_not_failures(tmp_path):
    # a descent constant far below the actual error flags every step, yet the run succeeds
    blocks = dict(SMALL, descent={"E": 2.0, "eta_start": 0.5, "eta_stop": 0.2, "s": 0.5, "c": 1e-9})
    out = tmp_path / "out"
    assert _run("locallaw", "--config", _config(tmp_path, **blocks), "--out", out) == 0
    summary = json.loads((out / "summary.json").read_text())
    rows = _rows(out / "descent.csv")
    assert summary["descent"]["flag_count"] == len(rows) == summary["descent"]["steps"] > 0
    assert all(r["flag"] == "1" and r["lipschitz_ok"] == "1" for r in rows)


def test_moments_columns_match_library(tmp_path):
    cfg = _config(tmp_path, ensemble={"N": 30, "d": 2}, moments={"p_values": [1], "replicas": [400], "row": 3})
    out = tmp_path / "out"
    assert _run("moments", "--config", cfg, "--out", out, "--seeds", "5") == 0
    (row,) = _rows(out / "moments.csv")
    F = fluctuation_samples(EnsembleParams(30, 2, seed=5), 3, 2 + 0.2j, 400)
    est = moment_from_samples(F, 1)
    assert float(row["estimate"]) == est.estimate and float(row["stderr"]) == est.stderr
    assert float(row["estimate"]) == pytest.approx(abs(np.mean(F**2)), rel=1e-12)
    # F is centered in expectation, so the centered variance agrees statistically
    pseudo = abs(np.mean((F - F.mean()) ** 2))
    assert abs(float(row["estimate"]) - pseudo) <= 5 * float(row["stderr"])


def test_moments_stderr_shrinks_with_replicas(tmp_path):
    cfg = _config(tmp_path, ensemble={"N": 20, "d": 2}, moments={"p_values": [1], "replicas": [500, 1000]})
    out = tmp_path / "out"
    assert _run("moments", "--config", cfg, "--out", out, "--seeds", "1-20") == 0
    se = {}
    for r in _rows(out / "moments.csv"):
        se.setdefault(int(r["seed"]), {})[int(r["replicas"])] = float(r["stderr"])
    ratios = [v[1000] / v[500] for v in se.values()]
    assert abs(np.median(ratios) - 1 / math.sqrt(2)) <= 0.2 / math.sqrt(2)


def test_moments_rejects_unsupported_order(tmp_path):
    cfg = _config(tmp_path, ensemble={"N": 10, "d": 2}, moments={"p_values": [5]})
    assert _run("moments", "--config", cfg, "--out", tmp_path / "out") == 1
    assert not (tmp_path / "out").exists()


def test_dio_output_reloads_and_verifies(tmp_path):
    cfg = _config(tmp_path, diophantine={"N": 6, "d": 2, "p": 2, "gamma": 0.3})
    out = tmp_path / "out"
    assert _run("dio", "--config", cfg, "--out", out) == 0
    sols = dio.read_solutions(out / "solutions.txt")
    summary = json.loads((out / "summary.json").read_text())
    assert len(sols) == summary["count_mitm"] == summary["system"]["count"]
    strata = _rows(out / "strata.csv")
    assert sum(int(r["count"]) for r in strata) == len(sols)


def test_dio_budget_failure_is_infrastructure(tmp_path):
    cfg = _config(tmp_path, diophantine={"N": 12, "d": 1, "p": 2, "solution_cap": 10})
    assert _run("dio", "--config", cfg, "--out", tmp_path / "out") == 2
    assert not (tmp_path / "out").exists()


def test_exponents_command(tmp_path):
    out = tmp_path / "out"
    assert _run("exponents", "--out", out) == 0
    rows = _rows(out / "exponents.csv")
    assert len(rows) == 43 and all(r["ok"] == "1" for r in rows)
    theta = {int(r["d"]): r["theta0"] for r in _rows(out / "theta.csv")}
    assert theta[18] == "1/756" and theta[32] == "1/81"


def test_deloc_command(tmp_path):
    out = tmp_path / "out"
    assert _run("deloc", "--config", _config(tmp_path, **SMALL), "--out", out) == 0
    rows = _rows(out / "deloc.csv")
    assert rows and all(float(r["surrogate"]) >= float(r["sup_norm2"]) * (1 - 1e-12) for r in rows)


def test_verify_passes_and_detects_fault(tmp_path, capsys):
    assert _run("verify") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)
    assert _run("verify", "--inject-fault", "ward") == 3
    out = capsys.readouterr().out
    assert any(line.startswith("FAIL ward") for line in out.splitlines())


def test_verify_writes_report(tmp_path):
    out = tmp_path / "out"
    assert _run("verify", "--out", out) == 0
    rows = _rows(out / "verify.csv")
    assert rows and all(r["passed"] == "1" for r in rows)


def test_tolerance_environment_override(monkeypatch):
    monkeypatch.setenv("POLYPHASE_TOL_WARD", "0")
    assert _run("verify") == 3
    monkeypatch.setenv("POLYPHASE_TOL_WARD", "abc")
    assert _run("verify") == 1
    monkeypatch.delenv("POLYPHASE_TOL_WARD")
    monkeypatch.setenv("POLYPHASE_TOL_NOPE", "1")
    assert _run("verify") == 1
