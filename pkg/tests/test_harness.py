import csv
import json
import os
from pathlib import Path

import numpy as np
import pytest

from nilquant.errors import ConfigError
from nilquant.harness import check_report, convergence_table, default_config, parse_config, run_scenario
from nilquant.harness.cli import THREAD_VARIABLES, main
from nilquant.harness.config import SCENARIOS
from nilquant.harness.report import CSV_COLUMNS, format_convergence, to_csv, write_report
from nilquant.heisenberg.group import HeisenbergElement
from nilquant.heisenberg.rep import basis_for, schrodinger_rep
from nilquant.ovmeasure import pairs_to_matrix

GOLDEN = Path(__file__).parent / "golden"
CONFIGS = Path(__file__).parent.parent / "configs"


def write_config(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


# -- configuration -------------------------------------------------------------------


def test_parse_overrides_and_defaults():
    cfg = parse_config("[scenario]\nname = euclid-concentration\nseed = 7\n[euclid]\nx0 = 0.25\n"
                       "[output]\ndir = out\nformat = csv\n")
    assert cfg.seed == 7 and cfg.out_dir == "out" and cfg.fmt == "csv"
    assert cfg.params["x0"] == 0.25 and cfg.params["tolerance"] == 0.02
    assert cfg.echo()["euclid"]["x0"] == 0.25


@pytest.mark.parametrize("text, message", [
    ("[scenario]\nname = no-such-thing\n", "unknown scenario"),
    ("[scenario]\nname = euclid-concentration\n[euclid]\nbogus = 1\n", "unknown parameter"),
    ("[scenario]\nname = euclid-concentration\n[group]\nlam_max = 1\n", "does not apply"),
    ("[scenario]\nname = euclid-concentration\ncolour = red\n", "unknown keys"),
    ("[scenario]\nname = euclid-concentration\n[output]\nfmt = csv\n", "unknown keys"),
    ("[scenario]\nname = euclid-concentration\n[output]\nformat = xml\n", "format"),
    ("[scenario]\nname = euclid-concentration\n[euclid]\nx0 = 9\n", "above the maximum"),
    ("[scenario]\nname = euclid-concentration\n[euclid]\ntolerance = nan\n", "NaN"),
    ("[scenario]\nname = euclid-concentration\n[euclid]\nladder_first = three\n", "cannot read"),
    ("[scenario]\nname = euclid-concentration\n[euclid]\nladder_first = 6\n", "three rungs"),
    ("[scenario]\nname = euclid-concentration\nseed = -1\n", "seed"),
    ("[scenario]\nname = euclid-concentration\nseed = 18446744073709551616\n", "seed"),
    ("[scenario]\nname = heisenberg-algebra\n[heisenberg]\nlam_min = 2\nlam_max = 1\n", "lam_min"),
    ("[scenario]\nname = schrodinger-regime\n[schrodinger]\nregimes = invariance,warp\n", "regimes"),
    ("[euclid]\nx0 = 1\n", "must name a scenario"),
    ("not an ini file", "malformed"),
])
def test_invalid_configurations_are_rejected(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_largest_seed_is_accepted():
    assert parse_config("[scenario]\nname = euclid-mdm\nseed = 18446744073709551615\n").seed == 2**64 - 1


def test_shipped_configs_cover_every_scenario():
    names = {parse_config(p.read_text()).name for p in CONFIGS.glob("*.ini")}
    assert names == set(SCENARIOS)


def test_default_config_validates_parameters():
    with pytest.raises(ConfigError):
        default_config("group-norm-bound", triples=0)
    with pytest.raises(ConfigError):
        default_config("group-norm-bound", colour=1)


# -- command line ----------------------------------------------------------------------


def test_unknown_scenario_exits_2_without_files(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, f"[scenario]\nname = nope\n[output]\ndir = {out}\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert not out.exists()


def test_bad_seed_override_exits_2(tmp_path):
    cfg = write_config(tmp_path, "[scenario]\nname = euclid-mdm\n")
    assert main(["run", "--config", str(cfg), "--seed", "-3", "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_missing_config_exits_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.ini")]) == 2


def test_invalid_thread_setting_exits_2(monkeypatch, capsys):
    monkeypatch.setenv("NILQUANT_THREADS", "lots")
    assert main(["list"]) == 2
    assert "NILQUANT_THREADS" in capsys.readouterr().err


def test_thread_setting_reaches_blas_variables(monkeypatch):
    for var in THREAD_VARIABLES:
        monkeypatch.delenv(var, raising=False)
    monkeypatch.setenv("NILQUANT_THREADS", "2")
    assert main(["list"]) == 0
    assert all(os.environ[var] == "2" for var in THREAD_VARIABLES)


def test_list_enumerates_scenarios(capsys):
    assert main(["list"]) == 0
    text = capsys.readouterr().out
    assert all(name in text for name in SCENARIOS)


@pytest.fixture(scope="module")
def euclid_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("euclid")
    cfg = out / "run.ini"
    cfg.write_text("[scenario]\nname = euclid-concentration\n")
    code = main(["run", "--config", str(cfg), "--out", str(out)])
    return code, out


def test_default_run_writes_both_files(euclid_run):
    code, out = euclid_run
    assert code == 0
    report = json.loads((out / "euclid-concentration.json").read_text())
    assert report["schema_version"] == "1" and report["status"] == "pass"
    with open(out / "euclid-concentration.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + len(report["rungs"]) == 6


def test_verdicts_name_their_tolerance(euclid_run):
    _, out = euclid_run
    report = json.loads((out / "euclid-concentration.json").read_text())
    params = report["scenario"]["euclid"]
    for v in report["verdicts"].values():
        assert v["tolerance_key"] == "structural" or v["tolerance"] == params[v["tolerance_key"]]


def test_check_reevaluates_verdicts(euclid_run, tmp_path):
    _, out = euclid_run
    path = out / "euclid-concentration.json"
    assert main(["check", "--report", str(path)]) == 0
    report = json.loads(path.read_text())
    report["verdicts"]["limit_relative_error"]["value"] = 0.5
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(report))
    assert main(["check", "--report", str(tampered)]) == 1
    assert check_report(report) == ["limit_relative_error"]


def test_failing_verdict_exits_1(tmp_path):
    cfg = write_config(tmp_path, "[scenario]\nname = euclid-oscillation\n[euclid]\ntolerance = 0\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path), "--format", "json"]) == 1
    assert json.loads((tmp_path / "euclid-oscillation.json").read_text())["status"] == "fail"
    assert not (tmp_path / "euclid-oscillation.csv").exists()


def test_precondition_failure_exits_3_with_diagnostic(tmp_path):
    # 32 samples per axis alias the twisted phase and the support check fires
    cfg = write_config(tmp_path, "[scenario]\nname = group-norm-bound\n[group]\ntriples = 1\ngrid_points = 32\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 3
    report = json.loads((tmp_path / "group-norm-bound.json").read_text())
    assert report["status"] == "error" and "SupportOverflowError" in report["diagnostic"]
    assert main(["check", "--report", str(tmp_path / "group-norm-bound.json")]) == 1


# -- reports -------------------------------------------------------------------------------


def strip_volatile(text):
    report = json.loads(text)
    report.pop("timestamp")
    return json.dumps(report, sort_keys=True)


def test_same_seed_gives_identical_report(tmp_path):
    texts = []
    for k in range(2):
        cfg = default_config("heisenberg-algebra", pairs=5, lam_count=2)
        path = write_report(run_scenario(cfg), tmp_path / str(k), "json")[0]
        texts.append(path.read_text())
    assert strip_volatile(texts[0]) == strip_volatile(texts[1])


def test_seed_changes_random_probes():
    import dataclasses

    cfg = default_config("heisenberg-algebra", pairs=5, lam_count=2)
    a = run_scenario(cfg)["rungs"]
    b = run_scenario(dataclasses.replace(cfg, seed=1))["rungs"]
    assert a != b


def test_matrices_round_trip_bit_identically(tmp_path):
    report = run_scenario(default_config("heisenberg-algebra", pairs=2, lam_count=1))
    path = write_report(report, tmp_path, "json")[0]
    stored = json.loads(path.read_text())["matrices"]["pi_1(1,0,0)"]
    expected = schrodinger_rep(1.0, HeisenbergElement(1, 0, 0), basis_for(1.0, 16)).matrix[:4, :4]
    restored = pairs_to_matrix(stored)
    assert restored.dtype == expected.dtype
    assert np.array_equal(restored, expected)


def test_example_product_is_echoed():
    report = run_scenario(default_config("heisenberg-algebra", pairs=2, lam_count=1))
    assert report["results"]["example_product"] == [1.0, 1.0, 0.5]


def test_csv_relative_error_column():
    report = {"scenario": {"name": "demo"}, "rungs": [
        {"rung": 0.5, "value": [1.1, 0.0], "oracle": 1.0},
        {"rung": 0.25, "value": [0.0, 2.0], "oracle": None, "label": "extra"}]}
    rows = list(csv.DictReader(to_csv(report).splitlines()))
    assert float(rows[0]["rel_err"]) == pytest.approx(0.1)
    assert rows[1]["rung"] == "extra" and rows[1]["oracle"] == "" and rows[1]["rel_err"] == ""


def test_atomic_write_leaves_no_temporaries(tmp_path):
    report = run_scenario(default_config("euclid-mdm"))
    write_report(report, tmp_path, "both")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["euclid-mdm.csv", "euclid-mdm.json"]


# -- convergence table -----------------------------------------------------------------------


def test_convergence_table_golden():
    report = run_scenario(default_config("euclid-concentration"))
    assert convergence_table(report) == (GOLDEN / "convergence_table_euclid.txt").read_text()


def test_convergence_table_five_rungs_has_rates():
    lines = format_convergence([1, 2, 3, 4, 5], [1.0, 0.5, 0.25, 0.125, 0.0625]).splitlines()
    assert len(lines) == 6
    assert lines[3].split()[-1] == "0.5000"


def test_single_rung_rate_is_na():
    lines = format_convergence([0.5], [1.0]).splitlines()
    assert lines[1].split()[-1] == "n/a"


def test_empty_table_is_rejected():
    with pytest.raises(ValueError):
        convergence_table({"rungs": []})


def test_group_limit_report_is_exploratory(tmp_path):
    cfg = write_config(tmp_path, "[scenario]\nname = group-sc-limit\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path), "--format", "json"]) == 0
    report = json.loads((tmp_path / "group-sc-limit.json").read_text())
    assert report["exploratory"] is True
    assert report["measure"]["atoms"] and report["verdicts"]["measure_positive"]["passed"]
