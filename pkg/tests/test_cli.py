import json

import pytest

from fluctlab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def data_rows(text):
    return [ln for ln in text.splitlines() if not ln.startswith("#")][1:]


def test_series_cesaro_writes_one_row_per_n(capsys, tmp_path):
    path = tmp_path / "s.csv"
    code, _, _ = run(capsys, "series", "--op", "cesaro", "--alpha", "golden",
                     "--f", "preset:halfindicator", "--N", "100000", "--x0", "0", "--csv", str(path))
    assert code == 0
    text = path.read_text()
    assert text.startswith("# fluctlab ")
    assert len(data_rows(text)) == 100_000


def test_series_binomial_sign_skew_is_zero(capsys):
    code, out, _ = run(capsys, "series", "--op", "binomial", "--system", "signskew", "--N", "64")
    assert code == 0
    assert {r.split(",")[1] for r in data_rows(out)} == {"0.0"}


@pytest.mark.parametrize("op", ["subseq", "moving", "ud"])
def test_other_series_operators(capsys, tmp_path, op):
    path = tmp_path / "s.json"
    code, _, _ = run(capsys, "series", "--op", op, "--N", "500", "--count", "20", "--windows", "30",
                     "--json", str(path))
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["config"]["op"] == op and doc["version"]
    assert doc["result"]["rows"]


def test_invalid_alpha_is_a_config_error(capsys):
    code, _, err = run(capsys, "series", "--alpha", "1.5")
    assert code == 2
    assert "outside [0, 1)" in err


def test_config_file_fields_and_diagnostics(capsys, tmp_path):
    good = tmp_path / "c.json"
    good.write_text(json.dumps({"command": "series", "op": "cesaro", "N": 7}))
    code, out, _ = run(capsys, "series", "--config", str(good))
    assert code == 0 and len(data_rows(out)) == 7
    code, out, _ = run(capsys, "series", "--config", str(good), "--N", "3")
    assert len(data_rows(out)) == 3
    bad = tmp_path / "b.json"
    bad.write_text(json.dumps({"op": "cesaro", "horizon": 7}))
    code, _, err = run(capsys, "series", "--config", str(bad))
    assert code == 2 and "horizon" in err
    broken = tmp_path / "x.json"
    broken.write_text('{"op": "cesaro",\n "N": }')
    code, _, err = run(capsys, "series", "--config", str(broken))
    assert code == 2 and "line 2" in err


def test_witness_verdict_and_report(capsys, tmp_path):
    report = tmp_path / "r.json"
    samples = tmp_path / "s.csv"
    code, out, _ = run(capsys, "witness", "monotone_subsequence", "--indices", "20",
                       "--report", str(report), "--samples", str(samples))
    assert code == 0
    assert "settling index histogram" in out
    assert json.loads(report.read_text())["parameters"]["indices"] == 20
    assert samples.read_text().splitlines()[0].startswith("id,")


def test_witness_failure_exit_code(capsys):
    code, out, _ = run(capsys, "witness", "martingale_fluct", "--set", "max_n=3",
                       "--set", "random_functions=5",
                       "--set", 'tail_targets=[{"N0": 0, "N": 2, "equals": "3/4"}]')
    assert code == 1
    assert "FAIL" in out


def test_unknown_witness_lists_catalog(capsys):
    code, _, err = run(capsys, "witness", "nosuch")
    assert code == 2
    assert "barrier_coboundary" in err and "ud_nonmonotone" in err


def test_witness_unknown_parameter(capsys):
    code, _, err = run(capsys, "witness", "cesaro_gap", "--bogus", "1")
    assert code == 2 and "bogus" in err


def test_recurrence_verdicts(capsys, tmp_path):
    code, out, _ = run(capsys, "recurrence", "--expect", "reaches")
    assert code == 0 and "reaches" in out
    path = tmp_path / "t.csv"
    code, out, _ = run(capsys, "recurrence", "--seq", "SelfIntersection", "--n-max", "200000",
                       "--arc", "0.15", "0.85", "--budget", "30000", "--expect", "plateaus",
                       "--csv", str(path))
    assert code == 0 and "plateaus" in out
    assert len(data_rows(path.read_text())) == 30_001
    code, out, _ = run(capsys, "recurrence", "--arc", "0.3", "0.3", "--budget", "50",
                       "--csv", "-")
    assert {r.split(",")[2] for r in data_rows(out)} == {"0.0"}


def test_martingale_commands(capsys):
    code, out, _ = run(capsys, "martingale", "--op", "tail", "--N0", "0", "--N", "2",
                       "--equals", "1/4")
    assert code == 0 and "1/4" in out
    code, _, _ = run(capsys, "martingale", "--op", "condexp", "--N", "10")
    assert code == 0
    code, _, err = run(capsys, "martingale", "--op", "tail", "--N0", "0", "--N", "5000")
    assert code == 3 and "capacity" in err


def test_martingale_grid_csv_keeps_stdout_clean(capsys):
    code, out, err = run(capsys, "martingale", "--op", "grid", "--cells", "[[0,2],[0,3]]",
                         "--csv", "-")
    assert code == 0
    assert out.splitlines()[0].startswith("# fluctlab ")
    assert out.splitlines()[1] == "N0,N,fraction,fraction_exact"
    assert data_rows(out) == ["0,2,0.25,1/4", "0,3,0.25,1/4"]
    assert "tail fraction" in err
    code, _, _ = run(capsys, "martingale", "--op", "tail", "--csv", "-")
    assert code == 2


def test_convolve_ratios_and_l1(capsys, tmp_path):
    path = tmp_path / "c.json"
    code, out, _ = run(capsys, "convolve", "--x", "[0.00007]", "--l1", "--json", str(path))
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["result"]["l1_unit_indicator"]["3"] == "1/3"
    code, out, _ = run(capsys, "convolve", "--f", "rademacherstack", "--kernels", "16,1024",
                       "--samples", "3")
    assert code == 0 and len(data_rows(out)) == 6


def test_usage_errors(capsys):
    assert run(capsys, "series", "--op", "nope")[0] == 2
    assert run(capsys, "series", "--frobnicate")[0] == 2
    assert run(capsys)[0] == 2
