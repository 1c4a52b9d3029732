import json
import subprocess
import sys

import pytest

from opvd_lab import cli, ops
from opvd_lab.records import read_output


def test_run_passes_and_writes_json(tmp_path):
    assert cli.main(["gauss", "integrate", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "gaussian_integrator.integrate.json").read_text())
    assert doc["metadata"]["status"] == "pass"
    assert doc["result"]["value"] == [1.0, 0.0]


def test_run_with_module_and_params(tmp_path):
    params = tmp_path / "p.json"
    params.write_text(json.dumps({"n": 2, "xprime": [0.3, -0.1], "method": "monte_carlo", "samples": 20000}))
    rc = cli.main(["run", "--module", "gaussian_integrator", "--op", "integrate", "--params", str(params),
                   "--seed", "4", "--out", str(tmp_path), "--format", "csv"])
    assert rc == 0
    rec = read_output(tmp_path / "gaussian_integrator.integrate.csv")
    assert rec["metadata"]["seed"] == "4"
    assert rec["metadata"]["parameters"]["n"] == 2


def test_tadpole_csv_table(tmp_path):
    assert cli.main(["qft", "oneloop_tadpole", "--format", "csv", "--out", str(tmp_path)]) == 0
    rec = read_output(tmp_path / "scalar_qft.oneloop_tadpole.csv")
    cols, rows = rec["table"]
    assert cols == ["cutoff", "dressed", "undressed"]
    assert [r[0] for r in rows] == [4.0, 8.0, 16.0, 32.0]


def test_invariant_failure_exit_one(tmp_path, capsys):
    assert cli.main(["nuclear", "nuclearity_sum", "--out", str(tmp_path)]) == 1
    assert "partial_sums_cauchy_x0.5" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["gauss", "nope"],
    ["gauss"],
    ["run", "--module", "gauss"],
    ["run", "--module", "nowhere", "--op", "x"],
    ["bogus"],
    ["gauss", "integrate", "--format", "xml"],
])
def test_usage_errors(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 2


def test_unknown_parameter_and_bad_file(tmp_path):
    p = tmp_path / "p.json"
    p.write_text('{"zzz": 1}')
    assert cli.main(["gauss", "integrate", "--params", str(p), "--out", str(tmp_path)]) == 2
    p.write_text("[1, 2]")
    assert cli.main(["gauss", "integrate", "--params", str(p), "--out", str(tmp_path)]) == 2
    assert cli.main(["gauss", "integrate", "--params", str(tmp_path / "missing.json")]) == 2


def test_precondition_is_usage_error(tmp_path):
    p = tmp_path / "p.json"
    p.write_text('{"n": 1, "Q": [[-1.0]]}')
    assert cli.main(["gauss", "integrate", "--params", str(p), "--out", str(tmp_path)]) == 2


def test_report_aggregates_and_renders(tmp_path):
    cli.main(["qft", "oneloop_tadpole", "--format", "csv", "--out", str(tmp_path)])
    cli.main(["gauge", "vilkovisky", "--out", str(tmp_path)])
    assert cli.main(["report", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["status"] == "pass"
    topic = doc["topics"][ops.TOPICS["scalar_qft"]]["scalar_qft.oneloop_tadpole"]
    assert topic["format"] == "csv" and topic["plot"] == "scalar_qft.oneloop_tadpole.png"
    assert (tmp_path / "scalar_qft.oneloop_tadpole.png").read_bytes()[:4] == b"\x89PNG"
    assert (tmp_path / "gauge_geometry.vilkovisky.png").exists()
    cli.main(["nuclear", "nuclearity_sum", "--out", str(tmp_path)])
    assert cli.main(["report", str(tmp_path)]) == 1
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["failing"] == ["nuclearity.nuclearity_sum"]
    assert "fail (nuclearity.nuclearity_sum)" in (tmp_path / "report.txt").read_text()


def test_report_on_empty_directory(tmp_path):
    assert cli.main(["report", str(tmp_path)]) == 2
    assert cli.main(["report", str(tmp_path / "absent")]) == 2


def test_byte_identical_reruns(tmp_path):
    for d in ("a", "b"):
        for op in (["gauss", "gauge_toy", "--params"], ["measure", "positivity", "--params"]):
            p = tmp_path / f"{op[1]}.json"
            p.write_text('{"n": 2, "action": "quartic", "method": "monte_carlo", "samples": 5000}'
                         if op[1] == "gauge_toy" else '{"draws": 5}')
            cli.main(op[:2] + ["--params", str(p), "--seed", "9", "--out", str(tmp_path / d), "--format", "csv"])
        cli.main(["qft", "oneloop_tadpole", "--out", str(tmp_path / d)])
        cli.main(["report", str(tmp_path / d)])
    names = sorted(x.name for x in (tmp_path / "a").iterdir())
    assert "scalar_qft.oneloop_tadpole.png" in names
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes(), n


def test_seed_changes_monte_carlo(tmp_path):
    p = tmp_path / "p.json"
    p.write_text('{"n": 2, "xprime": [0.4, 0.2], "method": "monte_carlo", "samples": 5000}')
    outs = []
    for seed in ("1", "2"):
        cli.main(["gauss", "integrate", "--params", str(p), "--seed", seed, "--out", str(tmp_path / seed)])
        outs.append(json.loads((tmp_path / seed / "gaussian_integrator.integrate.json").read_text())["result"]["value"])
    assert outs[0] != outs[1]


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "opvd_lab.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "report" in r.stdout


def test_every_operation_has_topic():
    assert set(ops.REGISTRY) == set(ops.TOPICS)


def test_plain_serialisation():
    from fractions import Fraction

    import numpy as np

    from opvd_lab.records import canonical_json, config_hash, plain

    assert plain({"a": np.float64("nan"), "b": 1 + 2j, "c": Fraction(1, 3), "d": np.arange(2)}) == {
        "a": "nan", "b": [1.0, 2.0], "c": {"numerator": 1, "denominator": 3, "value": 1 / 3}, "d": [0, 1]}
    assert canonical_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
