import csv
import json

import jsonschema
import numpy as np
import pytest

from rcsphere import cli
from rcsphere.io import SpecFileError, instance_text, load_instance, parse_instance, save_instance, schema
from rcsphere.known import RcsKnown
from rcsphere.unknown import RcsUnknown

from conftest import knot_instance


def test_instance_round_trip(tmp_path):
    rcs = knot_instance()
    path = tmp_path / "inst.ini"
    save_instance(path, rcs)
    back = load_instance(path)
    assert np.array_equal(back.a.values, rcs.a.values)
    assert np.array_equal(back.b.knots, rcs.b.knots)
    assert back.d == rcs.d
    assert instance_text(back) == instance_text(rcs)


def test_closed_form_round_trip():
    for inst in (RcsKnown.baseline(5), RcsUnknown.shrinkage_constant_radius(3, 10), RcsUnknown.standard(3, 3)):
        back = parse_instance(instance_text(inst))
        assert type(back) is type(inst)
        assert back.a(2.0) == inst.a(2.0) and back.b(2.0) == inst.b(2.0)


@pytest.mark.parametrize("text", [
    "",
    "[instance]\np = 3\n",
    "[instance]\np = 3\nalpha = 0.05\n[a]\nkind = knots\ntail = constant\ntail_value = 1\nknots = 0, 1\nvalues = 2, 1\n[b]\nkind = constant\nvalue = 1\n",
    "[instance]\np = three\nalpha = 0.05\n",
])
def test_bad_instance_text(text):
    with pytest.raises(SpecFileError):
        parse_instance(text)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_cli_coverage_standard(tmp_path):
    out = tmp_path / "cov.csv"
    assert cli.main(["coverage", "--p", "3", "--spec", "standard", "--gamma-grid", "0:5:20", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["gamma", "coverage"]
    assert [float(r[0]) for r in rows[1:]] == [0, 5, 10, 15, 20]
    assert all(abs(float(r[1]) - 0.95) < 1e-6 for r in rows[1:])
    # 17 significant digits
    assert len(rows[1][1].replace(".", "").lstrip("0")) >= 15
    manifest = json.loads((tmp_path / "cov.csv.manifest.json").read_text())
    assert manifest["parameters"]["p"] == 3 and manifest["command"][1] == "coverage"


def test_cli_deterministic(tmp_path):
    args = ["coverage", "--p", "3", "--gamma-grid", "3,4", "--out"]
    cli.main(args + [str(tmp_path / "a.csv")])
    cli.main(args + [str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


def test_cli_baseline_dips(tmp_path):
    out = tmp_path / "cov.csv"
    cli.main(["coverage", "--p", "3", "--gamma-grid", "3.5:0.5:5", "--out", str(out)])
    assert min(float(r[1]) for r in read_csv(out)[1:]) < 0.95


def test_cli_sev(tmp_path):
    out = tmp_path / "sev.csv"
    assert cli.main(["sev", "--p", "3", "--spec", "standard", "--gamma-grid", "0,65", "--out", str(out)]) == 0
    assert all(abs(float(r[1]) - 1) < 1e-12 for r in read_csv(out)[1:])
    out2 = tmp_path / "sev2.csv"
    cli.main(["sev", "--case", "unknown", "--p", "3", "--m", "3", "--spec", "standard",
              "--gamma-grid", "0,5", "--out", str(out2)])
    assert all(abs(float(r[1]) - 1) < 1e-10 for r in read_csv(out2)[1:])


def test_cli_spec_file(tmp_path):
    path = tmp_path / "inst.ini"
    save_instance(path, knot_instance())
    out = tmp_path / "cov.csv"
    assert cli.main(["coverage", "--p", "3", "--spec", str(path), "--gamma-grid", "0,2", "--out", str(out)]) == 0


def test_cli_bad_spec_exit_code(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[instance]\np = 3\n")
    out = tmp_path / "x.csv"
    assert cli.main(["coverage", "--p", "3", "--spec", str(bad), "--out", str(out)]) == cli.EXIT_SPEC
    assert cli.main(["validate", "--spec", str(bad), "--n", "1000", "--out", str(tmp_path / "v.json")]) == 2
    assert cli.main(["coverage", "--p", "3", "--spec", str(tmp_path / "missing.ini"), "--out", str(out)]) == 2


def test_cli_table_rows():
    assert cli.parse_rows(1, "3", False) == [3]
    assert cli.parse_rows(2, "5:30", False) == [(5, 30)]
    assert cli.parse_rows(2, "3", False) == [(3, 3), (3, 10), (3, 30)]
    with pytest.raises(SpecFileError):
        cli.parse_rows(1, "20", False)
    assert cli.parse_rows(1, "20", True) == [20]
    with pytest.raises(SpecFileError):
        cli.parse_rows(1, "2", True)


def test_validate_report_schema(tmp_path):
    out = tmp_path / "v.json"
    path = tmp_path / "std.ini"
    save_instance(path, RcsKnown.standard(3))
    code = cli.main(["validate", "--spec", str(path), "--n", "20000", "--seed", "5", "--out", str(out)])
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, schema("validation"))
    assert code == (0 if doc["passed"] else 1)
    assert all("z" in c for c in doc["cells"])


def test_optimize_report_schema(tmp_path):
    report = tmp_path / "r.json"
    spec = tmp_path / "s.ini"
    code = cli.main(["optimize", "--case", "known-ab", "--p", "3", "--method", "slsqp", "--max-iters", "10",
                     "--multistart", "1", "--out-spec", str(spec), "--out-report", str(report)])
    assert code in (0, cli.EXIT_NON_CONVERGED)
    doc = json.loads(report.read_text())
    jsonschema.validate(doc, schema("report"))
    assert "audit" in doc
    assert isinstance(load_instance(spec), RcsKnown)


def test_grid_parser():
    assert np.allclose(cli.parse_grid("0:0.05:0.2"), [0, 0.05, 0.1, 0.15, 0.2])
    with pytest.raises(Exception):
        cli.parse_grid("1:0:2")
