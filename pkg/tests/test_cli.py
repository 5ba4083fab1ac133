import csv
import io
import json
import subprocess
import sys

import pytest

from qloss.cli import main


def _rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_preimage_row_contract(tmp_path):
    out = tmp_path / "pre.csv"
    rc = main(["preimage", "--modes", "5", "--etas", "0.8:1.0:21", "--samples", "500", "--seed", "7", "--out", str(out)])
    assert rc == 0
    rows = _rows(out)
    assert len(rows) == 42
    for r in rows:
        if r["design"] == "rect":
            assert r["avg_fidelity"] == r["min_mode_fidelity"] == r["max_mode_fidelity"]
        if float(r["eta"]) == 1.0:
            assert float(r["avg_fidelity"]) == 1.0
    text = out.read_text()
    assert text.startswith("# qloss ")
    assert "# invocation: qloss preimage --modes 5 --etas 0.8:1.0:21" in text


def test_postselected_rect_column(tmp_path):
    out = tmp_path / "ps.csv"
    assert main(["postselected", "-m", "8", "--loss-db", "0,0.25,0.5", "--samples", "30", "--out", str(out)]) == 0
    rows = _rows(out)
    for r in rows:
        if r["design"] == "rect" or float(r["loss_db"]) == 0:
            assert abs(float(r["mean_fidelity"]) - 1) < 1e-12


def test_distill_table(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["distill", "-N", "3,4", "--etas", "0.5,0.9,1.0", "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 12
    rect = {(r["N"], r["eta"]): r for r in rows if r["design"] == "rect"}
    tri = {(r["N"], r["eta"]): r for r in rows if r["design"] == "tri"}
    for key, r in rect.items():
        assert float(r["abs_diff"]) < 1e-6
        assert float(tri[key]["lambda_simulated"]) >= float(r["lambda_simulated"])
        if float(r["eta"]) == 1.0:
            assert float(r["lambda_simulated"]) == 1.0
    assert all(r["p_s_closed_form"] == "" for r in tri.values())


def test_thread_count_does_not_change_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["postselected", "-m", "6", "--loss-db", "0:0.5:6", "--samples", "20", "--seed", "3"]
    assert main(base + ["--threads", "1", "--out", str(a)]) == 0
    assert main(base + ["--threads=4", "--out", str(b)]) == 0
    assert a.read_bytes().replace(b"a.csv", b"x") == b.read_bytes().replace(b"b.csv", b"x")


def test_ghz_single_point(capsys):
    assert main(["ghz", "--etas", "0.9848"]) == 0
    payload = json.loads(capsys.readouterr().out)
    pt = payload["points"][0]
    assert pt["alpha"] == pytest.approx(0.7969, abs=5e-4)
    errs = sorted(pt["stabilizer_errors"].values())
    assert len(errs) == 7
    assert all(abs(e) < 1e-9 for e in errs[:3])
    assert all(e == pytest.approx(1.3e-4, abs=0.2e-4) for e in errs[3:])
    assert payload["fit"] is None


def test_ghz_grid_has_fit(tmp_path):
    out, svg, rho = tmp_path / "g.json", tmp_path / "g.svg", tmp_path / "rho.csv"
    rc = main(["ghz", "--loss-db", "0.02:0.3:8", "--out", str(out), "--svg", str(svg), "--rho-out", str(rho)])
    assert rc == 0
    fit = json.loads(out.read_text())["fit"]
    assert fit["exponent"] == pytest.approx(1.984, abs=0.05)
    assert svg.read_text().startswith("<svg")
    assert "row_state,col_state,re,im" in rho.read_text()


def test_svg_format(tmp_path):
    out = tmp_path / "p.svg"
    assert main(["preimage", "--samples", "5", "--format", "svg", "--out", str(out)]) == 0
    assert "<polyline" in out.read_text()


@pytest.mark.parametrize(
    "argv",
    [
        ["distill", "-N", "6"],
        ["preimage", "--etas", "1:2"],
        ["preimage", "--etas", "0.5,1.5"],
        ["preimage", "--etas", "0.5", "--loss-db", "0.1"],
        ["preimage", "--threads", "0"],
        ["ghz", "--ports", "1,2,3"],
        ["ghz", "--design", "both"],
        ["postselected", "--out", "/nonexistent/dir/x.csv"],
    ],
)
def test_bad_config_exit_code(argv):
    assert main(argv) == 1


def test_usage_error_exits_with_config_code():
    with pytest.raises(SystemExit) as exc:
        main(["preimage", "--design", "hex"])
    assert exc.value.code == 1


def test_selftest_subprocess():
    res = subprocess.run([sys.executable, "-m", "qloss", "selftest"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "7/7 checks passed" in res.stdout
