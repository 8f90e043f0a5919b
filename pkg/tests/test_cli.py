from __future__ import annotations

import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lpfilter import cli
from lpfilter.cli import SpecError, load_coefficients, main, parse_spec, parse_spec_text
from lpfilter.fir import ClsSpec, design_cls, design_linear_phase_lp
from lpfilter.grid import band_edges_from_f, build_grid, build_lowpass_desired
from lpfilter.iir_l2 import IirFilter
from lpfilter.irls import IrlsConfig
from lpfilter.kernels import impulse_to_amplitude, linear_phase_kernel

SPECS = Path(__file__).resolve().parents[1] / "specs"

STANDARD = """
[design]
kind = fir-lp
N = 21
type = I
[bands]
f_pass = 0.2
f_stop = 0.24
[lp]
p = 10
"""


def write(tmp_path, text, name="spec.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def read_summary(path):
    return dict(line.split(" = ", 1) for line in path.read_text().splitlines())


def test_parse_standard_spec():
    spec = parse_spec_text(STANDARD, "std")
    assert (spec.kind, spec.N, spec.type, spec.p, spec.grid_size) == ("fir-lp", 21, "I", 10.0, 336)
    assert spec.name == "std" and spec.transition == "dont-care"
    assert spec.config().p_des == 10.0


@pytest.mark.parametrize("edit, fragment", [
    (("p = 10", "p = 1.5"), "p must be >= 2"),
    (("f_stop = 0.24", "f_stop = 0.1"), "f_stop"),
    (("type = I", "type = V"), "type"),
    (("N = 21", "N = 20"), "type I"),
    (("[lp]", "[lp]\ncolour = red"), "colour"),
    (("[lp]", "[extra]\nx = 1\n[lp]"), "extra"),
])
def test_parse_rejects_bad_values(edit, fragment):
    with pytest.raises(SpecError) as info:
        parse_spec_text(STANDARD.replace(*edit))
    assert any(fragment in e for e in info.value.errors)


def test_parse_collects_all_errors():
    text = STANDARD.replace("p = 10", "p = 1.5").replace("f_stop = 0.24", "f_stop = 0.7")
    with pytest.raises(SpecError) as info:
        parse_spec_text(text)
    assert len(info.value.errors) >= 2


def test_parse_kind_specific_requirements():
    iir = "[design]\nkind = iir-lp\nN = 4\nM = 4\n[bands]\nf_pass = 0.2\nf_stop = 0.25\n"
    with pytest.raises(SpecError, match="delay"):
        parse_spec_text(iir)
    assert parse_spec_text(iir + "delay = 2\n").delay == 2.0
    cpx = STANDARD.replace("fir-lp", "fir-complex").replace("type = I\n", "")
    assert parse_spec_text(cpx).delay == 10.0
    assert parse_spec_text(STANDARD.replace("p = 10", "p = inf")).p == "inf"


def test_parse_missing_file(tmp_path):
    with pytest.raises(SpecError):
        parse_spec(tmp_path / "absent.ini")


def test_example_specs_parse():
    paths = sorted(SPECS.glob("*.ini"))
    assert len(paths) >= 8
    kinds = {parse_spec(p).kind for p in paths}
    assert {"fir-lp", "fir-cls", "iir-lp", "iir-mag"} <= kinds


def test_max_error_column_matches_library(tmp_path):
    path = write(tmp_path, STANDARD, "std.ini")
    assert main(["design", str(path), "--out", str(tmp_path), "--quiet"]) == 0
    d = build_lowpass_desired(build_grid(336), *band_edges_from_f(0.2, 0.24))
    filt, trace = design_linear_phase_lp(d, 21, "I", config=IrlsConfig(p_des=10))
    K = linear_phase_kernel(d.grid, 21, "I")
    err = K.matrix @ impulse_to_amplitude(filt.h, "I") - d.amplitude()
    header, rows = read_csv(tmp_path / "std_response.csv")
    col = np.array([float(r[header.index("error_abs")]) for r in rows])
    assert np.array_equal(col, np.abs(err))
    bands = [r[header.index("band")] for r in rows]
    assert bands.count("dont-care") == np.count_nonzero(~d.care)
    summary = read_summary(tmp_path / "std_summary.txt")
    assert float(summary["max_error"]) == np.abs(err[d.care]).max()
    assert summary["status"] == trace.status


def test_cls_summary_reports_constraints(tmp_path):
    path = SPECS / "lowpass_fir_cls.ini"
    assert main(["design", str(path), "--out", str(tmp_path), "--quiet"]) == 0
    spec = parse_spec(path)
    d = build_lowpass_desired(build_grid(spec.grid_size), *band_edges_from_f(spec.f_pass, spec.f_stop))
    _, _, report = design_cls(d, spec.N, spec.type, spec.cls)
    s = read_summary(tmp_path / "lowpass_fir_cls_summary.txt")
    assert s["status"] == report.status
    assert float(s["max_error_stop"]) == report.max_error["stop"]


def test_iir_mag_emits_three_stages(tmp_path):
    assert main(["design", str(SPECS / "lowpass_iir_mag.ini"), "--out", str(tmp_path),
                 "--quiet"]) == 0
    header, rows = read_csv(tmp_path / "lowpass_iir_mag_stages.csv")
    assert header[0] == "stage" and len(rows) == 3
    assert "warnings" not in header


def test_invalid_spec_exits_2_without_files(tmp_path, capsys):
    path = write(tmp_path, STANDARD.replace("p = 10", "p = 1.5"))
    out = tmp_path / "out"
    assert main(["design", str(path), "--out", str(out)]) == 2
    assert not out.exists()
    assert "p must be >= 2" in capsys.readouterr().err
    assert main(["design", str(tmp_path / "missing.ini"), "--out", str(out)]) == 2
    assert main([]) == 2


def test_design_failure_exits_1_with_summary(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise np.linalg.LinAlgError("singular")

    monkeypatch.setattr(cli, "design_linear_phase_lp", boom)
    path = write(tmp_path, STANDARD, "std.ini")
    assert main(["design", str(path), "--out", str(tmp_path), "--quiet"]) == 1
    s = read_summary(tmp_path / "std_summary.txt")
    assert s["status"] == "failed" and "singular" in s["error"]


@pytest.mark.parametrize("spec", ["lowpass_fir_lp.ini", "lowpass_iir_l2.ini"])
def test_coefficients_roundtrip(tmp_path, spec):
    assert main(["design", str(SPECS / spec), "--out", str(tmp_path), "--quiet"]) == 0
    stem = Path(spec).stem
    filt = load_coefficients(tmp_path / f"{stem}_coefficients.csv")
    header, rows = read_csv(tmp_path / f"{stem}_response.csv")
    f = np.array([float(r[0]) for r in rows])
    mag = np.array([float(r[header.index("magnitude")]) for r in rows])
    assert isinstance(filt, IirFilter) == ("iir" in spec)
    assert_allclose(np.abs(filt.response(2 * np.pi * f)), mag, rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        load_coefficients(tmp_path / f"{stem}_trace.csv")


def test_trace_flag_prints_table(tmp_path, capsys):
    path = write(tmp_path, STANDARD, "std.ini")
    assert main(["design", str(path), "--out", str(tmp_path), "--trace"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("iteration,p,sigma,lambda")
    assert "std: status=converged" in out
    header, rows = read_csv(tmp_path / "std_trace.csv")
    assert len(out.splitlines()) == len(rows) + 2


def test_quiet_and_timings(tmp_path, capsys):
    path = write(tmp_path, STANDARD, "std.ini")
    main(["design", str(path), "--out", str(tmp_path)])
    captured = capsys.readouterr()
    assert "finished in" in captured.err and "finished in" not in captured.out
    main(["design", str(path), "--out", str(tmp_path), "--quiet"])
    captured = capsys.readouterr()
    assert captured.out == "" and captured.err == ""


def test_strict_flags_infeasible_constraints(tmp_path):
    text = STANDARD.replace("fir-lp", "fir-cls").replace("[lp]\np = 10", "[cls]\ntau = 0.05")
    path = write(tmp_path, text, "tight.ini")
    args = ["design", str(path), "--out", str(tmp_path), "--quiet"]
    assert main(args) == 0
    assert read_summary(tmp_path / "tight_summary.txt")["status"] == "constraint-infeasible"
    assert main(args + ["--strict"]) == 1


def test_jobs_gives_same_files(tmp_path):
    paths = [str(SPECS / n) for n in ("lowpass_fir_lp.ini", "lowpass_fir_mag.ini")]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["design", *paths, "--out", str(a), "--quiet"]) == 0
    assert main(["design", *paths, "--out", str(b), "--quiet", "--jobs", "2"]) == 0
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes()
    assert main(["design", *paths, "--jobs", "0"]) == 2


def test_module_entry_point(tmp_path):
    path = write(tmp_path, STANDARD, "std.ini")
    proc = subprocess.run([sys.executable, "-m", "lpfilter", "design", str(path),
                           "--out", str(tmp_path), "--quiet"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "std_coefficients.csv").exists()


def test_cls_spec_matches_library():
    spec = parse_spec(SPECS / "step_fir_cls.ini")
    assert isinstance(spec.cls, ClsSpec) and spec.cls.mode == "induced-band"
