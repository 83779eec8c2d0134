import csv

import numpy as np
import pytest

from degdiff.bench import lookup
from degdiff.cli import InputError, RunConfig, read_case_file, run, write_csv, write_report, write_vtk
from degdiff.mesh import generate_structured_rect


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_vtk_single_quad(tmp_path):
    mesh = generate_structured_rect(0, 0, 1, 1, 2, 2, "quad")
    path = tmp_path / "q.vtk"
    write_vtk(mesh, {"concentration": np.zeros(4)}, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert "ASCII" in lines and "DATASET UNSTRUCTURED_GRID" in lines
    assert any(line.startswith("POINTS 4 ") for line in lines)
    assert "CELLS 1 5" in lines
    types = lines[lines.index("CELL_TYPES 1") + 1]
    assert types == "9"
    k = lines.index("SCALARS concentration double 1")
    assert lines[k + 1] == "LOOKUP_TABLE default"
    assert [float(v) for v in lines[k + 2 : k + 6]] == [0.0] * 4


def test_vtk_triangles_and_vectors(tmp_path):
    mesh = generate_structured_rect(0, 0, 1, 1, 3, 3, "tri")
    path = tmp_path / "t.vtk"
    write_vtk(mesh, {"displacement": np.ones((mesh.n_nodes, 2))}, path)
    text = path.read_text()
    assert f"CELL_TYPES {mesh.n_elements}\n" + "5\n" * mesh.n_elements in text
    assert "VECTORS displacement double\n1 1 0\n" in text.replace(".0", "")
    with pytest.raises(ValueError):
        write_vtk(mesh, {"c": np.zeros(3)}, tmp_path / "bad.vtk")


def test_writers_surface_path_on_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        write_csv([{"a": 1}], blocker / "x.csv")


def test_report_holds_every_field(tmp_path):
    rep = lookup("decoupled_smoke").run()
    path = tmp_path / "r.txt"
    write_report(rep, path)
    keys = {line.split(" = ")[0] for line in path.read_text().splitlines()}
    for name in ("converged", "iterations", "dc_history", "qp_iterations", "min_c", "max_c", "degradation_index", "u", "c", "relative_modulus"):
        assert name in keys


def test_run_plate_galerkin_row(tmp_path, capsys):
    code = run(["run", "--case", "plate_with_hole", "--row", "5", "--formulation", "galerkin", "--out", str(tmp_path)])
    assert code == 0
    rows = _read_csv(tmp_path / "plate_with_hole_row5_galerkin.csv")
    assert float(rows[0]["min_c"]) < 0 and float(rows[0]["degradation_index"]) > 0
    assert int(rows[0]["iterations"]) >= 1


def test_run_decoupled_smoke(tmp_path, capsys):
    assert run(["run", "--case", "decoupled_smoke", "--out", str(tmp_path), "--format", "csv,report,vtk"]) == 0
    row = _read_csv(tmp_path / "decoupled_smoke_nonneg.csv")[0]
    assert row["iterations"] == "2" and row["converged"] == "True"
    assert (tmp_path / "decoupled_smoke_nonneg.vtk").exists()
    assert "iterations=2" in capsys.readouterr().out


def test_run_convergence_study_writes_rates(tmp_path, capsys):
    assert run(["run", "--case", "convergence_q4", "--out", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / "convergence_q4_rates.csv")
    assert [r["nodes_per_side"] for r in rows] == ["5", "9", "17", "33"]
    assert {"rate_l2_u", "rate_h1_c"} <= set(rows[0])


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--case", "nonexistent"],
        ["run", "--case", "decoupled_smoke", "--bogus"],
        ["run"],
        ["run", "--case", "decoupled_smoke", "--tol", "-1"],
        ["run", "--case", "decoupled_smoke", "--format", "pdf"],
        ["run", "--case", "fixed_beam", "--row", "7"],
        ["run", "--case", "convergence_q4", "--row", "1"],
    ],
)
def test_input_errors_exit_1(tmp_path, capsys, argv):
    assert run(argv + ["--out", str(tmp_path)] if len(argv) > 1 else argv) == 1
    assert "error" in capsys.readouterr().err


def test_unwritable_output_exit_1(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run(["run", "--case", "decoupled_smoke", "--out", str(blocker / "sub")]) == 1
    assert str(blocker) in capsys.readouterr().err


def test_non_convergence_exit_2(tmp_path, capsys):
    case_file = tmp_path / "short.ini"
    case_file.write_text("[case]\nbase = fixed_beam\nrow = 3\nmax_iters = 2\n")
    assert run(["run", "--case-file", str(case_file), "--out", str(tmp_path)]) == 2


def test_case_file_with_params(tmp_path, capsys):
    case_file = tmp_path / "fixed.ini"
    case_file.write_text("[case]\nbase = fixed_beam\nname = my_fixed\n\n[params]\nphi_t = 1\n")
    base, row, params, overrides = read_case_file(case_file)
    assert (base, row, params, overrides["name"]) == ("fixed_beam", None, {"phi_t": 1.0}, "my_fixed")
    assert run(["run", "--case-file", str(case_file), "--out", str(tmp_path)]) == 0
    assert _read_csv(tmp_path / "my_fixed_row1_nonneg.csv")[0]["iterations"] == "2"


def test_case_file_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[case]\nbase = fixed_beam\ncolour = red\n")
    with pytest.raises(InputError, match="colour"):
        read_case_file(bad)
    with pytest.raises(InputError):
        read_case_file(tmp_path / "missing.ini")


def test_run_config_validation():
    with pytest.raises(InputError):
        RunConfig()
    with pytest.raises(InputError):
        RunConfig(case="x", case_file="y")
    with pytest.raises(InputError):
        RunConfig(case="x", jobs=0)


def test_deterministic_outputs_byte_identical(tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        argv = ["run", "--case", "fixed_beam", "--out", str(out), "--deterministic", "--format", "csv,report,vtk"]
        assert run(argv) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    assert "fixed_beam_sweep.csv" in names
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
