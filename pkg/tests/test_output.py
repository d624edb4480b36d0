import numpy as np
import pytest

from chvisco.diagnostics import make_report
from chvisco.mesh import build_uniform_mesh
from chvisco.output import CSV_COLUMNS, CsvLog, read_csv, read_vtk, vertex_fields, write_vtk
from setups import cs_setup, dsav_setup


def test_vtk_round_trip(tmp_path):
    disc, model, ledger, cfg, s0, _ = cs_setup(n=5)
    fields = vertex_fields(s0)
    path = tmp_path / "s.vtk"
    write_vtk(path, disc.mesh, fields, "t=0")
    back = read_vtk(path)
    assert back["title"] == "t=0"
    assert np.array_equal(back["points"], disc.mesh.vertices)
    assert np.array_equal(back["triangles"], disc.mesh.triangles)
    for name, arr in fields.items():
        assert np.array_equal(back["point_data"][name], np.asarray(arr, dtype=float)), name


def test_vtk_rejects_bad_arrays(tmp_path):
    mesh = build_uniform_mesh(2, 2)
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "a.vtk", mesh, {"x": np.zeros(3)})
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "a.vtk", mesh, {"a b": np.zeros(mesh.num_vertices)})
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "a.vtk", mesh, {}, "two\nlines")


def test_csv_columns_and_blank_beta(tmp_path):
    disc, model, ledger, cfg, s0, _ = cs_setup(n=4)
    _, _, dcfg, d0, _ = dsav_setup(n=4)
    path = tmp_path / "log.csv"
    with CsvLog(path) as log:
        log.write(make_report(disc.mesh, model, s0, 0, cfg.lam, 0.5))
        log.write(make_report(disc.mesh, model, d0, 1, cfg.lam, 0.25, 2, 7))
    header = path.read_text().splitlines()[0].split(",")
    assert tuple(header) == CSV_COLUMNS
    data = read_csv(path)
    assert np.isnan(data["beta"][0]) and data["beta"][1] == d0.beta
    assert list(data["step"]) == [0, 1] and data["newton_iters_total"][1] == 7
    assert data["L"][1] == 0.25
