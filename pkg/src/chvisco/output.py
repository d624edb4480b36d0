"""VTK legacy ASCII snapshots and the per-step CSV time series."""

from __future__ import annotations

import csv
import os

import numpy as np

from .diagnostics import StepReport

CSV_COLUMNS = StepReport.CSV_COLUMNS


def _fmt(x) -> str:
    return format(float(x), ".17g")


def vertex_fields(state) -> dict:
    """Point data written for a state: phi, mu, det F, F components, velocity at vertices."""
    V = state.disc.mesh.num_vertices
    F = np.asarray(state.F).reshape(V, 4)
    out = {
        "phi": np.asarray(state.phi),
        "mu": np.asarray(state.mu),
        "detF": F[:, 0] * F[:, 3] - F[:, 1] * F[:, 2],
        "F_xx": F[:, 0],
        "F_xy": F[:, 1],
        "F_yx": F[:, 2],
        "F_yy": F[:, 3],
    }
    v = np.asarray(state.v).reshape(-1, 2)[:V]  # P2 vertex nodes come first
    out["v"] = v
    return out


def write_vtk(path, mesh, point_data: dict, title: str = "chvisco") -> None:
    """Unstructured grid of triangles; 1D arrays become SCALARS, (V, 2) arrays VECTORS."""
    if "\n" in title:
        raise ValueError("title must be a single line")
    V, T = mesh.num_vertices, mesh.num_triangles
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {V} double"]
    lines += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {T} {4 * T}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {T}")
    lines += ["5"] * T
    lines.append(f"POINT_DATA {V}")
    for name, arr in point_data.items():
        arr = np.asarray(arr, dtype=float)
        if " " in name:
            raise ValueError("array names cannot contain spaces")
        if arr.shape == (V,):
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_fmt(x) for x in arr]
        elif arr.shape == (V, 2):
            lines.append(f"VECTORS {name} double")
            lines += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in arr]
        else:
            raise ValueError(f"point array {name!r} has shape {arr.shape}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk(path) -> dict:
    """Parse what ``write_vtk`` produces: title, points, triangles and point data."""
    with open(path, encoding="ascii") as fh:
        tokens_by_line = [ln.split() for ln in fh.read().splitlines()]
    title = " ".join(tokens_by_line[1])
    it = iter(tokens_by_line[4:])
    out = {"title": title, "point_data": {}}
    V = None
    for tok in it:
        if not tok:
            continue
        key = tok[0]
        if key == "POINTS":
            V = int(tok[1])
            pts = np.array([next(it) for _ in range(V)], dtype=float)
            out["points"] = pts[:, :2]
        elif key == "CELLS":
            T = int(tok[1])
            cells = np.array([next(it) for _ in range(T)], dtype=np.int64)
            if np.any(cells[:, 0] != 3):
                raise ValueError("only triangle cells are supported")
            out["triangles"] = cells[:, 1:]
        elif key == "CELL_TYPES":
            for _ in range(int(tok[1])):
                next(it)
        elif key == "POINT_DATA":
            continue
        elif key == "SCALARS":
            next(it)  # LOOKUP_TABLE
            out["point_data"][tok[1]] = np.array([float(next(it)[0]) for _ in range(V)])
        elif key == "VECTORS":
            out["point_data"][tok[1]] = np.array([next(it)[:2] for _ in range(V)], dtype=float)
        else:
            raise ValueError(f"unexpected VTK keyword {key!r}")
    return out


class CsvLog:
    """One row per step; floats keep 17 significant digits, beta is blank for CS runs."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="", encoding="ascii")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(CSV_COLUMNS)

    def write(self, report: StepReport) -> None:
        row = []
        for col in CSV_COLUMNS:
            val = getattr(report, col)
            if val is None:
                row.append("")
            elif isinstance(val, (int, np.integer)) and not isinstance(val, bool):
                row.append(str(int(val)))
            else:
                row.append(_fmt(val))
        self._writer.writerow(row)
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path) -> dict:
    """Columns of a run log as float arrays (blank cells become nan)."""
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) if r[i] else np.nan for r in body]) for i, name in enumerate(header)}


def snapshot_path(out_dir, step: int) -> str:
    return os.path.join(out_dir, f"state_{step:06d}.vtk")
