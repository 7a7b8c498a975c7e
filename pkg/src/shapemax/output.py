"""Bit-stable file writers and readers for run outputs.

All floats are written with 17 significant digits so parsing recovers the
exact binary value; line endings are LF.
"""
from __future__ import annotations

import os
from typing import Optional

import numpy as np

from .bundle import ActiveSet
from .descent import RunHistory
from .geometry import Mesh

HISTORY_HEADER = "iter,J_inf,J_2,n_active,epsilon,step,psi,wall_ms"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_history(history: RunHistory, path: str) -> None:
    lines = [HISTORY_HEADER]
    for r in history.records:
        lines.append(",".join([
            str(r.n), _fmt(r.J_inf), _fmt(r.J_2), str(r.n_active),
            _fmt(r.epsilon), _fmt(r.step), _fmt(r.psi), _fmt(r.wall_ms)]))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_history(path: str) -> dict:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != HISTORY_HEADER:
            raise ValueError(f"unexpected history header {header!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = HISTORY_HEADER.split(",")
    out = {c: np.array([float(row[i]) for row in rows])
           for i, c in enumerate(cols)}
    out["iter"] = out["iter"].astype(int)
    out["n_active"] = out["n_active"].astype(int)
    return out


def write_shape(mesh: Mesh, active: Optional[ActiveSet], path: str) -> None:
    """Closed boundary polygon, optionally with active-node coordinates.

    The polygon block repeats its first point at the end.  When an active
    set is given the file carries four columns; the shorter block is padded
    with empty fields.
    """
    polygon = mesh.boundary_polygon()
    polygon = np.vstack([polygon, polygon[:1]])
    if active is None:
        lines = ["x,y"]
        lines += [f"{_fmt(p[0])},{_fmt(p[1])}" for p in polygon]
    else:
        points = mesh.nodes[active.nodes]
        lines = ["x,y,active_x,active_y"]
        for i in range(max(len(polygon), len(points))):
            poly = (f"{_fmt(polygon[i][0])},{_fmt(polygon[i][1])}"
                    if i < len(polygon) else ",")
            act = (f"{_fmt(points[i][0])},{_fmt(points[i][1])}"
                   if i < len(points) else ",")
            lines.append(f"{poly},{act}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_vtk(mesh: Mesh, point_data: dict, path: str,
              title: str = "shapemax snapshot") -> None:
    """Legacy-VTK ASCII unstructured grid with per-node fields.

    point_data maps names to (N,) scalars or (N, 2) vectors.
    """
    lines = ["# vtk DataFile Version 3.0", title, "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_nodes} double"]
    lines += [f"{_fmt(p[0])} {_fmt(p[1])} 0" for p in mesh.nodes]
    m = mesh.n_triangles
    lines.append(f"CELLS {m} {4 * m}")
    lines += [f"3 {t[0]} {t[1]} {t[2]}" for t in mesh.triangles]
    lines.append(f"CELL_TYPES {m}")
    lines += ["5"] * m
    if point_data:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines += [_fmt(v) for v in values]
            else:
                lines.append(f"VECTORS {name} double")
                lines += [f"{_fmt(v[0])} {_fmt(v[1])} 0" for v in values]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report(results, path: str) -> None:
    lines = ["test,metric,value,pass"]
    for r in results:
        lines.append(f"{r.name},{r.metric},{_fmt(r.value)},"
                     f"{'true' if r.passed else 'false'}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def ensure_dir(path: str) -> None:
    if path:
        os.makedirs(path, exist_ok=True)
