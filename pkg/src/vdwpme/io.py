"""CSV and legacy VTK writers for snapshots and diagnostics."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

SNAPSHOT_HEADER = ("x", "y", "c", "chat")
DIAGNOSTICS_FIELDS = (
    "step", "time", "c_min", "c_max", "chat_min", "chat_max", "mass",
    "picard_iterations", "converged", "picard_error", "blowup",
)


def _g(v) -> str:
    return format(float(v), ".17g")


def _open(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_csv(snapshot, path) -> None:
    """One row per node in row-major node order: x, y, c, chat."""
    xy = snapshot.mesh.coords
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SNAPSHOT_HEADER)
        for (x, y), c, ch in zip(xy, snapshot.c, snapshot.chat):
            w.writerow((_g(x), _g(y), _g(c), _g(ch)))


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = list(zip(*body)) if body else [[] for _ in header]
    return {name: np.array([float(v) for v in col]) for name, col in zip(header, cols)}


def support_column(theta: float) -> str:
    return f"support_{theta:.0e}"


def write_diagnostics_csv(records, path) -> None:
    thetas = list(records[0].support) if records else []
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(DIAGNOSTICS_FIELDS[:7]) + [support_column(t) for t in thetas]
                   + list(DIAGNOSTICS_FIELDS[7:]))
        for r in records:
            w.writerow(
                [r.step, _g(r.time), _g(r.c_min), _g(r.c_max), _g(r.chat_min), _g(r.chat_max), _g(r.mass)]
                + [_g(r.support.get(t, float("nan"))) for t in thetas]
                + [r.picard_iterations, int(r.converged), _g(r.picard_error), int(r.blowup)]
            )


def write_vtk(snapshot, path) -> None:
    """Legacy ASCII STRUCTURED_POINTS file with point scalars ``c`` and ``chat``."""
    m = snapshot.mesh
    lines = [
        "# vtk DataFile Version 3.0",
        f"step {snapshot.step} time {_g(snapshot.time)}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {m.nx + 1} {m.ny + 1} 1",
        f"ORIGIN {_g(m.domain_min[0])} {_g(m.domain_min[1])} 0",
        f"SPACING {_g(m.h_x)} {_g(m.h_y)} 1",
        f"POINT_DATA {m.n_nodes}",
    ]
    for name, arr in (("c", snapshot.c), ("chat", snapshot.chat)):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_g(v) for v in arr)
    with _open(path) as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk(path) -> dict:
    """Minimal reader for files produced by write_vtk."""
    tokens = Path(path).read_text().split("\n")
    out = {"header": tokens[0], "scalars": {}}
    it = iter(tokens[1:])
    for line in it:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "DIMENSIONS":
            out["dimensions"] = tuple(int(p) for p in parts[1:])
        elif parts[0] in ("ORIGIN", "SPACING"):
            out[parts[0].lower()] = tuple(float(p) for p in parts[1:])
        elif parts[0] == "POINT_DATA":
            out["point_data"] = int(parts[1])
        elif parts[0] == "SCALARS":
            next(it)  # LOOKUP_TABLE
            out["scalars"][parts[1]] = np.array([float(next(it)) for _ in range(out["point_data"])])
        elif parts[0] == "DATASET":
            out["dataset"] = parts[1]
    return out
