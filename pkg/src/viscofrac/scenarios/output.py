"""Time series, the MSD metric, CSV and legacy VTK writers."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..fem.elements import element_type
from ..fem.mesh import Mesh

CSV_FORMAT = "%.11e"   # 12 significant digits


@dataclass
class TimeSeries:
    """Probe channels sampled at strictly increasing times."""

    times: list = field(default_factory=list)
    channels: dict = field(default_factory=dict)

    def append(self, t: float, **values) -> None:
        if self.times and not t > self.times[-1]:
            raise ValueError("times must increase strictly")
        if self.times and set(values) != set(self.channels):
            raise ValueError("every sample must provide the same channels")
        if not self.times:
            self.channels = {k: [] for k in values}
        self.times.append(float(t))
        for k, v in values.items():
            self.channels[k].append(float(v))

    def __len__(self) -> int:
        return len(self.times)

    def __getitem__(self, name: str) -> np.ndarray:
        if name == "time":
            return np.asarray(self.times)
        return np.asarray(self.channels[name])

    @property
    def names(self) -> list[str]:
        return ["time"] + list(self.channels)


def msd(a, b, normalization: str = "by_a") -> float:
    """sqrt(mean((aᵢ - bᵢ)² / nᵢ²)) with n = a or b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) == 0:
        raise ValueError("msd needs two non-empty sequences of equal length")
    if normalization == "by_a":
        norm = a
    elif normalization == "by_b":
        norm = b
    else:
        raise ValueError("normalization must be 'by_a' or 'by_b'")
    if np.any(norm == 0):
        raise ValueError("normalizing sequence has zero entries")
    return float(np.sqrt(np.mean((a - b) ** 2 / norm ** 2)))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def export_csv(series: TimeSeries, path, names=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = names or series.names
    with path.open("w") as fh:
        fh.write(",".join(names) + "\n")
        if len(series):
            data = np.column_stack([series[n] for n in names])
            np.savetxt(fh, data, fmt=CSV_FORMAT, delimiter=",")
    return path


def read_csv(path) -> TimeSeries:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path} is empty")
    names = lines[0].split(",")
    if names[0] != "time":
        raise ValueError("first CSV column must be 'time'")
    series = TimeSeries()
    for line in lines[1:]:
        if not line.strip():
            continue
        vals = [float(x) for x in line.split(",")]
        series.append(vals[0], **dict(zip(names[1:], vals[1:])))
    if not len(series):
        series.channels = {n: [] for n in names[1:]}
    return series


# ---------------------------------------------------------------------------
# VTK
# ---------------------------------------------------------------------------

def _pad3(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    out = np.zeros((len(a), 3))
    out[:, :a.shape[1]] = a
    return out


def export_vtk(mesh: Mesh, fields: dict, step: int, directory, prefix: str = "fields",
               cell_fields: dict | None = None) -> Path:
    """Write one legacy ASCII unstructured-grid file ``prefix_NNNNNN.vtk``.

    ``fields`` maps names to nodal arrays: 1-component scalars or
    (n_nodes, dim) vectors (padded to 3 components).  ``cell_fields`` holds
    per-element scalars.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{prefix}_{step:06d}.vtk"
    et = element_type(mesh.kind)
    pts = _pad3(mesh.nodes)
    out = ["# vtk DataFile Version 3.0", f"{prefix} step {step}", "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_nodes} double"]
    out += [f"{x:.11e} {y:.11e} {z:.11e}" for x, y, z in pts]
    ne, nen = mesh.elements.shape
    out.append(f"CELLS {ne} {ne * (nen + 1)}")
    out += [f"{nen} " + " ".join(map(str, row)) for row in mesh.elements]
    out.append(f"CELL_TYPES {ne}")
    out += [str(et.vtk_id)] * ne
    if fields:
        out.append(f"POINT_DATA {mesh.n_nodes}")
        for name, arr in fields.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1 and len(arr) == mesh.n_nodes:
                out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                out += [f"{v:.11e}" for v in arr]
            else:
                vec = _pad3(arr.reshape(mesh.n_nodes, -1))
                out.append(f"VECTORS {name} double")
                out += [f"{x:.11e} {y:.11e} {z:.11e}" for x, y, z in vec]
    if cell_fields:
        out.append(f"CELL_DATA {ne}")
        for name, arr in cell_fields.items():
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            out += [f"{v:.11e}" for v in np.asarray(arr, dtype=float)]
    path.write_text("\n".join(out) + "\n")
    return path


def read_vtk(path) -> dict:
    """Parse the subset of legacy ASCII VTK written by :func:`export_vtk`."""
    tokens = Path(path).read_text().split()
    if tokens[:5] != ["#", "vtk", "DataFile", "Version", "3.0"]:
        raise ValueError("not a legacy VTK file")
    i = tokens.index("DATASET")
    if tokens[i + 1] != "UNSTRUCTURED_GRID":
        raise ValueError("only unstructured grids are supported")
    out: dict = {"point_data": {}, "cell_data": {}}
    section = None
    i += 2
    while i < len(tokens):
        key = tokens[i]
        if key == "POINTS":
            n = int(tokens[i + 1])
            out["points"] = np.array(tokens[i + 3:i + 3 + 3 * n], dtype=float).reshape(n, 3)
            i += 3 + 3 * n
        elif key == "CELLS":
            n, size = int(tokens[i + 1]), int(tokens[i + 2])
            flat = np.array(tokens[i + 3:i + 3 + size], dtype=np.int64)
            cells, j = [], 0
            for _ in range(n):
                k = flat[j]
                cells.append(flat[j + 1:j + 1 + k])
                j += k + 1
            out["cells"] = np.array(cells)
            i += 3 + size
        elif key == "CELL_TYPES":
            n = int(tokens[i + 1])
            out["cell_types"] = np.array(tokens[i + 2:i + 2 + n], dtype=int)
            i += 2 + n
        elif key in ("POINT_DATA", "CELL_DATA"):
            section = ("point_data" if key == "POINT_DATA" else "cell_data", int(tokens[i + 1]))
            i += 2
        elif key == "SCALARS":
            where, n = section
            name = tokens[i + 1]
            ncomp = int(tokens[i + 3]) if tokens[i + 3].isdigit() else 1
            j = i + 4 if tokens[i + 3].isdigit() else i + 3
            if tokens[j] == "LOOKUP_TABLE":
                j += 2
            out[where][name] = np.array(tokens[j:j + n * ncomp], dtype=float)
            i = j + n * ncomp
        elif key == "VECTORS":
            where, n = section
            name = tokens[i + 1]
            out[where][name] = np.array(tokens[i + 3:i + 3 + 3 * n], dtype=float).reshape(n, 3)
            i += 3 + 3 * n
        else:
            raise ValueError(f"unexpected VTK token {key!r}")
    return out
