"""Meshes, built-in generators and a plain-text mesh format.

Text format (``#`` starts a comment, blank lines ignored)::

    kind quad4
    dim 2
    nodes 4
    0.0 0.0
    ...
    elements 1
    0 1 2 3
    set left 2
    0 3

Node and element indices are zero-based.  Each ``set`` line names a node
group and gives its size; its ids follow on one or more lines.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .elements import element_type


@dataclass
class Mesh:
    nodes: np.ndarray
    elements: np.ndarray
    kind: str
    node_sets: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.ndim == 1:
            self.nodes = self.nodes[:, None]
        self.elements = np.asarray(self.elements, dtype=np.int64)
        et = element_type(self.kind)
        if self.nodes.shape[1] != et.dim:
            raise ValueError("node coordinates do not match the element dimension")
        if self.elements.ndim != 2 or self.elements.shape[1] != et.n_nodes:
            raise ValueError(f"{self.kind} elements need {et.n_nodes} nodes each")
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= len(self.nodes)):
            raise ValueError("connectivity refers to missing nodes")
        self.node_sets = {k: np.asarray(v, dtype=np.int64) for k, v in self.node_sets.items()}

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def node_set(self, name: str) -> np.ndarray:
        try:
            return self.node_sets[name]
        except KeyError:
            raise KeyError(f"mesh has no node set {name!r}") from None

    def boundary_edges(self, name: str) -> np.ndarray:
        """Element edges whose nodes all belong to the named node set."""
        members = np.zeros(self.n_nodes, dtype=bool)
        members[self.node_set(name)] = True
        et = element_type(self.kind)
        edges = []
        for loc in et.edges:
            nodes = self.elements[:, loc]
            mask = members[nodes].all(axis=1)
            edges.extend(nodes[mask])
        return np.array(edges, dtype=np.int64).reshape(-1, len(et.edges[0]) if et.edges else 1)

    def nearest_node(self, point) -> int:
        return int(np.argmin(np.linalg.norm(self.nodes - np.asarray(point, dtype=float), axis=1)))


# ---------------------------------------------------------------------------
# Text I/O
# ---------------------------------------------------------------------------

def write_mesh(mesh: Mesh, path) -> None:
    lines = [f"kind {mesh.kind}", f"dim {mesh.dim}", f"nodes {mesh.n_nodes}"]
    lines += [" ".join(f"{c:.17g}" for c in row) for row in mesh.nodes]
    lines.append(f"elements {mesh.n_elements}")
    lines += [" ".join(str(i) for i in row) for row in mesh.elements]
    for name, ids in mesh.node_sets.items():
        lines.append(f"set {name} {len(ids)}")
        lines.append(" ".join(str(i) for i in ids))
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    tokens = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            tokens.append(line.split())
    header = {}
    i = 0
    nodes, elements, sets = None, None, {}
    while i < len(tokens):
        tok = tokens[i]
        key = tok[0]
        if key in ("kind", "dim"):
            header[key] = tok[1]
            i += 1
        elif key == "nodes":
            n = int(tok[1])
            nodes = np.array([[float(x) for x in row] for row in tokens[i + 1:i + 1 + n]])
            i += 1 + n
        elif key == "elements":
            n = int(tok[1])
            elements = np.array([[int(x) for x in row] for row in tokens[i + 1:i + 1 + n]])
            i += 1 + n
        elif key == "set":
            name, n = tok[1], int(tok[2])
            ids: list[int] = []
            i += 1
            while len(ids) < n:
                ids.extend(int(x) for x in tokens[i])
                i += 1
            sets[name] = np.array(ids)
        else:
            raise ValueError(f"unrecognised mesh line: {' '.join(tok)}")
    if nodes is None or elements is None or "kind" not in header:
        raise ValueError("mesh file needs kind, nodes and elements sections")
    return Mesh(nodes, elements, header["kind"], sets)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def bar_mesh(length: float, n_el: int) -> Mesh:
    x = np.linspace(0.0, length, n_el + 1)
    conn = np.column_stack([np.arange(n_el), np.arange(1, n_el + 1)])
    return Mesh(x[:, None], conn, "bar2", {"left": [0], "right": [n_el]})


def _cells_to_mesh(xn: np.ndarray, yn: np.ndarray, active: np.ndarray, kind: str) -> Mesh:
    """Build a mesh from a structured grid of cells, keeping active ones.

    ``xn``/``yn`` are nodal coordinate arrays of shape (ny+1, nx+1) and
    ``active`` flags the (ny, nx) cells.
    """
    ny, nx = active.shape
    if kind == "quad8":
        # refine the grid: corner nodes at even indices, midside at odd
        X = np.zeros((2 * ny + 1, 2 * nx + 1))
        Y = np.zeros_like(X)
        X[::2, ::2], Y[::2, ::2] = xn, yn
        X[1::2, ::2], Y[1::2, ::2] = 0.5 * (xn[:-1] + xn[1:]), 0.5 * (yn[:-1] + yn[1:])
        X[::2, 1::2], Y[::2, 1::2] = 0.5 * (xn[:, :-1] + xn[:, 1:]), 0.5 * (yn[:, :-1] + yn[:, 1:])
        gid = -np.ones(X.shape, dtype=np.int64)
        used = np.zeros(X.shape, dtype=bool)
        conns = []
        for j in range(ny):
            for i in range(nx):
                if not active[j, i]:
                    continue
                J, I = 2 * j, 2 * i
                loc = [(J, I), (J, I + 2), (J + 2, I + 2), (J + 2, I),
                       (J, I + 1), (J + 1, I + 2), (J + 2, I + 1), (J + 1, I)]
                for a in loc:
                    used[a] = True
                conns.append(loc)
        gid[used] = np.arange(used.sum())
        nodes = np.column_stack([X[used], Y[used]])
        conn = np.array([[gid[a] for a in loc] for loc in conns])
        return Mesh(nodes, conn, kind)
    used = np.zeros(xn.shape, dtype=bool)
    for j in range(ny):
        for i in range(nx):
            if active[j, i]:
                used[j:j + 2, i:i + 2] = True
    gid = -np.ones(xn.shape, dtype=np.int64)
    gid[used] = np.arange(used.sum())
    nodes = np.column_stack([xn[used], yn[used]])
    conn = []
    for j in range(ny):
        for i in range(nx):
            if not active[j, i]:
                continue
            a, b, c, d = gid[j, i], gid[j, i + 1], gid[j + 1, i + 1], gid[j + 1, i]
            if kind == "quad4":
                conn.append([a, b, c, d])
            elif kind == "tri3":
                # alternate the diagonal to avoid a directional bias
                if (i + j) % 2 == 0:
                    conn += [[a, b, c], [a, c, d]]
                else:
                    conn += [[a, b, d], [b, c, d]]
            else:
                raise ValueError(f"unsupported 2D element kind {kind!r}")
    return Mesh(nodes, np.array(conn), kind)


def _add_edge_sets(mesh: Mesh, tol: float = 1e-12) -> Mesh:
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    span = max(np.ptp(x), np.ptp(y))
    eps = tol * span
    sets = {
        "left": np.flatnonzero(x <= x.min() + eps),
        "right": np.flatnonzero(x >= x.max() - eps),
        "bottom": np.flatnonzero(y <= y.min() + eps),
        "top": np.flatnonzero(y >= y.max() - eps),
    }
    left = sets["left"]
    sets["left_anchor"] = np.array([left[np.argmin(np.abs(y[left] - np.median(y[left])))]])
    sets.update(mesh.node_sets)
    mesh.node_sets = sets
    return mesh


def rectangle_mesh(lx: float, ly: float, nx: int, ny: int, kind: str = "quad4") -> Mesh:
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(-ly / 2, ly / 2, ny + 1)
    xn, yn = np.meshgrid(xs, ys)
    return _add_edge_sets(_cells_to_mesh(xn, yn, np.ones((ny, nx), dtype=bool), kind))


def i_shape_mesh(h: float = 2.5e-3, kind: str = "quad4", end_length: float = 20e-3,
                 end_width: float = 30e-3, gauge_length: float = 45e-3,
                 gauge_width: float = 15e-3) -> Mesh:
    """I-shaped specimen: two wide grip blocks joined by a narrow gauge.

    All dimensions must be multiples of the cell size ``h``.  The defaults
    give 300 cells for h = 2.5 mm and 75 cells for h = 5 mm.
    """
    total = 2 * end_length + gauge_length
    dims = np.array([end_length, end_width, gauge_length, gauge_width]) / h
    if not np.allclose(dims, np.round(dims)):
        raise ValueError("specimen dimensions must be multiples of the cell size")
    nx = int(round(total / h))
    ny = int(round(end_width / h))
    xs = np.linspace(0.0, total, nx + 1)
    ys = np.linspace(-end_width / 2, end_width / 2, ny + 1)
    xn, yn = np.meshgrid(xs, ys)
    xc = 0.5 * (xs[:-1] + xs[1:])
    yc = 0.5 * (ys[:-1] + ys[1:])
    XC, YC = np.meshgrid(xc, yc)
    in_end = (XC < end_length) | (XC > end_length + gauge_length)
    in_gauge = np.abs(YC) < gauge_width / 2
    mesh = _cells_to_mesh(xn, yn, in_end | in_gauge, kind)
    mesh = _add_edge_sets(mesh)
    mesh.node_sets["probe"] = np.array([mesh.nearest_node([total / 2, 0.0])])
    return mesh


def dogbone_mesh(nx: int = 50, ny: int = 5, kind: str = "tri3", length: float = 115e-3,
                 grip_width: float = 25e-3, gauge_width: float = 6e-3,
                 gauge_length: float = 33e-3, transition: float = 20e-3) -> Mesh:
    """Tensile dogbone with smooth transitions, meshed on a mapped grid.

    The half-width follows a cosine blend from the gauge to the grips, and
    the grid is graded so that half of the columns sit in the gauge region.
    """
    # arc-length-like parameter that concentrates columns in the gauge
    s = np.linspace(-1.0, 1.0, nx + 1)
    g = gauge_length / length
    xs = length / 2 * (1.0 + np.sign(s) * np.where(
        np.abs(s) <= 0.5, np.abs(s) * 2 * g,
        g + (np.abs(s) - 0.5) * 2 * (1.0 - g)))
    xm = xs - length / 2
    a = gauge_length / 2
    b = a + transition
    blend = np.clip((np.abs(xm) - a) / (b - a), 0.0, 1.0)
    half = 0.5 * (gauge_width + (grip_width - gauge_width) * 0.5 * (1 - np.cos(np.pi * blend)))
    eta = np.linspace(-1.0, 1.0, ny + 1)
    xn = np.tile(xs, (ny + 1, 1))
    yn = eta[:, None] * half[None, :]
    mesh = _cells_to_mesh(xn, yn, np.ones((ny, nx), dtype=bool), kind)
    mesh = _add_edge_sets(mesh)
    mesh.node_sets["probe"] = np.array([mesh.nearest_node([length / 2, 0.0])])
    return mesh
