"""Isoparametric element library: shape functions and quadrature rules."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def gauss_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gauss_square(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_1d(n)
    # eta varies slowest so points run row by row
    xi, eta = np.meshgrid(x, x)
    pts = np.column_stack([xi.ravel(), eta.ravel()])
    wts = np.outer(w, w).ravel()
    return pts, wts


@dataclass(frozen=True)
class ElementType:
    name: str
    dim: int
    n_nodes: int
    vtk_id: int
    shape: Callable[[np.ndarray], np.ndarray]    # (nq, d) -> (nq, nen)
    dshape: Callable[[np.ndarray], np.ndarray]   # (nq, d) -> (nq, nen, d)
    points: np.ndarray
    weights: np.ndarray
    edges: tuple[tuple[int, ...], ...] = ()       # boundary edges, local node ids in order

    @property
    def n_qp(self) -> int:
        return len(self.weights)


def _bar2_N(p):
    x = p[:, 0]
    return np.column_stack([(1 - x) / 2, (1 + x) / 2])


def _bar2_dN(p):
    n = len(p)
    return np.tile(np.array([[-0.5], [0.5]]), (n, 1, 1))


def _bar3_N(p):
    x = p[:, 0]
    return np.column_stack([x * (x - 1) / 2, x * (x + 1) / 2, 1 - x ** 2])


def _bar3_dN(p):
    x = p[:, 0]
    return np.stack([x - 0.5, x + 0.5, -2 * x], axis=1)[:, :, None]


def _tri3_N(p):
    x, y = p[:, 0], p[:, 1]
    return np.column_stack([1 - x - y, x, y])


def _tri3_dN(p):
    return np.tile(np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (len(p), 1, 1))


_Q4 = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)


def _quad4_N(p):
    x, y = p[:, 0:1], p[:, 1:2]
    return 0.25 * (1 + x * _Q4[:, 0]) * (1 + y * _Q4[:, 1])


def _quad4_dN(p):
    x, y = p[:, 0:1], p[:, 1:2]
    dx = 0.25 * _Q4[:, 0] * (1 + y * _Q4[:, 1])
    dy = 0.25 * _Q4[:, 1] * (1 + x * _Q4[:, 0])
    return np.stack([dx, dy], axis=-1)


def _quad8_N(p):
    x, y = p[:, 0:1], p[:, 1:2]
    xc, yc = _Q4[:, 0], _Q4[:, 1]
    corner = 0.25 * (1 + x * xc) * (1 + y * yc) * (x * xc + y * yc - 1)
    x1, y1 = x[:, 0], y[:, 0]
    mids = np.column_stack([
        0.5 * (1 - x1 ** 2) * (1 - y1),
        0.5 * (1 + x1) * (1 - y1 ** 2),
        0.5 * (1 - x1 ** 2) * (1 + y1),
        0.5 * (1 - x1) * (1 - y1 ** 2),
    ])
    return np.hstack([corner, mids])


def _quad8_dN(p):
    x, y = p[:, 0:1], p[:, 1:2]
    xc, yc = _Q4[:, 0], _Q4[:, 1]
    cdx = 0.25 * xc * (1 + y * yc) * (2 * x * xc + y * yc)
    cdy = 0.25 * yc * (1 + x * xc) * (x * xc + 2 * y * yc)
    x1, y1 = x[:, 0], y[:, 0]
    mdx = np.column_stack([-x1 * (1 - y1), 0.5 * (1 - y1 ** 2), -x1 * (1 + y1), -0.5 * (1 - y1 ** 2)])
    mdy = np.column_stack([-0.5 * (1 - x1 ** 2), -y1 * (1 + x1), 0.5 * (1 - x1 ** 2), -y1 * (1 - x1)])
    return np.stack([np.hstack([cdx, mdx]), np.hstack([cdy, mdy])], axis=-1)


_g2 = gauss_1d(2)
_g3 = gauss_1d(3)

ELEMENTS: dict[str, ElementType] = {
    "bar2": ElementType("bar2", 1, 2, 3, _bar2_N, _bar2_dN, _g2[0][:, None], _g2[1]),
    "tri3": ElementType("tri3", 2, 3, 5, _tri3_N, _tri3_dN,
                        np.array([[1.0 / 3.0, 1.0 / 3.0]]), np.array([0.5]),
                        ((0, 1), (1, 2), (2, 0))),
    "quad4": ElementType("quad4", 2, 4, 9, _quad4_N, _quad4_dN, *gauss_square(2),
                         edges=((0, 1), (1, 2), (2, 3), (3, 0))),
    "quad8": ElementType("quad8", 2, 8, 23, _quad8_N, _quad8_dN, *gauss_square(3),
                         edges=((0, 1, 4), (1, 2, 5), (2, 3, 6), (3, 0, 7))),
}

# Line elements used to integrate tractions along 2D edges.
EDGE_LINES = {
    2: ElementType("line2", 1, 2, 3, _bar2_N, _bar2_dN, _g2[0][:, None], _g2[1]),
    3: ElementType("line3", 1, 3, 21, _bar3_N, _bar3_dN, _g3[0][:, None], _g3[1]),
}


def element_type(name: str) -> ElementType:
    try:
        return ELEMENTS[name]
    except KeyError:
        raise ValueError(f"unknown element kind {name!r}") from None
