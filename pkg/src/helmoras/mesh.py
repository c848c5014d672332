"""Uniform triangulations of axis-aligned rectangles."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SIDES",
    "SIDE_NORMALS",
    "RectMesh",
    "build_rect_mesh",
    "mesh_size_for_wavenumber",
    "aligned_cells_per_unit",
]

SIDES = ("bottom", "right", "top", "left")
SIDE_NORMALS = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])

DEFAULT_MESH_CONSTANT = 1.3


@dataclass(eq=False)
class RectMesh:
    """Structured triangle mesh of ``[x0, x0+width] x [y0, y0+height]``.

    Vertices are numbered lexicographically with x fastest, so vertex
    ``(i, j)`` of the grid has index ``j*(nx+1) + i``. Cell ``(i, j)``
    owns triangles ``2*(j*nx+i)`` (below the diagonal) and ``2*(j*nx+i)+1``.
    ``boundary_sides`` holds indices into :data:`SIDES`.
    """

    origin: tuple
    width: float
    height: float
    nx: int
    ny: int
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_sides: np.ndarray

    @property
    def h(self) -> float:
        return max(self.width / self.nx, self.height / self.ny)

    @property
    def hx(self) -> float:
        return self.width / self.nx

    @property
    def hy(self) -> float:
        return self.height / self.ny

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def dump(self) -> str:
        """Plain-text dump: ``v x y``, ``t i j k`` and ``b i j side`` lines."""
        out = [f"v {x:.17g} {y:.17g}" for x, y in self.vertices]
        out += [f"t {a} {b} {c}" for a, b, c in self.triangles]
        out += [
            f"b {a} {b} {SIDES[s]}" for (a, b), s in zip(self.boundary_edges, self.boundary_sides)
        ]
        return "\n".join(out) + "\n"


def build_rect_mesh(origin=(0.0, 0.0), width=1.0, height=1.0, nx=1, ny=1) -> RectMesh:
    if not (width > 0 and height > 0):
        raise ValueError("width and height must be positive")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError("nx and ny must be positive integers")
    nx, ny = int(nx), int(ny)
    x0, y0 = float(origin[0]), float(origin[1])

    xs = x0 + width * np.arange(nx + 1) / nx
    ys = y0 + height * np.arange(ny + 1) / ny
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    v00 = (jj * (nx + 1) + ii).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([v00, v10, v11])
    triangles[1::2] = np.column_stack([v00, v11, v01])

    i = np.arange(nx)
    j = np.arange(ny)
    top_row = ny * (nx + 1)
    edges = [
        np.column_stack([i, i + 1]),  # bottom, left to right
        np.column_stack([j * (nx + 1) + nx, (j + 1) * (nx + 1) + nx]),  # right, upwards
        np.column_stack([top_row + i + 1, top_row + i])[::-1],  # top, right to left
        np.column_stack([(j + 1) * (nx + 1), j * (nx + 1)])[::-1],  # left, downwards
    ]
    sides = np.concatenate([np.full(len(e), s) for s, e in enumerate(edges)])
    return RectMesh(
        (x0, y0), float(width), float(height), nx, ny,
        vertices, triangles, np.vstack(edges).astype(np.int64), sides,
    )


def mesh_size_for_wavenumber(k: float, degree: int = 2, mesh_constant: float = DEFAULT_MESH_CONSTANT) -> int:
    """Cells per unit length for the pollution-avoiding rule h = C k^(-5/4).

    ``degree`` is accepted for symmetry with the rest of the API; the rate
    does not depend on it.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    h = mesh_constant * k ** (-1.25)
    # guard against 33.000000001-style ceilings
    return int(math.ceil(1.0 / h - 1e-9))


def aligned_cells_per_unit(k: float, multiple: int, mesh_constant: float = DEFAULT_MESH_CONSTANT) -> int:
    """Smallest multiple of ``multiple`` not below :func:`mesh_size_for_wavenumber`."""
    n = mesh_size_for_wavenumber(k, mesh_constant=mesh_constant)
    return int(multiple * math.ceil(n / multiple))
