"""Overlapping covers of rectangular meshes and the associated
restriction / prolongation operators.

Subdomains are unions of whole mesh cells, so each one is again a
structured rectangle; its local space is built on a sub-mesh whose nodes
coincide with a block of the global node grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .fem import FeSpace
from .mesh import SIDES, build_rect_mesh

__all__ = [
    "AlignmentError",
    "Subdomain",
    "Cover",
    "box_cover",
    "strip_cover",
    "checkerboard_cover",
    "build_pou",
    "restrict",
    "prolong_nodewise",
    "prolong_weighted",
]

_ALIGN_TOL = 1e-9


class AlignmentError(ValueError):
    """Subdomain widths or overlaps do not fall on mesh lines."""


@dataclass(eq=False)
class Subdomain:
    id: int
    cell_box: tuple
    """(i0, i1, j0, j1): the subdomain covers cells i0 <= i < i1, j0 <= j < j1."""
    element_ids: np.ndarray
    node_ids: np.ndarray
    local_space: FeSpace
    interface_edges: np.ndarray
    physical_edges: np.ndarray
    interface_sides: tuple
    """Names of the rectangle sides lying inside Ω."""

    @property
    def extent(self):
        m = self.local_space.mesh
        return (m.origin[0], m.origin[0] + m.width, m.origin[1], m.origin[1] + m.height)

    @property
    def local_boundary_edges(self):
        return self.local_space.mesh.boundary_edges


@dataclass(eq=False)
class Cover:
    space: FeSpace
    subdomains: List[Subdomain]
    pou: Optional[List[np.ndarray]] = None
    offsets: np.ndarray = field(init=False)

    def __post_init__(self):
        sizes = [len(s.node_ids) for s in self.subdomains]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

    def __len__(self):
        return len(self.subdomains)

    @property
    def local_total(self) -> int:
        return int(self.offsets[-1])

    def summary(self) -> str:
        """Per-subdomain extent box, node count and element count."""
        lines = []
        for s in self.subdomains:
            x0, x1, y0, y1 = s.extent
            lines.append(
                f"subdomain {s.id}: [{x0:.6g}, {x1:.6g}] x [{y0:.6g}, {y1:.6g}]"
                f"  nodes={len(s.node_ids)} elements={len(s.element_ids)}"
            )
        return "\n".join(lines)


def _as_cells(length, h, what):
    n = length / h
    if abs(n - round(n)) > _ALIGN_TOL * max(1.0, n):
        raise AlignmentError(f"{what} = {length:.6g} is not a multiple of h = {h:.6g}")
    return int(round(n))


def box_cover(space: FeSpace, boxes, pou: bool = True) -> Cover:
    """Cover from a list of cell boxes (i0, i1, j0, j1)."""
    mesh = space.mesh
    p = space.degree
    subs = []
    for ell, (i0, i1, j0, j1) in enumerate(boxes):
        if not (0 <= i0 < i1 <= mesh.nx and 0 <= j0 < j1 <= mesh.ny):
            raise ValueError(f"cell box {(i0, i1, j0, j1)} outside the mesh")
        nxl, nyl = i1 - i0, j1 - j0
        local_mesh = build_rect_mesh(
            (mesh.origin[0] + i0 * mesh.hx, mesh.origin[1] + j0 * mesh.hy),
            nxl * mesh.hx, nyl * mesh.hy, nxl, nyl,
        )
        local = FeSpace(local_mesh, p)
        # local node (a, b) sits at global grid position (p*i0 + a, p*j0 + b)
        B, A = np.meshgrid(np.arange(local.my), np.arange(local.mx), indexing="ij")
        node_ids = ((B + p * j0) * space.mx + (A + p * i0)).ravel()

        jj, ii = np.meshgrid(np.arange(j0, j1), np.arange(i0, i1), indexing="ij")
        cells = (jj * mesh.nx + ii).ravel()
        element_ids = np.column_stack([2 * cells, 2 * cells + 1]).ravel()

        physical = {
            "bottom": j0 == 0, "right": i1 == mesh.nx,
            "top": j1 == mesh.ny, "left": i0 == 0,
        }
        is_phys = np.array([physical[SIDES[s]] for s in local_mesh.boundary_sides], dtype=bool)
        subs.append(Subdomain(
            id=ell,
            cell_box=(i0, i1, j0, j1),
            element_ids=element_ids,
            node_ids=node_ids,
            local_space=local,
            interface_edges=local_mesh.boundary_edges[~is_phys],
            physical_edges=local_mesh.boundary_edges[is_phys],
            interface_sides=tuple(s for s in SIDES if not physical[s]),
        ))
    cover = Cover(space, subs)
    if pou:
        build_pou(cover)
    return cover


def strip_cover(space: FeSpace, N: int, overlap: float = 1 / 6, pou: bool = True) -> Cover:
    """N vertical strips of equal width, each extended by ``overlap`` into its
    neighbours. On (0, 2N/3) x (0, 1) with the default overlap the interior
    strips become unit squares."""
    mesh = space.mesh
    if N < 1:
        raise ValueError("N must be at least 1")
    m = _as_cells(mesh.width / N, mesh.hx, "strip width")
    o = _as_cells(overlap, mesh.hx, "overlap")
    if N * m != mesh.nx:
        raise AlignmentError("strips do not tile the mesh")
    boxes = [(max(l * m - o, 0), min((l + 1) * m + o, mesh.nx), 0, mesh.ny) for l in range(N)]
    return box_cover(space, boxes, pou)


def checkerboard_cover(space: FeSpace, N: int, overlap_fraction: float = 0.25, pou: bool = True) -> Cover:
    """N x N grid of squares, each grown by ``overlap_fraction`` of its width
    (intersected with Ω). Subdomain ``b*N + a`` is column a, row b."""
    mesh = space.mesh
    if N < 1:
        raise ValueError("N must be at least 1")
    mx = _as_cells(mesh.width / N, mesh.hx, "subdomain width")
    my = _as_cells(mesh.height / N, mesh.hy, "subdomain height")
    ox = _as_cells(overlap_fraction * mesh.width / N, mesh.hx, "overlap")
    oy = _as_cells(overlap_fraction * mesh.height / N, mesh.hy, "overlap")
    boxes = []
    for b in range(N):
        for a in range(N):
            boxes.append((
                max(a * mx - ox, 0), min((a + 1) * mx + ox, mesh.nx),
                max(b * my - oy, 0), min((b + 1) * my + oy, mesh.ny),
            ))
    return box_cover(space, boxes, pou)


def _interface_distance(sub: Subdomain, coords):
    if not sub.interface_sides:
        return np.ones(len(coords))
    x0, x1, y0, y1 = sub.extent
    x, y = coords.T
    dist = {"left": x - x0, "right": x1 - x, "bottom": y - y0, "top": y1 - y}
    d = np.min([dist[s] for s in sub.interface_sides], axis=0)
    return np.clip(d, 0.0, None)


def build_pou(cover: Cover) -> Cover:
    """Nodal weights χ_ℓ = d_ℓ / Σ_m d_m with d_ℓ the distance to the part
    of ∂Ω_ℓ inside Ω (1 if there is none). Fills ``cover.pou`` in place."""
    space = cover.space
    coords = space.node_coords
    dists = []
    total = np.zeros(space.ndofs)
    seen = np.zeros(space.ndofs, dtype=bool)
    for sub in cover.subdomains:
        d = _interface_distance(sub, coords[sub.node_ids])
        # nodes on interface lines are exactly zero; snap rounding noise
        d[d < 1e-12 * space.mesh.h] = 0.0
        dists.append(d)
        np.add.at(total, sub.node_ids, d)
        seen[sub.node_ids] = True
    if not seen.all():
        raise ValueError(f"{(~seen).sum()} nodes are covered by no subdomain")
    if np.any(total <= 0):
        raise ValueError("partition of unity undefined: some node has zero total weight")
    cover.pou = [d / total[sub.node_ids] for d, sub in zip(dists, cover.subdomains)]
    return cover


def restrict(cover: Cover, ell: int, v) -> np.ndarray:
    return np.asarray(v)[cover.subdomains[ell].node_ids]


def prolong_nodewise(cover: Cover, ell: int, v_local) -> np.ndarray:
    ids = cover.subdomains[ell].node_ids
    v_local = np.asarray(v_local)
    if v_local.shape != ids.shape:
        raise ValueError(f"local vector has shape {v_local.shape}, expected {ids.shape}")
    out = np.zeros(cover.space.ndofs, dtype=np.result_type(v_local, np.complex128))
    out[ids] = v_local
    return out


def prolong_weighted(cover: Cover, ell: int, v_local) -> np.ndarray:
    if cover.pou is None:
        raise RuntimeError("partition of unity not built; call build_pou first")
    return prolong_nodewise(cover, ell, cover.pou[ell] * np.asarray(v_local))
