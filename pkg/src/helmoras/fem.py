"""Lagrange P1/P2 spaces on :class:`RectMesh` and Helmholtz assembly.

Sign conventions follow the impedance problem

    -(Δ + k²) u = f   in Ω,      (∂/∂n - ik) u = g   on Γ,

whose sesquilinear form is a(u, v) = ∫ ∇u·∇v̄ - k² u v̄ - ik ∫_Γ u v̄.
Assembled matrices use entry (i, j) = a(φ_j, φ_i); with real basis
functions this is complex symmetric.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .linalg import ComplexSparseMatrix
from .mesh import SIDE_NORMALS, RectMesh

__all__ = [
    "FeSpace",
    "ProblemData",
    "assemble_helmholtz",
    "assemble_load",
    "assemble_metric_dk",
    "plane_wave",
    "plane_wave_data",
    "l2_error",
    "triangle_rule",
    "collapsed_gauss_rule",
]

# symmetric 6-point rule, exact to degree 4 (barycentric points, weights sum to 1)
_A1, _W1 = 0.445948490915965, 0.223381589678011
_A2, _W2 = 0.091576213509771, 0.109951743655322


def triangle_rule():
    """Barycentric points (6, 3) and weights (6,) of the degree-4 rule."""
    pts = []
    for a, w in ((_A1, _W1), (_A2, _W2)):
        b = 1.0 - 2.0 * a
        pts += [(b, a, a), (a, b, a), (a, a, b)]
    w = np.array([_W1] * 3 + [_W2] * 3)
    return np.array(pts), w


def collapsed_gauss_rule(n: int):
    """Duffy-collapsed Gauss-Legendre product rule with n² points; exact to
    degree 2n-1. Returned in the same (barycentric, weight) format."""
    u, wu = np.polynomial.legendre.leggauss(n)
    xi = 0.5 * (1 + u)
    pts, wts = [], []
    for a, wa in zip(xi, wu):
        for v, wv in zip(u, wu):
            eta = (1 - a) * 0.5 * (1 + v)
            pts.append((1 - a - eta, a, eta))
            # 0.5*0.5 from the two affine maps, (1-a) Jacobian, 2 to normalize area 1/2
            wts.append(wa * wv * (1 - a) * 0.25 * 2)
    return np.array(pts), np.array(wts)


_GX = np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)])
_GW = np.array([5.0, 8.0, 5.0]) / 18.0


def _basis(degree, lam):
    """Basis values at barycentric points ``lam`` (q, 3) -> (q, nb)."""
    l0, l1, l2 = lam.T
    if degree == 1:
        return lam.copy()
    return np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])


def _basis_dlam(degree, lam):
    """Derivatives of the basis w.r.t. the three barycentrics -> (q, nb, 3)."""
    q = lam.shape[0]
    if degree == 1:
        return np.broadcast_to(np.eye(3), (q, 3, 3)).copy()
    l0, l1, l2 = lam.T
    d = np.zeros((q, 6, 3))
    d[:, 0, 0] = 4 * l0 - 1
    d[:, 1, 1] = 4 * l1 - 1
    d[:, 2, 2] = 4 * l2 - 1
    d[:, 3, 0], d[:, 3, 1] = 4 * l1, 4 * l0
    d[:, 4, 1], d[:, 4, 2] = 4 * l2, 4 * l1
    d[:, 5, 2], d[:, 5, 0] = 4 * l0, 4 * l2
    return d


def _edge_basis(degree, t):
    if degree == 1:
        return np.column_stack([1 - t, t])
    return np.column_stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)])


class FeSpace:
    """Continuous Lagrange space of degree 1 or 2 on a :class:`RectMesh`.

    Nodes live on the refined grid with ``degree*nx + 1`` columns, numbered
    lexicographically with x fastest. Local element node order is the
    three vertices followed (for P2) by the midpoints of edges 01, 12, 20.
    """

    def __init__(self, mesh: RectMesh, degree: int = 2):
        if degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        self.mesh = mesh
        self.degree = p = degree
        self.mx = p * mesh.nx + 1
        self.my = p * mesh.ny + 1
        a = np.arange(self.mx)
        b = np.arange(self.my)
        xs = mesh.origin[0] + mesh.width * a / (p * mesh.nx)
        ys = mesh.origin[1] + mesh.height * b / (p * mesh.ny)
        X, Y = np.meshgrid(xs, ys)
        self.node_coords = np.column_stack([X.ravel(), Y.ravel()])

        self.element_dofs = self._grid_dofs(mesh.triangles)
        B, A = np.meshgrid(b, a, indexing="ij")
        on_bdry = (A == 0) | (A == self.mx - 1) | (B == 0) | (B == self.my - 1)
        self.boundary_nodes = np.flatnonzero(on_bdry.ravel())
        self._elem_cache = None

    @property
    def ndofs(self) -> int:
        return self.mx * self.my

    def _vertex_grid(self, v):
        nx1 = self.mesh.nx + 1
        return self.degree * (v % nx1), self.degree * (v // nx1)

    def _grid_dofs(self, vertex_tuples):
        """Map vertex tuples (triangles or edges) to element/edge node indices."""
        vt = np.asarray(vertex_tuples)
        ia, ib = self._vertex_grid(vt)
        dofs = [ib * self.mx + ia]
        if self.degree == 2:
            m = vt.shape[1]
            pairs = [(0, 1), (1, 2), (2, 0)] if m == 3 else [(0, 1)]
            for s, t in pairs:
                ma = (ia[:, s] + ia[:, t]) // 2
                mb = (ib[:, s] + ib[:, t]) // 2
                dofs.append((mb * self.mx + ma)[:, None])
        return np.hstack(dofs).astype(np.int64)

    def edge_dofs(self, edges) -> np.ndarray:
        """Node indices (m, degree+1) along boundary edges: endpoints then midpoint."""
        return self._grid_dofs(np.asarray(edges).reshape(-1, 2))

    def interpolate(self, func: Callable) -> np.ndarray:
        x, y = self.node_coords.T
        return np.asarray(func(x, y), dtype=np.complex128) * np.ones(self.ndofs)

    # -- element geometry -------------------------------------------------

    def _geometry(self):
        p = self.mesh.vertices[self.mesh.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        # rows of J^{-1} are grad(lambda_1), grad(lambda_2)
        g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
        g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
        glam = np.stack([-(g1 + g2), g1, g2], axis=1)  # (ne, 3, 2)
        return p, 0.5 * det, glam

    def element_matrices(self):
        """Element stiffness and mass matrices, each (ne, nb, nb)."""
        if self._elem_cache is None:
            _, area, glam = self._geometry()
            lam, w = triangle_rule()
            phi = _basis(self.degree, lam)
            dphi = np.einsum("qbl,eld->eqbd", _basis_dlam(self.degree, lam), glam)
            K = np.einsum("q,eqad,eqbd->eab", w, dphi, dphi) * area[:, None, None]
            M0 = np.einsum("q,qa,qb->ab", w, phi, phi)
            M = area[:, None, None] * M0[None]
            self._elem_cache = (K, M)
        return self._elem_cache

    def quadrature_points(self, rule=None):
        """Physical quadrature points (ne, q, 2), weights (ne, q) and basis (q, nb)."""
        lam, w = rule if rule is not None else triangle_rule()
        p, area, _ = self._geometry()
        pts = np.einsum("ql,eld->eqd", lam, p)
        return pts, area[:, None] * w[None], _basis(self.degree, lam)

    def evaluate(self, u, rule=None):
        """Values of the FE function ``u`` at the quadrature points of each element."""
        _, _, phi = self.quadrature_points(rule)
        return np.einsum("qb,eb->eq", phi, np.asarray(u)[self.element_dofs])


@dataclass
class ProblemData:
    """Wavenumber, volume source f(x, y) and impedance data g(x, y, side).

    ``side`` is an integer array indexing :data:`helmoras.mesh.SIDES`.
    ``None`` for f or g means zero.
    """

    k: float
    f: Optional[Callable] = None
    g: Optional[Callable] = None

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("wavenumber k must be positive")


def _resolve_boundary(mesh: RectMesh, impedance_boundary):
    """Return (edges, sides) for the requested impedance edges."""
    if impedance_boundary is None:
        return mesh.boundary_edges, mesh.boundary_sides
    edges = np.asarray(impedance_boundary, dtype=np.int64).reshape(-1, 2)
    lookup = {
        (min(a, b), max(a, b)): i for i, (a, b) in enumerate(mesh.boundary_edges.tolist())
    }
    idx = []
    for a, b in edges.tolist():
        key = (min(a, b), max(a, b))
        if key not in lookup:
            raise ValueError(f"edge ({a}, {b}) is not on the mesh boundary")
        idx.append(lookup[key])
    idx = np.array(idx, dtype=np.int64)
    return mesh.boundary_edges[idx], mesh.boundary_sides[idx]


def _edge_geometry(mesh: RectMesh, edges):
    p = mesh.vertices[edges]
    length = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    pts = p[:, 0, None, :] + _GX[None, :, None] * (p[:, 1] - p[:, 0])[:, None, :]
    return pts, length


def assemble_helmholtz(space: FeSpace, k: float, impedance_boundary=None) -> ComplexSparseMatrix:
    """Matrix of a(u, v) with the -ik boundary term on ``impedance_boundary``
    (vertex pairs; ``None`` means the whole boundary, an empty array none)."""
    K, M = space.element_matrices()
    dofs = space.element_dofs
    nb = dofs.shape[1]
    rows = [np.repeat(dofs, nb, axis=1).ravel()]
    cols = [np.tile(dofs, (1, nb)).ravel()]
    vals = [(K - k**2 * M).astype(np.complex128).ravel()]

    edges, _ = _resolve_boundary(space.mesh, impedance_boundary)
    if len(edges):
        edofs = space.edge_dofs(edges)
        _, length = _edge_geometry(space.mesh, edges)
        psi = _edge_basis(space.degree, _GX)
        Me = np.einsum("q,qa,qb->ab", _GW, psi, psi)
        eb = edofs.shape[1]
        rows.append(np.repeat(edofs, eb, axis=1).ravel())
        cols.append(np.tile(edofs, (1, eb)).ravel())
        vals.append((-1j * k * length[:, None, None] * Me[None]).ravel())

    n = space.ndofs
    return ComplexSparseMatrix.from_coo(
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (n, n), symmetric=True
    )


def assemble_metric_dk(space: FeSpace, k: float) -> ComplexSparseMatrix:
    """Gram matrix of the k-weighted H¹ inner product ∫ ∇u·∇v + k² u v."""
    if not k > 0:
        raise ValueError("k must be positive")
    K, M = space.element_matrices()
    dofs = space.element_dofs
    nb = dofs.shape[1]
    n = space.ndofs
    return ComplexSparseMatrix.from_coo(
        np.repeat(dofs, nb, axis=1).ravel(),
        np.tile(dofs, (1, nb)).ravel(),
        (K + k**2 * M).ravel(),
        (n, n),
        symmetric=True,
    )


def assemble_load(space: FeSpace, data: ProblemData, impedance_boundary=None) -> np.ndarray:
    """Load vector F(φ_i) = ∫ f φ_i + ∫_Γ g φ_i."""
    n = space.ndofs
    F = np.zeros(n, dtype=np.complex128)
    if data.f is not None:
        pts, wts, phi = space.quadrature_points()
        fv = np.asarray(data.f(pts[..., 0], pts[..., 1]), dtype=np.complex128)
        fv = np.broadcast_to(fv, wts.shape)
        np.add.at(F, space.element_dofs, np.einsum("eq,eq,qb->eb", fv, wts, phi))
    if data.g is not None:
        edges, sides = _resolve_boundary(space.mesh, impedance_boundary)
        if len(edges):
            pts, length = _edge_geometry(space.mesh, edges)
            side_q = np.broadcast_to(sides[:, None], pts.shape[:2])
            gv = np.asarray(data.g(pts[..., 0], pts[..., 1], side_q), dtype=np.complex128)
            gv = np.broadcast_to(gv, side_q.shape)
            psi = _edge_basis(space.degree, _GX)
            contrib = np.einsum("eq,q,qb->eb", gv, _GW, psi) * length[:, None]
            np.add.at(F, space.edge_dofs(edges), contrib)
    return F


def plane_wave(k: float, direction) -> Callable:
    d = np.asarray(direction, dtype=float)
    return lambda x, y: np.exp(1j * k * (d[0] * x + d[1] * y))


def plane_wave_data(k: float, direction=(1 / np.sqrt(2), 1 / np.sqrt(2))) -> ProblemData:
    """Data whose exact solution is exp(ik d·x): f = 0 and
    g = (ik d·n - ik) exp(ik d·x) on each side."""
    d = np.asarray(direction, dtype=float)
    if d.shape != (2,) or abs(np.linalg.norm(d) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector in the plane")
    u = plane_wave(k, d)
    dn = SIDE_NORMALS @ d

    def g(x, y, side):
        return 1j * k * (dn[side] - 1.0) * u(x, y)

    return ProblemData(k=k, f=None, g=g)


def l2_error(space: FeSpace, uh, exact: Callable, relative: bool = False, order: int = 6) -> float:
    """L² distance between the FE function ``uh`` and ``exact`` using a
    collapsed Gauss rule of degree 2*order-1."""
    rule = collapsed_gauss_rule(order)
    pts, wts, _ = space.quadrature_points(rule)
    ue = exact(pts[..., 0], pts[..., 1])
    err = np.sqrt(np.sum(wts * np.abs(space.evaluate(uh, rule) - ue) ** 2))
    if relative:
        return float(err / np.sqrt(np.sum(wts * np.abs(ue) ** 2)))
    return float(err)
