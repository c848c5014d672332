"""Strip and checkerboard experiments: norms of Eˢ, GMRES counts, solves."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .decomposition import Cover, checkerboard_cover, strip_cover
from .fem import FeSpace, assemble_load, l2_error, plane_wave, plane_wave_data
from .linalg import GmresResult, gmres
from .mesh import DEFAULT_MESH_CONSTANT, build_rect_mesh, mesh_size_for_wavenumber
from .oras import NormEstimate, OrasOperator, build_oras, norm_E_power

__all__ = [
    "ExperimentConfig",
    "Problem",
    "build_problem",
    "table_powers",
    "run_norms",
    "run_table1",
    "run_table2",
    "run_fig1",
    "run_gmres",
    "run_solve",
    "NORM_COLUMNS",
    "SOLVE_COLUMNS",
]

NORM_COLUMNS = ("geometry", "k", "N", "s", "norm", "status")
SOLVE_COLUMNS = ("geometry", "k", "N", "dofs", "iters", "residual", "l2err")

STRIP_WIDTH = 2.0 / 3.0
STRIP_OVERLAP = 1.0 / 6.0
CHECKER_OVERLAP = 0.25
PLANE_WAVE_DIRECTION = (1 / math.sqrt(2), 1 / math.sqrt(2))


@dataclass
class ExperimentConfig:
    geometry: str = "strip"
    k: Sequence[float] = (20.0,)
    N: Sequence[int] = (2,)
    degree: int = 2
    mesh_constant: float = DEFAULT_MESH_CONSTANT
    overlap: Optional[float] = None
    powers: Optional[Sequence[int]] = None
    gmres_tol: float = 1e-6
    gmres_max_iter: int = 200
    output_path: Optional[str] = None
    seed: int = 7
    cells_per_unit: Optional[int] = None
    norm_tol: float = 1e-8
    norm_max_iter: int = 2000

    def __post_init__(self):
        self.k = tuple(float(k) for k in np.atleast_1d(self.k))
        self.N = tuple(int(n) for n in np.atleast_1d(self.N))
        if self.geometry not in ("strip", "checkerboard"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if not self.k or any(k <= 0 for k in self.k):
            raise ValueError("wavenumbers must be positive")
        if not self.N or any(n < 1 for n in self.N):
            raise ValueError("subdomain counts must be at least 1")
        if self.degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        if not 0 < self.gmres_tol < 1:
            raise ValueError("gmres_tol must lie in (0, 1)")
        if self.mesh_constant <= 0:
            raise ValueError("mesh_constant must be positive")
        if self.powers is not None:
            self.powers = tuple(int(s) for s in self.powers)
            if any(s < 1 for s in self.powers):
                raise ValueError("powers must be >= 1")

    @property
    def overlap_value(self) -> float:
        if self.overlap is not None:
            return self.overlap
        return STRIP_OVERLAP if self.geometry == "strip" else CHECKER_OVERLAP


@dataclass
class Problem:
    geometry: str
    k: float
    N: int
    space: FeSpace
    cover: Cover
    op: OrasOperator
    cells_per_unit: int

    @property
    def n_subdomains(self) -> int:
        return len(self.cover)


def _aligned(n0: int, lengths, limit: int = 10_000) -> int:
    """Smallest n >= n0 for which every length is a whole number of 1/n cells."""
    for n in range(max(n0, 1), limit):
        if all(abs(n * L - round(n * L)) < 1e-9 for L in lengths):
            return n
    raise ValueError(f"no aligned mesh below {limit} cells per unit for lengths {lengths}")


def build_problem(geometry: str, k: float, N: int, degree: int = 2,
                  mesh_constant: float = DEFAULT_MESH_CONSTANT, overlap: Optional[float] = None,
                  cells_per_unit: Optional[int] = None, with_metric: bool = True) -> Problem:
    """Mesh, cover and ORAS operator for one (geometry, k, N) cell.

    The strip domain is (0, 2N/3) x (0, 1); the checkerboard domain is the
    unit square. Without an explicit ``cells_per_unit`` the mesh follows
    h = C k^(-5/4), rounded up so subdomain widths and overlaps fall on
    mesh lines.
    """
    if geometry == "strip":
        ov = STRIP_OVERLAP if overlap is None else overlap
        lengths, width = (STRIP_WIDTH, ov), STRIP_WIDTH * N
    elif geometry == "checkerboard":
        ov = CHECKER_OVERLAP if overlap is None else overlap
        lengths, width = (1.0 / N, ov / N), 1.0
    else:
        raise ValueError(f"unknown geometry {geometry!r}")
    if cells_per_unit is None:
        cells_per_unit = _aligned(mesh_size_for_wavenumber(k, degree, mesh_constant), lengths)
    n = cells_per_unit
    mesh = build_rect_mesh((0.0, 0.0), width, 1.0, int(round(width * n)), n)
    space = FeSpace(mesh, degree)
    if geometry == "strip":
        cover = strip_cover(space, N, ov)
    else:
        cover = checkerboard_cover(space, N, ov)
    op = build_oras(space, cover, k, with_metric=with_metric)
    return Problem(geometry, k, N, space, cover, op, n)


def table_powers(geometry: str, N: int) -> List[int]:
    """Exponents tabulated for one cell: ‖E‖, ‖E^N‖, ‖E^(N+1)‖ for two strips,
    ‖E‖, ‖E^(N-1)‖, ‖E^N‖ for more strips, ‖E^(s-1)‖, ‖E^s‖ with s = N² for
    checkerboards."""
    if geometry == "strip":
        if N == 1:
            return [1]
        return [1, 2, 3] if N == 2 else [1, N - 1, N]
    s = N * N
    return [1] if s == 1 else [s - 1, s]


def _problem_for(config: ExperimentConfig, k: float, N: int, with_metric=True) -> Problem:
    return build_problem(config.geometry, k, N, config.degree, config.mesh_constant,
                         config.overlap, config.cells_per_unit, with_metric)


def run_norms(problem: Problem, powers: Sequence[int], config: ExperimentConfig,
              stop_below: Optional[float] = None) -> List[NormEstimate]:
    out = []
    for s in powers:
        est = norm_E_power(problem.op, s, config.norm_tol, config.norm_max_iter, config.seed)
        out.append(est)
        if stop_below is not None and est.norm < stop_below:
            break
    return out


def _norm_rows(problem: Problem, estimates) -> List[dict]:
    return [
        dict(geometry=problem.geometry, k=problem.k, N=problem.N, s=e.s, norm=e.norm, status=e.status)
        for e in estimates
    ]


def run_table1(config: ExperimentConfig) -> List[dict]:
    """Norm rows for the strip geometry, one block per (k, N) in config order."""
    if config.geometry != "strip":
        raise ValueError("table1 needs the strip geometry")
    rows = []
    for k in config.k:
        for N in config.N:
            prob = _problem_for(config, k, N)
            powers = config.powers or table_powers("strip", N)
            rows += _norm_rows(prob, run_norms(prob, powers, config))
    return rows


def run_gmres(problem: Problem, tol: float = 1e-6, max_iter: int = 200) -> GmresResult:
    """ORAS-preconditioned GMRES for the plane-wave impedance problem."""
    data = plane_wave_data(problem.k, PLANE_WAVE_DIRECTION)
    f = assemble_load(problem.space, data)
    op = problem.op
    return gmres(op.apply_A, op.apply_B_inverse, f, tol, max_iter)


def _solve_row(problem: Problem, res: GmresResult) -> dict:
    err = l2_error(problem.space, res.solution, plane_wave(problem.k, PLANE_WAVE_DIRECTION), relative=True)
    return dict(
        geometry=problem.geometry, k=problem.k, N=problem.N, dofs=problem.space.ndofs,
        iters=res.iterations if res.converged else f"{res.iterations}!",
        residual=res.residual_history[-1], l2err=err,
    )


def run_table2(config: ExperimentConfig, norm_cap: int = 4):
    """Checkerboard norms (for N <= ``norm_cap``) and GMRES counts.

    Returns ``(norm_rows, gmres_rows)``. The GMRES solve uses its own
    operator and never depends on the requested powers.
    """
    if config.geometry != "checkerboard":
        raise ValueError("table2 needs the checkerboard geometry")
    norm_rows, solve_rows = [], []
    for k in config.k:
        for N in config.N:
            prob = _problem_for(config, k, N, with_metric=N <= norm_cap)
            if N <= norm_cap:
                powers = config.powers or table_powers("checkerboard", N)
                norm_rows += _norm_rows(prob, run_norms(prob, powers, config))
            res = run_gmres(prob, config.gmres_tol, config.gmres_max_iter)
            solve_rows.append(_solve_row(prob, res))
    return norm_rows, solve_rows


def run_fig1(config: ExperimentConfig, stop_at_contraction: bool = False):
    """‖Eˢ‖ for s in ``config.powers`` (default 1..N²) per (k, N).

    Returns ``(rows, first_contractive)`` where the second item maps
    (k, N) to the smallest s with ‖Eˢ‖ < 1, or None.
    """
    rows, first = [], {}
    for k in config.k:
        for N in config.N:
            prob = _problem_for(config, k, N)
            powers = config.powers or list(range(1, N * N + 1))
            ests = run_norms(prob, powers, config, 1.0 if stop_at_contraction else None)
            rows += _norm_rows(prob, ests)
            first[(k, N)] = next((e.s for e in ests if e.norm < 1), None)
    return rows, first


def run_solve(config: ExperimentConfig):
    """Plane-wave solves with ORAS-GMRES; returns (rows, problems, results)."""
    rows, problems, results = [], [], []
    for k in config.k:
        for N in config.N:
            prob = _problem_for(config, k, N, with_metric=False)
            res = run_gmres(prob, config.gmres_tol, config.gmres_max_iter)
            rows.append(_solve_row(prob, res))
            problems.append(prob)
            results.append(res)
    return rows, problems, results


def format_csv(rows, columns) -> str:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        return str(v)

    lines = [",".join(columns)]
    lines += [",".join(fmt(r[c]) for c in columns) for r in rows]
    return "\n".join(lines) + "\n"
