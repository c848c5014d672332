"""Overlapping Schwarz (ORAS) analysis for the Helmholtz impedance problem.

Finite elements of degree 1 or 2 on structured triangle meshes, strip and
checkerboard covers with a partition of unity, and matrix-free tools for
norms of powers of the error propagation matrix E = I - B^{-1} A.
"""
from .decomposition import Cover, Subdomain, box_cover, checkerboard_cover, strip_cover
from .experiments import ExperimentConfig, build_problem
from .fem import FeSpace, ProblemData, assemble_helmholtz, assemble_load, assemble_metric_dk, l2_error
from .linalg import ComplexSparseMatrix, factorize, gmres
from .mesh import RectMesh, build_rect_mesh, mesh_size_for_wavenumber
from .oras import OrasOperator, build_oras, norm_E_power, residual_correction_step, richardson

__version__ = "0.1.0"

__all__ = [
    "Cover", "Subdomain", "box_cover", "checkerboard_cover", "strip_cover",
    "ExperimentConfig", "build_problem",
    "FeSpace", "ProblemData", "assemble_helmholtz", "assemble_load", "assemble_metric_dk", "l2_error",
    "ComplexSparseMatrix", "factorize", "gmres",
    "RectMesh", "build_rect_mesh", "mesh_size_for_wavenumber",
    "OrasOperator", "build_oras", "norm_E_power", "residual_correction_step", "richardson",
]
