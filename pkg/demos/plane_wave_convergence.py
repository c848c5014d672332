"""Plane-wave convergence study.

Solves the impedance problem on the unit square with data taken from
u(x) = exp(ik d.x) and prints the relative L2 error under uniform
refinement, for P1 and P2 elements. The observed rates should approach
2 and 3.
"""
import numpy as np

from helmoras.fem import FeSpace, assemble_helmholtz, assemble_load, l2_error, plane_wave, plane_wave_data
from helmoras.linalg import factorize
from helmoras.mesh import build_rect_mesh

k = 10.0
d = (np.cos(0.3), np.sin(0.3))
exact = plane_wave(k, d)
data = plane_wave_data(k, d)

for degree in (1, 2):
    print(f"degree {degree}")
    prev = None
    for n in (8, 16, 32, 64):
        space = FeSpace(build_rect_mesh((0, 0), 1, 1, n, n), degree)
        u = factorize(assemble_helmholtz(space, k)).solve(assemble_load(space, data))
        err = l2_error(space, u, exact, relative=True)
        rate = "" if prev is None else f"  rate {np.log2(prev / err):.2f}"
        print(f"  n={n:3d} dofs={space.ndofs:6d} err={err:.3e}{rate}")
        prev = err
