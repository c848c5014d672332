"""How ||E^s|| depends on the mesh at a fixed wavenumber.

At k=10 with two strips the norms grow by about sqrt(2) each time the mesh
is halved. The local right-hand side R_l A v carries full global rows at
interface nodes, so a mismatch concentrated in one layer of elements
enters the correction; its k-weighted H1 size scales like h^(-1/2).
The same growth explains most of the increase of ||E|| with k when
h ~ k^(-5/4).
"""
from helmoras.experiments import build_problem
from helmoras.oras import norm_E_power

k = 10.0
prev = None
for n in (12, 24, 48):
    prob = build_problem("strip", k, 2, cells_per_unit=n)
    norms = [norm_E_power(prob.op, s).norm for s in (1, 2, 3)]
    ratio = "" if prev is None else f"  ratio {norms[0] / prev:.3f}"
    print(f"n={n:3d} dofs={prob.space.ndofs:6d} norms " + " ".join(f"{v:.4f}" for v in norms) + ratio)
    prev = norms[0]
