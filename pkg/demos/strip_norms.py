"""Norms of powers of the error propagation matrix for a chain of strips.

With two strips at k=20, ||E|| is well above one while ||E^3|| is small:
a single Richardson step can amplify the error, but a few steps contract
it. The script prints the norms and then runs Richardson from a random
start, reporting the error in the k-weighted H1 norm after each step.
A random start has little weight on the worst-case direction, so its
error contracts from the first step; the norm is a worst-case bound.
"""
import numpy as np

from helmoras.experiments import PLANE_WAVE_DIRECTION, build_problem
from helmoras.fem import assemble_load, plane_wave_data
from helmoras.oras import norm_E_power, richardson

k, N = 20.0, 2
prob = build_problem("strip", k, N)
op = prob.op
print(f"strip k={k:g} N={N}: {prob.space.ndofs} dofs, {prob.cells_per_unit} cells per unit")

for s in (1, 2, 3):
    est = norm_E_power(op, s)
    print(f"  ||E^{s}|| = {est.norm:.4f} ({est.status}, {est.iterations} operator applications)")

f = assemble_load(prob.space, plane_wave_data(k, PLANE_WAVE_DIRECTION))
rng = np.random.default_rng(0)
u0 = rng.standard_normal(op.n) + 1j * rng.standard_normal(op.n)
_, trace = richardson(op, f, u0, 8)
print("Richardson error history (relative to the start):")
for n, e in enumerate(trace.errors):
    print(f"  step {n}: {e / trace.errors[0]:.3e}")
