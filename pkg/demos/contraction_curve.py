"""||E^s|| as a function of s for a 4x4 checkerboard at k=40.

The curve drops below one long before s reaches the number of subdomains.
Writes contraction_curve.csv next to the working directory for plotting.
Pass a smaller wavenumber as the first argument for a quicker run.
"""
import sys

from helmoras.experiments import ExperimentConfig, NORM_COLUMNS, format_csv, run_fig1

k = float(sys.argv[1]) if len(sys.argv) > 1 else 40.0
cfg = ExperimentConfig(geometry="checkerboard", k=(k,), N=(4,), powers=tuple(range(1, 11)))
rows, first = run_fig1(cfg)
for r in rows:
    print(f"s={r['s']:2d}  ||E^s|| = {r['norm']:.4g}")
print("first contractive power:", first[(k, 4)])
with open("contraction_curve.csv", "w") as fh:
    fh.write(format_csv(rows, NORM_COLUMNS))
