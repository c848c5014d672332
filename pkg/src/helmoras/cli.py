"""Command-line driver: ``helmoras {table1,table2,fig1,solve,describe}``."""
from __future__ import annotations

import argparse
import os
import sys
import time
from typing import Dict, List, Optional

import numpy as np

from .experiments import (
    NORM_COLUMNS,
    SOLVE_COLUMNS,
    ExperimentConfig,
    build_problem,
    format_csv,
    run_fig1,
    run_solve,
    run_table1,
    run_table2,
)

COMMANDS = ("table1", "table2", "fig1", "solve", "describe")
DEFAULT_GEOMETRY = {"table1": "strip", "table2": "checkerboard", "fig1": "checkerboard",
                    "solve": "checkerboard", "describe": "strip"}
# fig1 defaults to the cheapest cell that shows early contraction
FIG1_DEFAULTS = {"k": [40.0], "N": [4]}


def parse_powers(text: str) -> List[int]:
    """'3' -> [3], '1..4' -> [1, 2, 3, 4], '1,3,5' -> [1, 3, 5]."""
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if lo < 1 or hi < lo:
            raise ValueError(f"bad power range {text!r}")
        return list(range(lo, hi + 1))
    vals = [int(t) for t in text.split(",") if t.strip()]
    if not vals or min(vals) < 1:
        raise ValueError(f"bad powers {text!r}")
    return vals


def read_config(path: str) -> Dict[str, str]:
    """key=value lines; '#' starts a comment. Keys use the long flag names."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, val = (t.strip() for t in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _list(val, cast):
    if isinstance(val, (list, tuple)):
        return [cast(v) for v in val]
    return [cast(v) for v in str(val).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="helmoras", description="ORAS error-propagation experiments for Helmholtz.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--k", type=float, action="append", help="wavenumber (repeatable)")
        sp.add_argument("--n", type=int, action="append", dest="N", help="subdomains per direction (repeatable)")
        sp.add_argument("--geometry", choices=("strip", "checkerboard"))
        sp.add_argument("--degree", type=int)
        sp.add_argument("--mesh-constant", type=float, dest="mesh_constant")
        sp.add_argument("--overlap", type=float)
        sp.add_argument("--powers", help="a..b, a comma list, or a single power")
        sp.add_argument("--gmres-tol", type=float, dest="gmres_tol")
        sp.add_argument("--cells-per-unit", type=int, dest="cells_per_unit",
                        help="override the k-dependent mesh resolution")
        sp.add_argument("--out", help="CSV output path (default stdout)")
        sp.add_argument("--gmres-max-iter", type=int, dest="gmres_max_iter")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--config", help="key=value file; command-line flags take precedence")
        if name == "solve":
            sp.add_argument("--dump", help="write 'x y re im' lines of the solution here")
        if name == "fig1":
            sp.add_argument("--stop-at-contraction", action="store_true",
                            help="stop each curve at the first s with norm below 1")
    return p


def config_from_args(args) -> ExperimentConfig:
    vals = read_config(args.config) if args.config else {}
    merged = {}
    for key in ("k", "N", "geometry", "degree", "mesh_constant", "overlap", "powers",
                "gmres_tol", "gmres_max_iter", "cells_per_unit", "out", "seed"):
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
        elif key in vals or (key == "N" and "n" in vals):
            merged[key] = vals.get(key, vals.get("n"))
    kw = {"geometry": merged.get("geometry", DEFAULT_GEOMETRY[args.command])}
    if args.command == "fig1":
        for key, val in FIG1_DEFAULTS.items():
            merged.setdefault(key, val)
    if "k" in merged:
        kw["k"] = _list(merged["k"], float)
    if "N" in merged:
        kw["N"] = _list(merged["N"], int)
    for key, cast in (("degree", int), ("mesh_constant", float), ("overlap", float),
                      ("gmres_tol", float), ("gmres_max_iter", int), ("cells_per_unit", int), ("seed", int)):
        if key in merged:
            kw[key] = cast(merged[key])
    if "powers" in merged:
        pw = merged["powers"]
        kw["powers"] = pw if isinstance(pw, list) else parse_powers(str(pw))
    if "out" in merged:
        kw["output_path"] = str(merged["out"])
    return ExperimentConfig(**kw)


def _emit(text: str, path: Optional[str]):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _sibling(path: Optional[str], suffix: str) -> Optional[str]:
    if not path:
        return None
    root, ext = os.path.splitext(path)
    return f"{root}{suffix}{ext or '.csv'}"


def describe(config: ExperimentConfig) -> str:
    lines = []
    for k in config.k:
        for N in config.N:
            t0 = time.perf_counter()
            prob = build_problem(config.geometry, k, N, config.degree, config.mesh_constant,
                                 config.overlap, config.cells_per_unit, with_metric=False)
            m = prob.space.mesh
            lines.append(f"{config.geometry} k={k:g} N={N} cells_per_unit={prob.cells_per_unit} "
                         f"h={m.h:.5g} vertices={m.n_vertices} triangles={m.n_triangles} "
                         f"dofs={prob.space.ndofs} setup={time.perf_counter() - t0:.2f}s")
            lines.append(prob.cover.summary())
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    out = config.output_path
    cmd = args.command

    if cmd == "table1":
        if config.geometry != "strip":
            parser.error("table1 uses the strip geometry")
        _emit(format_csv(run_table1(config), NORM_COLUMNS), out)
    elif cmd == "table2":
        if config.geometry != "checkerboard":
            parser.error("table2 uses the checkerboard geometry")
        norms, solves = run_table2(config)
        if out:
            _emit(format_csv(norms, NORM_COLUMNS), out)
            _emit(format_csv(solves, SOLVE_COLUMNS), _sibling(out, "_gmres"))
        else:
            _emit(format_csv(norms, NORM_COLUMNS) + "\n" + format_csv(solves, SOLVE_COLUMNS), None)
    elif cmd == "fig1":
        rows, first = run_fig1(config, args.stop_at_contraction)
        _emit(format_csv(rows, NORM_COLUMNS), out)
        for (k, N), s in first.items():
            msg = f"k={k:g} N={N}: first s with norm<1 is {s if s is not None else 'not reached'}"
            print(msg, file=sys.stderr)
    elif cmd == "solve":
        rows, problems, results = run_solve(config)
        _emit(format_csv(rows, SOLVE_COLUMNS), out)
        for row, res in zip(rows, results):
            if not res.converged:
                hist = _sibling(out, f"_history_k{row['k']:g}_N{row['N']}") or \
                    f"gmres_history_k{row['k']:g}_N{row['N']}.txt"
                np.savetxt(hist, res.residual_history)
                print(f"GMRES did not converge for k={row['k']:g} N={row['N']}; "
                      f"residual history in {hist}", file=sys.stderr)
        if args.dump:
            prob, res = problems[-1], results[-1]
            xy = prob.space.node_coords
            data = np.column_stack([xy, res.solution.real, res.solution.imag])
            np.savetxt(args.dump, data, fmt="%.17g")
    else:
        _emit(describe(config), out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
