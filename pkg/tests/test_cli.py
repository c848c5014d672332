import csv
import subprocess
import sys

import numpy as np
import pytest

from helmoras.cli import build_parser, config_from_args, main, parse_powers, read_config
from helmoras.experiments import ExperimentConfig, build_problem, table_powers


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("text,expected", [("3", [3]), ("1..4", [1, 2, 3, 4]), ("2,5", [2, 5])])
def test_parse_powers(text, expected):
    assert parse_powers(text) == expected


@pytest.mark.parametrize("text", ["0", "4..2", "", "a..b"])
def test_parse_powers_rejects(text):
    with pytest.raises(ValueError):
        parse_powers(text)


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sample\nk = 10,20\nn=3\nmesh-constant=2.0\nseed=11\n")
    assert read_config(cfg)["mesh_constant"] == "2.0"
    args = build_parser().parse_args(["table1", "--config", str(cfg), "--k", "40"])
    c = config_from_args(args)
    assert c.k == (40.0,) and c.N == (3,) and c.mesh_constant == 2.0 and c.seed == 11
    assert c.geometry == "strip" and c.gmres_tol == 1e-6


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        ExperimentConfig(k=(-1,))
    with pytest.raises(ValueError):
        ExperimentConfig(geometry="disc")
    with pytest.raises(ValueError):
        ExperimentConfig(gmres_tol=2)
    with pytest.raises(SystemExit):
        main(["table1", "--geometry", "checkerboard", "--k", "5"])


def test_table_powers():
    assert table_powers("strip", 1) == [1]
    assert table_powers("strip", 2) == [1, 2, 3]
    assert table_powers("strip", 8) == [1, 7, 8]
    assert table_powers("checkerboard", 4) == [15, 16]


def test_default_mesh_alignment():
    p = build_problem("strip", 20, 2, with_metric=False)
    assert p.cells_per_unit == 36
    p = build_problem("checkerboard", 20, 2, with_metric=False)
    assert p.cells_per_unit == 40  # 33 rounded up to a multiple of 8


def test_table1_csv(tmp_path):
    out = tmp_path / "t1.csv"
    assert main(["table1", "--k", "6", "--n", "2", "--cells-per-unit", "6", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert list(rows[0]) == ["geometry", "k", "N", "s", "norm", "status"]
    assert [r["s"] for r in rows] == ["1", "2", "3"]
    assert all(r["status"] == "converged" and float(r["norm"]) > 0 for r in rows)


def test_table2_writes_gmres_sibling(tmp_path):
    out = tmp_path / "t2.csv"
    main(["table2", "--k", "6", "--n", "2", "--cells-per-unit", "8", "--out", str(out)])
    norms = read_rows(out)
    assert [r["s"] for r in norms] == ["3", "4"]
    solves = read_rows(tmp_path / "t2_gmres.csv")
    assert len(solves) == 1 and int(solves[0]["iters"]) > 0
    assert float(solves[0]["residual"]) < 1e-6


def test_fig1_stdout(capsys):
    main(["fig1", "--k", "6", "--n", "2", "--cells-per-unit", "8", "--powers", "1..2"])
    text = capsys.readouterr()
    lines = text.out.strip().splitlines()
    assert lines[0] == "geometry,k,N,s,norm,status" and len(lines) == 3
    assert "first s" in text.err


def test_solve_and_dump(tmp_path):
    out, dump = tmp_path / "s.csv", tmp_path / "u.txt"
    main(["solve", "--k", "6", "--n", "2", "--cells-per-unit", "8", "--out", str(out), "--dump", str(dump)])
    row = read_rows(out)[0]
    assert int(row["dofs"]) == 17 * 17
    assert float(row["l2err"]) < 1e-2
    data = np.loadtxt(dump)
    assert data.shape == (289, 4)
    # the plane wave has unit modulus; the discrete solution is close to it
    assert np.allclose(np.hypot(data[:, 2], data[:, 3]), 1, atol=0.05)


def test_describe_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "helmoras", "describe", "--k", "6", "--n", "2",
                          "--cells-per-unit", "6"], capture_output=True, text=True, check=True)
    assert "dofs=" in res.stdout and res.stdout.count("subdomain") == 2


def test_fig1_defaults():
    c = config_from_args(build_parser().parse_args(["fig1"]))
    assert c.k == (40.0,) and c.N == (4,) and c.geometry == "checkerboard"


def test_solve_single_subdomain_and_loose_tolerance(tmp_path):
    out = tmp_path / "s.csv"
    main(["solve", "--k", "6", "--n", "1", "--cells-per-unit", "8", "--out", str(out)])
    assert read_rows(out)[0]["iters"] == "1"
    main(["solve", "--k", "6", "--n", "2", "--cells-per-unit", "8", "--gmres-tol", "0.5", "--out", str(out)])
    assert int(read_rows(out)[0]["iters"]) <= 3


def test_solve_nonconvergence_writes_history(tmp_path, capsys):
    out = tmp_path / "s.csv"
    main(["solve", "--k", "6", "--n", "2", "--cells-per-unit", "8", "--gmres-tol", "1e-12",
          "--gmres-max-iter", "2", "--out", str(out)])
    assert read_rows(out)[0]["iters"] == "2!"
    assert "did not converge" in capsys.readouterr().err
    hist = np.loadtxt(tmp_path / "s_history_k6_N2.csv")
    assert len(hist) == 3 and hist[0] == 1.0


def test_solve_strip_k20_error_scales_like_h3():
    from helmoras.experiments import ExperimentConfig, run_solve

    errs, ns = [], []
    for c in (1.3, 0.65):
        rows, probs, res = run_solve(ExperimentConfig(geometry="strip", k=(20,), N=(2,), mesh_constant=c))
        assert res[0].converged
        errs.append(rows[0]["l2err"])
        ns.append(probs[0].cells_per_unit)
    assert ns == [36, 66]
    assert errs[0] < 1e-2
    assert errs[0] / errs[1] >= 0.8 * (ns[1] / ns[0]) ** 3


def test_outputs_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        main(["table1", "--k", "6", "--n", "3", "--cells-per-unit", "6", "--out", str(path)])
    assert a.read_text() == b.read_text()
