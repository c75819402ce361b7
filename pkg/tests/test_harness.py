import csv
import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from angmg.__main__ import main
from angmg.config import ConfigError, RunConfig, format_config, parse_config
from angmg.harness import build_problem, run, study

TINY = """
nx = 2
ny = 2
nz = 2
box_cm = 1.0
level = 1
N = 4   # scatter order
sigma_a = 0.2
"""


def test_minimal_config_defaults():
    cfg = parse_config("nx = 3\nny = 3\nnz = 3\nN = 4\n")
    assert cfg.tol == 1e-8 and cfg.coarse_sweeps == 10
    assert cfg.alpha == 1.0 and cfg.sigma_a == 0.0
    assert cfg.preconditioner == "mg" and cfg.nr is None


def test_full_size_setup_accepted():
    cfg = parse_config("nx = 30\nny = 30\nnz = 30\nbox_cm = 5\nN = 8\nsource = uniform\n")
    assert "nx = 30" in format_config(cfg) and cfg.box_cm == 5.0


@pytest.mark.parametrize(
    "text, msg",
    [
        ("N = 8\nnr = 12\n", "line 2: nr exceeds N"),
        ("nx = 2\nfoo = 1\n", "line 2: unknown key"),
        ("nx = two\n", "line 1: bad value"),
        ("basis = quadratic\n", "line 1"),
        ("nx = 2\nnx = 3\n", "duplicate"),
        ("tol = -1\n", "line 1: tol"),
        ("just words\n", "line 1"),
        ("source = beam\nbeam_footprint_cm = 4 6 2 3\n", "line 2: beam footprint"),
    ],
)
def test_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


@given(
    st.builds(
        RunConfig,
        nx=st.integers(1, 40),
        basis=st.sampled_from(["const", "lin"]),
        N=st.integers(1, 24),
        alpha=st.floats(0.1, 10),
        cycle=st.sampled_from(["v10", "v11"]),
        coarse_tol=st.none() | st.floats(1e-9, 1e-2),
        transport_correction=st.booleans(),
    )
)
def test_format_roundtrip(cfg):
    assert parse_config(format_config(cfg)) == cfg


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_writes_outputs(tmp_path):
    cfg = parse_config(TINY)
    res = run(cfg, tmp_path, dump_mesh=True, dump_flux=True, log=lambda *a, **k: None)
    assert res.report.converged
    conv = _rows(tmp_path / "convergence.csv")
    assert list(conv[0]) == ["iter", "rel_residual", "cumulative_seconds"]
    assert len(conv) == res.report.iterations
    summ = _rows(tmp_path / "summary.csv")
    assert len(summ) == 1 and summ[0]["converged"] == "1" and summ[0]["N"] == "4"
    header = (tmp_path / "run_header.txt").read_text()
    assert "coarse_sweeps = 10" in header and "tol = 1e-08" in header
    assert len((tmp_path / "angular_mesh.txt").read_text().splitlines()) == 32
    assert len((tmp_path / "scalar_flux.txt").read_text().splitlines()) == 9
    assert abs(res.balance["imbalance"]) < 1e-6


def test_runs_are_deterministic(tmp_path):
    cfg = parse_config(TINY)
    quiet = lambda *a, **k: None
    run(cfg, tmp_path / "a", log=quiet)
    run(cfg, tmp_path / "b", log=quiet)
    strip = lambda p: [r[:2] for r in csv.reader(open(p))]
    assert strip(tmp_path / "a" / "convergence.csv") == strip(tmp_path / "b" / "convergence.csv")


def test_sweep_vs_mg(tmp_path):
    base = TINY.replace("N = 4", "N = 8").replace("nx = 2", "nx = 3")
    sg = run(parse_config(base + "preconditioner = sweep\n"), tmp_path / "sg", log=lambda *a, **k: None)
    mg = run(parse_config(base + "preconditioner = mg\n"), tmp_path / "mg", log=lambda *a, **k: None)
    assert mg.report.iterations < sg.report.iterations


def test_study_rows(tmp_path):
    cfg = parse_config(TINY + "study_nr = 0 1 2 4\n")
    results = study(cfg, tmp_path, log=lambda *a, **k: None)
    rows = _rows(tmp_path / "summary.csv")
    assert [r["label"] for r in rows] == ["sweep", "mg_nr0", "mg_nr1", "mg_nr2", "mg_nr4"]
    its = [r.report.iterations for r in results[1:]]
    assert its[-1] <= its[0]


def test_build_problem_beam():
    cfg = parse_config("nx = 5\nny = 5\nnz = 1\nangular = banded\nl_max = 2\nsource = beam\nN = 2\n")
    prob = build_problem(cfg)
    assert len(prob.ops.mesh) == 32
    assert abs(prob.rhs.sum() - 1.0) < 1e-10


def test_cli_exit_codes(tmp_path):
    good = tmp_path / "good.cfg"
    good.write_text(TINY)
    assert main(["solve", str(good), "--out", str(tmp_path / "o")]) == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text("N = 8\nnr = 12\n")
    assert main(["solve", str(bad)]) == 1
    slow = tmp_path / "slow.cfg"
    slow.write_text(TINY + "max_iter = 1\ntol = 1e-14\n")
    assert main(["solve", str(slow), "--out", str(tmp_path / "s")]) == 2
    assert (tmp_path / "s" / "summary.csv").exists()
    huge = tmp_path / "huge.cfg"
    huge.write_text("nx = 60\nny = 60\nnz = 60\nlevel = 3\n")
    assert main(["solve", str(huge)]) == 1


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(TINY)
    proc = subprocess.run(
        [sys.executable, "-m", "angmg", "solve", str(cfg), "--out", str(tmp_path / "o"), "--threads", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "threads = 1" in proc.stdout
