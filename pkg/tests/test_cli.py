"""End-to-end command-line behavior, run in process via main(argv)."""
import numpy as np
import pytest

from stefansim.cli import main
from stefansim.io import read_energy_csv

FAST_RUN = """\
[scenario]
rho_modes = 1:0.01
u_init = compatible
t_end = 5e-3

[solver]
dt = 1e-3
n_x = 16
n_z = 17
k_diag = 0

[output]
dir = {out}
"""

SWEEP_3EPS = FAST_RUN + """
[sweep]
epsilon = 1e-2, 1e-4, 0.0
"""


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.setenv("STEFANSIM_OUT", str(tmp_path))
    return tmp_path


def write_config(workdir, text, name="scenario.ini", out="results"):
    path = workdir / name
    path.write_text(text.format(out=out))
    return path


def test_run_writes_all_artifacts(workdir, capsys):
    cfg_path = write_config(workdir, FAST_RUN)
    assert main(["run", "--config", str(cfg_path)]) == 0
    out = workdir / "results"
    for name in ("energy.csv", "energy.csv.meta", "final_snapshot.csv",
                 "final_snapshot.csv.meta", "summary.txt", "summary.txt.meta"):
        assert (out / name).exists(), name
    summary = (out / "summary.txt").read_text()
    assert "steps=5" in summary
    assert "energy_monotone=yes" in summary
    assert "K2_hat=" in summary and "K2_oracle=" in summary
    assert summary == capsys.readouterr().out  # echoed verbatim
    cols = read_energy_csv(out / "energy.csv")
    assert cols["t"].size == 6
    assert np.all(np.isnan(cols["identity_residual"]))  # disabled by default


def test_run_bodies_are_deterministic(workdir):
    cfg_a = write_config(workdir, FAST_RUN, name="a.ini", out="o1")
    cfg_b = write_config(workdir, FAST_RUN, name="b.ini", out="o2")
    assert main(["run", "--config", str(cfg_a), "--quiet"]) == 0
    assert main(["run", "--config", str(cfg_b), "--quiet"]) == 0
    for name in ("energy.csv", "final_snapshot.csv"):
        assert ((workdir / "o1" / name).read_bytes()
                == (workdir / "o2" / name).read_bytes()), name


def test_run_seed_flag_overrides_config(workdir):
    cfg_path = write_config(workdir, FAST_RUN)
    assert main(["run", "--config", str(cfg_path), "--quiet", "--seed", "5"]) == 0
    header = (workdir / "results" / "energy.csv").read_text().splitlines()[1]
    assert header == "# seed=5"


def test_run_rejects_malformed_config(workdir, capsys):
    bad = workdir / "bad.ini"
    bad.write_text("[scenario]\nt_end = soon\n[output]\ndir = bad_out\n")
    assert main(["run", "--config", str(bad), "--quiet"]) == 2
    assert not (workdir / "bad_out").exists()
    assert "config error" in capsys.readouterr().err


def test_run_failure_leaves_no_partial_output(workdir, capsys):
    # dt far beyond the stability cliff with retries disabled: the run
    # raises, the CLI reports exit 1, and nothing is written
    text = """\
[scenario]
rho_modes = 1:0.1
u_init = zero
t_end = 0.08

[solver]
dt = 0.04
n_x = 32
n_z = 33
k_diag = 0
max_dt_halvings = 0

[output]
dir = {out}
"""
    cfg_path = write_config(workdir, text, out="doomed")
    assert main(["run", "--config", str(cfg_path), "--quiet"]) == 1
    assert not (workdir / "doomed").exists()
    assert "run failed" in capsys.readouterr().err


def test_spectrum_table(workdir, capsys):
    assert main(["spectrum", "--k", "0:2", "--eps", "0", "--n-dense", "101",
                 "--quiet"]) == 0
    lines = (workdir / "out" / "spectrum.csv").read_text().strip().splitlines()
    assert lines[0].startswith("k,eps,re_lambda_1,im_lambda_1")
    rows = [line.split(",") for line in lines[1:]]
    assert [r[0] for r in rows] == ["0", "1", "2"]
    leading = [float(r[2]) for r in rows]
    assert abs(leading[0]) < 1e-8            # conserved-mass neutral mode
    assert leading[0] > leading[1] > leading[2]  # faster decay at higher k


def test_spectrum_argument_validation(workdir, capsys):
    assert main(["spectrum", "--k", "", "--quiet"]) == 2
    assert main(["spectrum", "--k", "1,x", "--quiet"]) == 2
    assert main(["spectrum", "--k", "1", "--eps", "", "--quiet"]) == 2
    capsys.readouterr()


def test_verify_suite_exit_codes(capsys):
    assert main(["verify", "norms"]) == 0
    assert "[PASS] suite=norms" in capsys.readouterr().out
    assert main(["verify", "bogus"]) == 2  # argparse rejects the choice


def test_sweep_single_point_matches_run(workdir):
    cfg_run = write_config(workdir, FAST_RUN, name="r.ini", out="direct")
    cfg_sweep = write_config(workdir, FAST_RUN, name="s.ini", out="swept")
    assert main(["run", "--config", str(cfg_run), "--quiet"]) == 0
    assert main(["sweep", "--config", str(cfg_sweep), "--quiet"]) == 0
    summary = (workdir / "swept" / "sweep_summary.csv").read_text().splitlines()
    assert summary[0] == "label,epsilon,dt,n_x,n_z,E_final,max_cons_residual"
    assert len(summary) == 2
    label = summary[1].split(",")[0]
    assert label == "eps=0_dt=0.001_nx=16_nz=17"
    assert ((workdir / "swept" / label / "energy.csv").read_bytes()
            == (workdir / "direct" / "energy.csv").read_bytes())
    assert not (workdir / "swept" / "epsilon_table.csv").exists()


def test_sweep_epsilon_table_parallel(workdir):
    cfg_path = write_config(workdir, SWEEP_3EPS, out="sweep3")
    assert main(["sweep", "--config", str(cfg_path), "--quiet", "--jobs", "2"]) == 0
    out = workdir / "sweep3"
    summary = (out / "sweep_summary.csv").read_text().splitlines()
    assert len(summary) == 4
    eps_col = [float(line.split(",")[1]) for line in summary[1:]]
    assert eps_col == sorted(eps_col, reverse=True)
    table = (out / "epsilon_table.csv").read_text().splitlines()
    assert table[0] == "dt,n_x,n_z,eps_hi,eps_lo,sup_E_distance"
    assert len(table) == 3  # consecutive pairs: (1e-2, 1e-4), (1e-4, 0)
    pairs = [(float(r.split(",")[3]), float(r.split(",")[4])) for r in table[1:]]
    assert pairs == [(1e-2, 1e-4), (1e-4, 0.0)]
    dists = [float(r.split(",")[5]) for r in table[1:]]
    assert all(d >= 0 for d in dists)
    for line in summary[1:]:
        label = line.split(",")[0]
        assert (out / label / "energy.csv").exists()


def test_sweep_respects_job_cap(workdir, capsys):
    text = SWEEP_3EPS + "dt = 1e-3, 5e-4\njob_cap = 4\n"
    cfg_path = write_config(workdir, text, out="capped")
    assert main(["sweep", "--config", str(cfg_path), "--quiet"]) == 2
    assert "job_cap" in capsys.readouterr().err
    assert not (workdir / "capped").exists()
