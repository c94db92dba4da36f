import math
import subprocess
import sys

import pytest

from sqzphase.cli import main, parse_config, ConfigError

BASE_CFG = """
# coherent adaptive smoke configuration
detection = adaptive
squeezing = coherent
n_over_kappa = 100
chi_over_kappa = 15
delta = 0.7
n_traj = 16
seed = 9
"""


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(BASE_CFG)
    return str(path)


def _data_rows(path):
    lines = path.read_text().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    rest = [ln for ln in lines if not ln.startswith("#")]
    return comments, rest[0], rest[1:]


def test_parse_config_rejects_unknown_and_bad_values(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("bogus_key = 3\n")
    with pytest.raises(ConfigError, match="bogus_key"):
        parse_config(str(p))
    p.write_text("n_traj = many\n")
    with pytest.raises(ConfigError, match="n_traj"):
        parse_config(str(p))
    p.write_text("just a line\n")
    with pytest.raises(ConfigError):
        parse_config(str(p))


def test_simulate_writes_row_and_reruns_identically(cfg_path, tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", cfg_path, "--out", str(out1)]) == 0
    assert main(["simulate", "--config", cfg_path, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    comments, header, rows = _data_rows(out1)
    assert any("config: seed=9" in c for c in comments)
    assert any(c.startswith("# sqzphase") for c in comments)
    assert header.startswith("scheme,detection,n_over_kappa")
    assert len(rows) == 1
    fields = rows[0].split(",")
    assert len(fields) == 13
    assert fields[0] == "coherent" and fields[1] == "adaptive"
    assert all(f != "" for f in fields)


def test_simulate_seed_override_changes_rows(cfg_path, tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["simulate", "--config", cfg_path, "--out", str(out1)])
    main(["simulate", "--config", cfg_path, "--out", str(out2), "--seed", "10"])
    assert _data_rows(out1)[2] != _data_rows(out2)[2]


def test_missing_key_exit_code(tmp_path, capsys):
    p = tmp_path / "missing.cfg"
    p.write_text("detection = adaptive\nsqueezing = coherent\nchi_over_kappa = 10\n")
    assert main(["simulate", "--config", str(p)]) == 1
    assert "n_over_kappa" in capsys.readouterr().err


def test_unknown_key_exit_code(tmp_path, capsys):
    p = tmp_path / "unk.cfg"
    p.write_text("detection = adaptive\nnot_a_key = 1\n")
    assert main(["simulate", "--config", str(p)]) == 1
    assert "not_a_key" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, capsys):
    # squeezing flux beyond the total flux: infeasible beam
    p = tmp_path / "bad.cfg"
    p.write_text(
        "detection = adaptive\nsqueezing = arbitrary\nn_over_kappa = 1\n"
        "chi_over_kappa = 10\nr = 2.0\ngamma_over_kappa = 100\nn_traj = 4\n"
    )
    assert main(["simulate", "--config", str(p)]) == 2
    err = capsys.readouterr().err
    assert "numerical failure" in err and "sqzphase" in err


def test_gbound_bound_holds(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["gbound", "--out", str(out), "--r-points", "6", "--angles", "256"]) == 0
    comments, header, rows = _data_rows(out)
    assert header == "r,g_max_over_e3r,bound"
    assert len(rows) == 6
    for row in rows:
        r, gmax, bound = map(float, row.split(","))
        assert 0.0 <= gmax <= float(bound) == 0.25


def test_scaling_command_schema(tmp_path):
    out = tmp_path / "s.csv"
    code = main([
        "scaling", "--scheme", "adaptive-coherent",
        "--n-over-kappa", "10", "100", "1000",
        "--budget", "12", "--n-traj", "8", "--out", str(out), "--seed", "2",
    ])
    assert code == 0
    comments, header, rows = _data_rows(out)
    assert header.endswith(",optimum")
    fit_lines = [c for c in comments if c.startswith("# fit:")]
    assert len(fit_lines) == 1 and "exponent=" in fit_lines[0]
    flags = [int(r.rsplit(",", 1)[1]) for r in rows]
    assert sum(flags) == 3  # one optimum per N/kappa point


def test_gamma_range_command_schema(tmp_path):
    out = tmp_path / "g.csv"
    code = main([
        "gamma-range", "--scheme", "adaptive-limited", "--n-over-kappa", "30",
        "--n-traj", "8", "--out", str(out), "--seed", "2",
    ])
    assert code == 0
    _, header, rows = _data_rows(out)
    assert header == "n_over_kappa,gamma_low,gamma_high,bound_low,bound_high"
    assert len(rows) == 1
    fields = rows[0].split(",")
    assert float(fields[0]) == 30.0
    assert float(fields[3]) < float(fields[4])


def test_compare_command_schema(tmp_path):
    out = tmp_path / "c.csv"
    code = main([
        "compare", "--scheme", "adaptive-coherent", "--n-over-kappa", "100",
        "--budget", "12", "--n-traj", "8", "--grid-size", "128",
        "--out", str(out), "--seed", "2",
    ])
    assert code == 0
    _, header, rows = _data_rows(out)
    assert header == "n_over_kappa,variance_ratio,msd_over_variance,v_linear,v_bayes"
    assert len(rows) == 1
    vals = list(map(float, rows[0].split(",")))
    assert vals[1] > 0.8 and vals[2] >= 0.0


@pytest.mark.slow
def test_table1_six_rows_per_flux(tmp_path):
    out = tmp_path / "t.csv"
    code = main([
        "table1", "--n-over-kappa", "50", "--budget", "12", "--n-traj", "8",
        "--out", str(out), "--seed", "3",
    ])
    assert code == 0
    _, header, rows = _data_rows(out)
    assert header.startswith("detection,squeezing,n_over_kappa,sigma2_sqrt_n")
    assert len(rows) == 6
    schemes = {(r.split(",")[0], r.split(",")[1]) for r in rows}
    assert len(schemes) == 6
    # predicted column carries the closed-form constants
    for row in rows:
        f = row.split(",")
        if f[1] == "coherent":
            expect = 0.5 if f[0] == "adaptive" else 1.0 / math.sqrt(2.0)
            assert float(f[5]) == pytest.approx(expect)


def test_bad_scheme_label(tmp_path, capsys):
    assert main(["scaling", "--scheme", "nonsense", "--n-over-kappa", "10", "100", "1000"]) == 1
    assert "scheme" in capsys.readouterr().err


def test_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "sqzphase.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "simulate" in proc.stdout and "table1" in proc.stdout
