import subprocess
import sys

import numpy as np
import pytest

import decolab as dl
from decolab.cli import fit_scaling, main
from decolab.errors import ValidationError

TIMES_CFG = """\
[experiment]
kind = times
[separation]
dq = 2.0
dp = 0.0
[system]
mass = 1.0
hbar = 1.0
[bath]
var_b = 1.0
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_rows(path):
    header = None
    rows = []
    for line in open(path):
        if line.startswith("#"):
            continue
        if header is None:
            header = line.strip().split(",")
        else:
            rows.append(dict(zip(header, line.strip().split(","))))
    return header, rows


class TestFitScaling:
    def test_synthetic_power_law_exact(self):
        hbars = np.geomspace(0.25, 4.0, 8)
        fit = fit_scaling(hbars, hbars / 2.0, axis="hbar")
        assert fit.exponent == pytest.approx(1.0, abs=1e-12)
        ds = np.geomspace(0.5, 8.0, 8)
        fit = fit_scaling(ds, 1.0 / ds, axis="distance")
        assert fit.exponent == pytest.approx(1.0, abs=1e-12)
        assert fit.stderr < 1e-12

    def test_golden_rule_distance_exponent(self):
        corr = dl.exponential_correlation(1.0, 1.0)
        sysp = dl.SystemParams(1.0, omega=0.0)
        ds = np.geomspace(0.5, 5.0, 6)
        taus = [dl.golden_rule_times(corr, sysp, d).tau_dec for d in ds]
        fit = fit_scaling(ds, taus, axis="distance")
        assert fit.exponent == pytest.approx(2.0, abs=0.01)

    def test_validation(self):
        with pytest.raises(ValidationError):
            fit_scaling([1.0, 2.0, 4.0], [1.0, 1.0, 1.0])  # too few
        with pytest.raises(ValidationError):
            fit_scaling([1.0, 2.0, 4.0, -8.0], [1.0] * 4)  # nonpositive
        with pytest.raises(ValidationError):
            fit_scaling([1.0, 2.0, 3.0, 4.0], [1.0] * 4)  # not log-spaced


class TestExperiments:
    def test_times_row(self, tmp_path, capsys):
        cfg = write(tmp_path, "t.ini", TIMES_CFG)
        out = str(tmp_path / "out.csv")
        assert main(["times", "--config", cfg, "--out", out]) == 0
        header, rows = read_rows(out)
        assert float(rows[0]["tau_q"]) == 0.5
        assert rows[0]["tau_qp"] == "inf"

    def test_empty_sweep_rejected(self, tmp_path, capsys):
        cfg = write(
            tmp_path,
            "s.ini",
            "[experiment]\nkind = sweep\n[sweep]\naxis = hbar\ntarget = tau_q\n"
            "start = 1.0\nstop = 2.0\nnum = 2\n[base]\ndq = 1.0\n",
        )
        assert main(["sweep", "--config", cfg]) == 1
        assert "validation" in capsys.readouterr().err

    def test_unknown_experiment(self, capsys):
        assert main(["frobnicate", "--config", "/nonexistent"]) == 1

    def test_cap_exceeding_config_rejected_before_allocation(self, tmp_path, capsys):
        cfg = write(
            tmp_path,
            "o.ini",
            "[experiment]\nkind = oracle-compare\n[bath-model]\nm = 14\n"
            "var_total = 1.0\nomega = 0\ncap = 4096\n[compare]\nd = 1.0\n"
            "[times]\nstart = 0.01\nstop = 1.0\nnum = 10\n",
        )
        assert main(["oracle-compare", "--config", cfg]) == 1
        assert "cap" in capsys.readouterr().err

    def test_sweep_fit_header(self, tmp_path):
        cfg = write(
            tmp_path,
            "s.ini",
            "[experiment]\nkind = sweep\n[sweep]\naxis = distance\ntarget = tau_q\n"
            "start = 0.5\nstop = 8.0\nnum = 8\n[base]\ndq = 1.0\n",
        )
        out = str(tmp_path / "sweep.csv")
        assert main(["sweep", "--config", cfg, "--out", out]) == 0
        text = open(out).read()
        assert "# fit-exponent: 1" in text

    def test_oracle_compare_deterministic(self, tmp_path):
        cfg = write(
            tmp_path,
            "o.ini",
            "[experiment]\nkind = oracle-compare\n[bath-model]\nm = 6\n"
            "var_total = 1.0\nomega = linear:0.6:1.8\ncap = 4096\n[compare]\n"
            "d = 1.0\nprotocol = frozen\nlaw = memory\n[times]\n"
            "start = 0.02\nstop = 1.5\nnum = 12\n",
        )
        out1, out2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        assert main(["oracle-compare", "--config", cfg, "--out", out1]) == 0
        assert main(["oracle-compare", "--config", cfg, "--out", out2]) == 0
        assert open(out1, "rb").read() == open(out2, "rb").read()
        header, rows = read_rows(out1)
        assert header == ["t", "n_oracle", "n_law", "abs_diff"]
        assert all(float(r["abs_diff"]) < 0.05 for r in rows)

    def test_oracle_compare_static_protocol(self, tmp_path):
        cfg = write(
            tmp_path,
            "o.ini",
            "[experiment]\nkind = oracle-compare\n[bath-model]\nm = 16\n"
            "var_total = 1.0\nomega = 0\ncap = 65536\n[compare]\nd = 2.0\n"
            "protocol = static\nlaw = gaussian\n[times]\n"
            "start = 0.0\nstop = 0.8\nnum = 100\n",
        )
        out = str(tmp_path / "o.csv")
        assert main(["oracle-compare", "--config", cfg, "--out", out]) == 0
        _, rows = read_rows(out)
        in_window = [r for r in rows if float(r["n_oracle"]) >= 0.1]
        assert max(float(r["abs_diff"]) for r in in_window) <= 0.02

    def test_norm_two_reservoir_and_memory(self, tmp_path):
        cfg_two = write(
            tmp_path,
            "n2.ini",
            "[experiment]\nkind = norm\n[law]\nkind = two-reservoir\n"
            "[two-reservoir]\ndq = 1.0\ndp = 0.0\nvar_bq = 1.0\nvar_bp = 5.0\n"
            "[times]\nstart = 0.0\nstop = 1.0\nnum = 5\n",
        )
        out = str(tmp_path / "n2.csv")
        assert main(["norm", "--config", cfg_two, "--out", out]) == 0
        _, rows = read_rows(out)
        assert float(rows[-1]["norm"]) == pytest.approx(np.exp(-1.0), rel=1e-12)

        cfg_mem = write(
            tmp_path,
            "nm.ini",
            "[experiment]\nkind = norm\n[law]\nkind = memory\n[memory]\n"
            "correlation = exponential\nvar_b = 1.0\ngamma = 2.0\ndq = 1.5\n"
            "[times]\nstart = 0.0\nstop = 2.0\nnum = 9\n",
        )
        out = str(tmp_path / "nm.csv")
        assert main(["norm", "--config", cfg_mem, "--out", out]) == 0
        _, rows = read_rows(out)
        vals = [float(r["norm"]) for r in rows]
        assert vals[0] == 1.0 and all(b <= a for a, b in zip(vals, vals[1:]))

    def test_spin_montecarlo_seeded(self, tmp_path):
        cfg = write(
            tmp_path,
            "sp.ini",
            "[experiment]\nkind = spin\n[spin]\nj = 10\nalpha = 1+0j\nbeta = -1+0j\n"
            "omega = 0.0\n[bath]\nvar_b = 1.0\nvar_bdot = 0.0\n[norm]\n"
            "mode = montecarlo\nsamples = 20000\nseed = 4\n[times]\n"
            "start = 0.01\nstop = 0.05\nnum = 3\n",
        )
        out1, out2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        assert main(["spin", "--config", cfg, "--out", out1]) == 0
        assert main(["spin", "--config", cfg, "--out", out2, "--seed", "4"]) == 0
        assert open(out1).read() == open(out2).read()
        header, rows = read_rows(out1)
        assert header == ["t", "norm", "stderr"]
        assert all(float(r["stderr"]) > 0 for r in rows)

    def test_templates_parse_and_run(self, tmp_path, capsys):
        # every emitted template must itself be a runnable config
        for experiment in (
            "times", "norm", "sweep", "oracle-compare", "spin", "expansion-check", "clt",
        ):
            assert main([experiment, "--emit-config"]) == 0
            template = capsys.readouterr().out
            cfg = write(tmp_path, f"{experiment}.ini", template)
            out = str(tmp_path / f"{experiment}.csv")
            assert main([experiment, "--config", cfg, "--out", out]) == 0, experiment

    def test_threads_do_not_change_results(self, tmp_path):
        cfg = write(
            tmp_path,
            "s.ini",
            "[experiment]\nkind = sweep\n[sweep]\naxis = hbar\ntarget = tau_p\n"
            "start = 0.5\nstop = 4.0\nnum = 6\n[base]\ndq = 0.0\ndp = 2.0\n",
        )
        out1, out2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        assert main(["sweep", "--config", cfg, "--out", out1]) == 0
        assert main(["sweep", "--config", cfg, "--out", out2, "--threads", "4"]) == 0
        assert open(out1).read() == open(out2).read()

    def test_json_mirror(self, tmp_path):
        import json

        cfg = write(tmp_path, "t.ini", TIMES_CFG)
        out = str(tmp_path / "o.csv")
        jpath = str(tmp_path / "o.json")
        assert main(["times", "--config", cfg, "--out", out, "--json", jpath]) == 0
        payload = json.load(open(jpath))
        assert payload["experiment"] == "times"
        assert payload["columns"][0] == "dq"
        assert len(payload["config_sha256"]) == 64

    def test_wrong_kind_config_rejected(self, tmp_path, capsys):
        cfg = write(tmp_path, "t.ini", TIMES_CFG)
        assert main(["clt", "--config", cfg]) == 1

    def test_numerical_error_maps_to_exit_two(self, tmp_path, capsys, monkeypatch):
        import decolab.cli as cli
        from decolab.errors import IntegrationError

        def broken(cfg, args):
            raise IntegrationError("synthetic failure")

        monkeypatch.setitem(cli.EXPERIMENTS, "times", broken)
        cfg = write(tmp_path, "t.ini", TIMES_CFG)
        assert main(["times", "--config", cfg]) == 2
        assert "numerical" in capsys.readouterr().err


class TestConsoleEntry:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "decolab", "times", "--emit-config"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "[experiment]" in proc.stdout
