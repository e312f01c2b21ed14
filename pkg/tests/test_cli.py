import io as _io
import math

import numpy as np
import pytest

from nsdde import io
from nsdde.cli import main

from .conftest import SEC5_CONFIG

SMALL = SEC5_CONFIG.replace("n_paths = 2000", "n_paths = 40").replace("m_steps = 100", "m_steps = 20")


def run(argv):
    out = _io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


class TestSimulate:
    def test_row_count(self, write_config, tmp_path):
        cfg = write_config(SEC5_CONFIG)
        dest = tmp_path / "p.csv"
        code, text = run(["--config", str(cfg), "--output", str(dest), "simulate"])
        assert code == 0
        t, x, r = io.read_path_csv(dest)
        assert t.size == 1 + 800 + 100
        assert "blowup = no" in text

    def test_flags_after_command(self, write_config, tmp_path):
        cfg = write_config(SEC5_CONFIG)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(["simulate", "--config", str(cfg), "--output", str(a), "--seed", "7"])[0] == 0
        assert run(["--seed", "7", "--config", str(cfg), "simulate", "--output", str(b)])[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_seed_override_changes_path(self, write_config, tmp_path):
        cfg = write_config(SEC5_CONFIG)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(["simulate", "--config", str(cfg), "--output", str(a)])
        run(["simulate", "--config", str(cfg), "--output", str(b), "--seed", "43"])
        assert a.read_bytes() != b.read_bytes()

    def test_trivial_model_zero_columns(self, write_config, tmp_path):
        cfg = write_config("[model]\nname = trivial\ndim = 2\nxi = [0.0]\n[scheme]\nm_steps = 10\nhorizon = 2.0\n"
                           "[chain]\ngenerator = [[0.0]]\n")
        dest = tmp_path / "p.csv"
        assert run(["simulate", "--config", str(cfg), "--output", str(dest)])[0] == 0
        _, x, _ = io.read_path_csv(dest)
        assert x.shape == (31, 2) and np.all(x == 0)

    def test_blowup_is_not_an_error(self, write_config, tmp_path):
        cfg = write_config("[model]\nname = linear\na = -3.0\n[scheme]\ntheta = 0.0\nm_steps = 1\nhorizon = 100.0\n"
                           "[chain]\ngenerator = [[0.0]]\n")
        code, text = run(["simulate", "--config", str(cfg), "--output", str(tmp_path / "p.csv")])
        assert code == 0
        assert "blowup = yes" in text

    def test_invalid_theta(self, write_config, capsys):
        cfg = write_config(SEC5_CONFIG.replace("theta = 1.0", "theta = 1.5"))
        assert run(["simulate", "--config", str(cfg)])[0] == 1
        assert "scheme.theta" in capsys.readouterr().err

    def test_output_from_config(self, write_config, tmp_path):
        dest = tmp_path / "from_cfg.csv"
        cfg = write_config(SMALL.replace("[ensemble]", f"[ensemble]\noutput = {dest}"))
        assert run(["moments", "--config", str(cfg)])[0] == 0
        assert dest.exists()


class TestMoments:
    def test_trivial_constant_one(self, write_config, tmp_path):
        cfg = write_config("[model]\nname = trivial\n[scheme]\nm_steps = 10\nhorizon = 1.0\n[ensemble]\nn_paths = 5\n"
                           "[chain]\ngenerator = [[0.0]]\n")
        dest = tmp_path / "m.csv"
        assert run(["moments", "--config", str(cfg), "--output", str(dest)])[0] == 0
        assert np.all(io.read_moment_csv(dest).values == 1.0)

    def test_linear_matches_ratio(self, write_config, tmp_path):
        cfg = write_config("[model]\nname = linear\na = 1.0\n[scheme]\nm_steps = 10\nhorizon = 5.0\ntheta = 0.6\n"
                           "[ensemble]\nn_paths = 3\np_moment = 1.0\n[chain]\ngenerator = [[0.0]]\n")
        dest = tmp_path / "m.csv"
        run(["moments", "--config", str(cfg), "--output", str(dest)])
        c = io.read_moment_csv(dest)
        ratio = (1 - 0.4 * 0.1) / (1 + 0.6 * 0.1)
        np.testing.assert_allclose(c.values, ratio ** np.arange(51), rtol=1e-12)

    def test_example_footer(self, write_config, tmp_path):
        cfg = write_config(SMALL)
        dest = tmp_path / "m.csv"
        code, text = run(["moments", "--config", str(cfg), "--output", str(dest)])
        assert code == 0
        c = io.read_moment_csv(dest)
        assert c.n_blowups == 0 and c.n_paths == 40
        assert c.values[-1] < c.values[0]
        assert "# seed = 42" in dest.read_text()

    def test_workers_do_not_change_bytes(self, write_config, tmp_path):
        cfg = write_config(SMALL.replace("n_paths = 40", "n_paths = 200"))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(["moments", "--config", str(cfg), "--output", str(a), "--workers", "1"])
        run(["moments", "--config", str(cfg), "--output", str(b), "--workers", "3"])
        assert a.read_bytes() == b.read_bytes()


class TestLyapunov:
    def test_injected_curve(self, tmp_path):
        t = np.arange(0, 201) * 0.05
        v = np.exp(-2 * t)
        lines = ["t,moment,stderr,ci_low,ci_high"] + [f"{a!r},{b!r},0.0,{b!r},{b!r}" for a, b in zip(t.tolist(), v.tolist())]
        src = tmp_path / "c.csv"
        src.write_text("\n".join(lines) + "\n# n_paths = 1\n")
        code, text = run(["lyapunov", "--curve", str(src)])
        assert code == 0
        slope = float(text.split("moment_slope = ")[1].split()[0])
        assert slope == pytest.approx(-2.0, rel=1e-9)

    def test_example_small(self, write_config):
        cfg = write_config(SMALL)
        code, text = run(["lyapunov", "--config", str(cfg)])
        assert code == 0
        assert "window = [2.0, 8.0]" in text
        assert "pathwise_window = [7.0, 8.0]" in text
        slope = float(text.split("moment_slope = ")[1].split()[0])
        assert slope < -0.8

    def test_malformed_curve_is_input_error(self, tmp_path):
        src = tmp_path / "c.csv"
        src.write_text("t,moment,stderr,ci_low,ci_high\n0.0,abc,0,0,0\n")
        assert run(["lyapunov", "--curve", str(src)])[0] == 1

    def test_non_positive_curve_is_internal(self, tmp_path):
        src = tmp_path / "c.csv"
        src.write_text("t,moment,stderr,ci_low,ci_high\n" + "".join(f"{k}.0,0.0,0.0,0.0,0.0\n" for k in range(20)))
        assert run(["lyapunov", "--curve", str(src)])[0] == 3


class TestCertify:
    def test_example_pass(self, write_config):
        code, text = run(["certify", "--config", str(write_config(SEC5_CONFIG))])
        assert code == 0
        assert "threshold = 2.4147" in text
        assert "check,margin,pass" in text
        assert "# [model]" in text

    def test_theta_half_fails(self, write_config):
        code, text = run(["certify", "--config", str(write_config(SEC5_CONFIG.replace("theta = 1.0", "theta = 0.5")))])
        assert code == 2
        assert "theta_range,0.0,false" in text

    def test_beta_half_fails(self, write_config):
        cfg = write_config(SEC5_CONFIG.replace("name = sec5", "name = sec5\nbeta = 0.5"))
        code, text = run(["certify", "--config", str(cfg)])
        assert code == 2
        assert "contraction," in text and "check.contraction = fail" in text

    def test_ill_posed_names_well_posedness(self, write_config):
        cfg = write_config(SEC5_CONFIG.replace("name = sec5", "name = sec5\none_sided_l = 200.0"))
        code, text = run(["certify", "--config", str(cfg)])
        assert code == 2
        assert "well_posedness," in text and "check.well_posedness = fail" in text

    def test_exact_quadratic_section(self, write_config, tmp_path):
        cfg = write_config(SEC5_CONFIG + "\n[certify]\nlambda = 1.0\nalpha1 = 8.0\nalpha2 = 0.4166666666666667\n")
        rows = tmp_path / "rows.csv"
        code, text = run(["certify", "--config", str(cfg), "--output", str(rows)])
        assert code == 0
        assert "alpha_gate," in text and "lv_inequality," in text
        assert rows.read_text().splitlines()[0] == "check,margin,pass"
        assert len(rows.read_text().splitlines()) == 8

    def test_missing_constants(self, write_config):
        cfg = write_config("[model]\nname = linear\n[chain]\ngenerator = [[0.0]]\n")
        assert run(["certify", "--config", str(cfg)])[0] == 1


class TestSelftestAndUsage:
    def test_selftest_passes(self):
        code, text = run(["selftest"])
        assert code == 0
        assert text.count("PASS") == 6

    def test_mutated_threshold_detected(self):
        code, text = run(["selftest", "--mutate-threshold", "5.0"])
        assert code != 0
        assert "FAIL certificate" in text

    def test_mutation_is_restored(self):
        from nsdde import stability

        run(["selftest", "--mutate-threshold", "5.0"])
        assert stability.CERT_CONSTANT == 3 + 2 * math.sqrt(2)

    @pytest.mark.parametrize("argv", [[], ["bogus"], ["simulate", "--seed", "x"], ["simulate"], ["moments", "--workers", "0"]])
    def test_usage_errors_exit_1(self, argv):
        assert run(argv)[0] == 1

    def test_missing_config_file(self, tmp_path):
        assert run(["simulate", "--config", str(tmp_path / "none.cfg")])[0] == 1
