"""Acceptance criteria at their stated tolerances.

Each test prints one ``PASS``/``FAIL`` line (visible with ``-s`` or in the
terminal summary) and asserts the same condition.
"""

import io as _io
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from nsdde import inequalities, oracle, stability
from nsdde.cli import main
from nsdde.config import RunConfig
from nsdde.ctmc import regime_at_grid, sample_regime_path, sample_states_at, validate_generator
from nsdde.ensemble import pathwise_exponents, run_ensemble
from nsdde.model import (
    InitialSegment,
    builtin_example_sec5,
    builtin_remark42,
    evaluate_LV,
    linear_neutral,
    linear_test_model,
    quadratic_LV,
    quadratic_lyapunov,
    remark42_closed_form_LV,
)
from nsdde.selftest import suite_implicit_solver
from nsdde.theta_em import SchemeConfig, scheme_residuals, simulate_path

from .conftest import SEC5_CONFIG

K_CERT = 3 + 2 * math.sqrt(2)


@pytest.fixture
def report(capsys):
    def _report(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        return ok

    return _report


@pytest.fixture(scope="module")
def sec5_run():
    cfg = RunConfig.from_text(SEC5_CONFIG)
    model = cfg.build_model()
    scheme = cfg.scheme_config(model)
    start = time.perf_counter()
    res = run_ensemble(model, scheme, cfg.ensemble_config(), cfg.build_generator(), cfg.i0,
                       cfg.initial_segment(model), workers=1, retain=True)
    elapsed = time.perf_counter() - start
    return cfg, res, elapsed


def test_criterion_1_mean_square_decay(sec5_run, report):
    cfg, res, elapsed = sec5_run
    est = stability.fit_moment_exponent(res.curve, (2.0, 8.0))
    ok = est.slope <= -0.8 and res.curve.n_blowups == 0 and elapsed < 120 and res.curve.n_paths == 2000
    assert report(1, ok, f"slope {est.slope:.4f} +- {est.std_err:.4f} on [2, 8] (need <= -0.8), "
                         f"blow-ups {res.curve.n_blowups}, N={res.curve.n_paths}, {elapsed:.1f} s")


def test_criterion_2_pathwise_decay(sec5_run, report):
    cfg, res, _ = sec5_run
    s = pathwise_exponents(res.paths, cfg.tail_window())
    ok = s.mean <= -0.4 and s.q95 <= -0.3 and s.n_excluded == 0 and s.exponents.size == 2000
    assert report(2, ok, f"tail window {list(s.window)}: mean {s.mean:.4f} (need <= -0.4), "
                         f"q95 {s.q95:.4f} (need <= -0.3)")


def test_criterion_3_certificate(report):
    model, _ = builtin_example_sec5()
    cfg = SchemeConfig(1.0, 100, 1.0, 800)
    cert = stability.certify_scheme(model, cfg)
    expected = K_CERT / (1 - K_CERT / 36) * (25 / 72)
    half = stability.certify_scheme(model, replace(cfg, theta=0.5))
    big_beta = stability.certify_scheme(replace(model, beta=0.5), cfg)
    ok = (
        abs(cert.threshold - 2.4147) <= 1e-3
        and abs(cert.threshold - expected) <= 1e-12
        and cert.C1 == 10.0
        and cert.passed
        and not half.passed
        and not half.check("theta_range").passed
        and not big_beta.passed
    )
    assert report(3, ok, f"threshold {cert.threshold:.6f}, verdict {cert.verdict}; theta=0.5 -> {half.verdict}, "
                         f"beta=0.5 -> {big_beta.verdict}")


def test_criterion_3_cli_exit_codes(write_config, report):
    out = _io.StringIO()
    pass_code = main(["certify", "--config", str(write_config(SEC5_CONFIG, "a.cfg"))], out=out)
    fail_code = main(["certify", "--config", str(write_config(SEC5_CONFIG.replace("theta = 1.0", "theta = 0.5"),
                                                              "b.cfg"))], out=out)
    ok = pass_code == 0 and fail_code == 2
    assert report(3, ok, f"certify exit codes: pass -> {pass_code}, theta=0.5 -> {fail_code}")


def test_criterion_4_inequality_suites(report):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    models = [builtin_example_sec5()[0], builtin_remark42(1.0, linear_neutral([0.3, -0.2]), 0.3, n_regimes=2),
              linear_test_model(1.0)]
    contraction = [inequalities.neutral_power_bound(m, (-5, 5), 100_000, rng) for m in models]
    binomial = inequalities.binomial_power_bound(100_000, rng)
    elapsed = time.perf_counter() - start
    bad_contraction = sum(r.n_violations for r in contraction)
    ok = bad_contraction == 0 and binomial.n_violations == 0 and elapsed < 5
    assert report(4, ok, f"neutral power bound violations {bad_contraction} over 3 x 1e5, binomial bound violations "
                         f"{binomial.n_violations} over 1e5, {elapsed:.2f} s")


def test_criterion_5_implicit_solver(report):
    r = suite_implicit_solver(n=1000, seed=99)
    model, gen = builtin_example_sec5()
    cfg = SchemeConfig(1.0, 100, 1.0, 10_000)
    chain_rng, noise_rng = np.random.default_rng(5), np.random.default_rng(6)
    regimes = regime_at_grid(sample_regime_path(gen, 1, cfg.horizon, chain_rng), cfg.delta, cfg.horizon_steps)
    path = simulate_path(model, cfg, InitialSegment.constant(1.0), regimes, noise_rng)
    res = scheme_residuals(model, cfg, path)
    ok = r.passed and res.size == 10_000 and float(res.max()) <= 10 * cfg.tol
    assert report(5, ok, f"{r.detail}; residual max {res.max():.2e} over {res.size} steps (need <= {10 * cfg.tol:.0e})")


def test_criterion_6_linear_closed_form(report):
    worst = 0.0
    for theta in (0.0, 0.6, 1.0):
        for backend in ("compiled", "python", "generic"):
            cfg = SchemeConfig(theta, 10, 1.0, 1000)
            path = simulate_path(linear_test_model(1.0), cfg, InitialSegment.constant(1.0),
                                 np.ones(1001, dtype=np.int64), None, increments=np.zeros((1000, 1)),
                                 backend=backend)
            ref = oracle.linear_path(oracle.LinearTestProblem(1.0, theta, cfg.delta), 1.0, 1000)
            worst = max(worst, float(np.max(np.abs(path.states[10:, 0] - np.array(ref)))))
    assert report(6, worst <= 1e-12, f"max |X_k - ratio^k| = {worst:.2e} for k <= 1000, theta in {{0, 0.6, 1}}")


def test_criterion_7_ctmc_law(report):
    rng = np.random.default_rng(77)
    delta, trials = 1e-3, 1_000_000
    gens = [validate_generator([[-1.0, 1.0], [1.0, -1.0]]),
            validate_generator([[-3.0, 1.0, 2.0], [0.5, -1.0, 0.5], [4.0, 1.0, -5.0]])]
    worst = 0.0  # largest |freq - gamma delta| / allowance
    for gen in gens:
        for i in range(1, gen.n_states + 1):
            states = sample_states_at(gen, i, delta, trials, rng)
            exact = oracle.ctmc_marginal(gen.tolist(), i, delta)
            for j in range(1, gen.n_states + 1):
                q = gen.rates[i - 1, j - 1]
                if j == i or q == 0:
                    continue
                freq = float(np.mean(states == j))
                allowance = 3 * math.sqrt(q * delta / trials) + abs(exact[j - 1] - q * delta)
                worst = max(worst, abs(freq - q * delta) / allowance)
    gen = validate_generator([[-1.0, 1.0], [2.0, -2.0]])
    n = 100_000
    p_ref = oracle.ctmc_marginal(gen.tolist(), 1, 1.0)[0]
    p_hat = float(np.mean(sample_states_at(gen, 1, 1.0, n, rng) == 1))
    sig = math.sqrt(p_ref * (1 - p_ref) / n)
    ok = worst <= 1.0 and abs(p_hat - p_ref) <= 3 * sig
    assert report(7, ok, f"one-step rates worst |freq - gamma*delta| / (3 sigma + O(delta^2)) = {worst:.3f}; "
                         f"P(r(1)=1) {p_hat:.5f} vs {p_ref:.5f} (3 sigma {3 * sig:.1e})")


def test_criterion_8_lv_evaluator(report):
    rng = np.random.default_rng(8)
    lyap = quadratic_lyapunov()
    sec5, gen = builtin_example_sec5()
    rem = builtin_remark42(1.0, linear_neutral([0.3, -0.2]), 0.3, n_regimes=2)
    worst_q = worst_r = 0.0
    for _ in range(10_000):
        i = int(rng.integers(1, 3))
        x, y = rng.uniform(-3, 3, 1), rng.uniform(-3, 3, 1)
        a, b = evaluate_LV(sec5, gen, lyap, x, y, 0.0, i), quadratic_LV(sec5, x, y, 0.0, i)
        worst_q = max(worst_q, abs(a - b) / max(abs(b), 1e-300))
        x, y = rng.uniform(-3, 3, 2), rng.uniform(-3, 3, 2)
        a, b = evaluate_LV(rem, gen, lyap, x, y, 0.0, i), remark42_closed_form_LV(rem, x, y, i)
        worst_r = max(worst_r, abs(a - b) / max(abs(b), 1e-300))
    ok = worst_q <= 1e-12 and worst_r <= 1e-12
    assert report(8, ok, f"relative error vs quadratic form {worst_q:.2e}, vs rotation-model form {worst_r:.2e} "
                         f"(1e4 points each)")


def test_criterion_9_determinism(write_config, tmp_path, report):
    cfg = write_config(SEC5_CONFIG)
    a, b = tmp_path / "w1.csv", tmp_path / "w4.csv"
    out = _io.StringIO()
    ca = main(["moments", "--config", str(cfg), "--output", str(a), "--workers", "1"], out=out)
    cb = main(["moments", "--config", str(cfg), "--output", str(b), "--workers", "4"], out=out)
    same = a.read_bytes() == b.read_bytes()
    ok = ca == 0 and cb == 0 and same
    assert report(9, ok, f"moment CSVs with --workers 1 and --workers 4 byte-identical: {same} "
                         f"({len(a.read_bytes())} bytes)")
