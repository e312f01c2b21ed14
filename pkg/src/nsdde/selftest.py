"""Release-gate suites run by ``nsdde selftest``.

Each suite compares a production code path with an independent oracle and
returns a :class:`SuiteResult`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import catalog as cat
from . import inequalities, oracle, stability
from .ctmc import sample_states_at, validate_generator
from .model import (
    InitialSegment,
    builtin_example_sec5,
    builtin_remark42,
    catalog_model,
    evaluate_LV,
    linear_neutral,
    linear_test_model,
    quadratic_LV,
    quadratic_lyapunov,
    remark42_closed_form_LV,
)
from .theta_em import SchemeConfig, implicit_solve, simulate_path


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def suite_linear_oracle() -> SuiteResult:
    worst = 0.0
    for theta in (0.0, 0.6, 1.0):
        model = linear_test_model(1.0)
        cfg = SchemeConfig(theta, 10, 1.0, 1000)
        path = simulate_path(model, cfg, InitialSegment.constant(1.0), np.ones(1001, dtype=np.int64), None,
                             increments=np.zeros((1000, 1)))
        ref = oracle.linear_path(oracle.LinearTestProblem(1.0, theta, cfg.delta), 1.0, 1000)
        worst = max(worst, float(np.max(np.abs(path.states[cfg.m_steps:, 0] - np.array(ref)))))
    return SuiteResult("linear_oracle", worst <= 1e-12, f"max |X_k - ratio^k| = {worst:.2e} (k <= 1000)")


def _scalar_instances():
    sec5, _ = builtin_example_sec5()
    remark_flavor = catalog_model(
        cat.CatalogCoefficients(
            cat.TermTable.empty(1),
            cat.TermTable.from_terms([(-1.0, cat.CUBIC, cat.ONE), (-1.0, cat.LINEAR, cat.ONE)], 1),
            cat.TermTable.empty(1),
        ),
        name="cubic",
    )
    return [sec5, linear_test_model(2.0), remark_flavor]


def suite_implicit_solver(n: int = 1000, seed: int = 7) -> SuiteResult:
    rng = np.random.default_rng(seed)
    models = _scalar_instances()
    worst = 0.0
    for _ in range(n):
        model = models[rng.integers(len(models))]
        i = int(rng.integers(1, model.n_regimes + 1))
        y = float(rng.uniform(-3, 3))
        rhs = float(rng.uniform(-3, 3))
        h = float(rng.uniform(0.0, 0.99)) / model.one_sided_L
        x = float(implicit_solve(model, [y], 0.0, i, [rhs], h)[0])
        c = rhs + float(model.D(np.array([y]), i)[0])

        def G(v):
            return v - h * float(model.f(np.array([v]), np.array([y]), 0.0, i)[0]) - c

        mu = 1.0 - model.one_sided_L * h
        r = abs(G(0.0)) / mu + 1.0
        xb = oracle.scalar_bisection_solve(G, -r, r, tol=1e-14)
        worst = max(worst, abs(x - xb))
    return SuiteResult("implicit_solver", worst <= 1e-9, f"Newton vs bisection max diff {worst:.2e} over {n} instances")


def suite_ctmc_law(seed: int = 11) -> SuiteResult:
    rng = np.random.default_rng(seed)
    gen = validate_generator([[-1.0, 1.0], [2.0, -2.0]])
    n = 100_000
    p_ref = oracle.ctmc_marginal(gen.tolist(), 1, 1.0)[0]
    p_hat = float(np.mean(sample_states_at(gen, 1, 1.0, n, rng) == 1))
    sig = math.sqrt(p_ref * (1 - p_ref) / n)
    ok_marginal = abs(p_hat - p_ref) <= 3 * sig
    delta, trials = 1e-3, 1_000_000
    gen3 = validate_generator([[-3.0, 1.0, 2.0], [0.5, -1.0, 0.5], [4.0, 1.0, -5.0]])
    ok_rates = True
    for i in range(1, 4):
        states = sample_states_at(gen3, i, delta, trials, rng)
        exact = oracle.ctmc_marginal(gen3.tolist(), i, delta)
        for j in range(1, 4):
            if j == i:
                continue
            q = gen3.rates[i - 1, j - 1]
            freq = float(np.mean(states == j))
            # second-order remainder measured with the series oracle
            slack = 3 * math.sqrt(q * delta / trials) + abs(exact[j - 1] - q * delta)
            ok_rates &= abs(freq - q * delta) <= slack
    return SuiteResult(
        "ctmc_law",
        bool(ok_marginal and ok_rates),
        f"P(r(1)=1) = {p_hat:.5f} vs {p_ref:.5f} (3 sigma {3 * sig:.1e}); one-step rates {'ok' if ok_rates else 'off'}",
    )


def suite_certificate() -> SuiteResult:
    model, _ = builtin_example_sec5()
    cfg = SchemeConfig(1.0, 100, 1.0, 800)
    cert = stability.certify_scheme(model, cfg)
    k = 3.0 + 2.0 * math.sqrt(2.0)
    expected = k / (1.0 - k / 36.0) * (25.0 / 72.0)
    ok = abs(cert.threshold - expected) <= 1e-12 and abs(cert.threshold - 2.4147) <= 1e-3 and cert.passed
    ok &= not stability.certify_scheme(model, SchemeConfig(0.5, 100, 1.0, 800)).passed
    from dataclasses import replace

    ok &= not stability.certify_scheme(replace(model, beta=0.5), cfg).passed
    lam, a1, a2 = 1.0, 8.0, 5.0 / 12.0
    rep = stability.certify_exact_quadratic(model, validate_generator([[-1, 1], [1, -1]]), lam, a1, a2,
                                            (-5, 5), 10_000, np.random.default_rng(3))
    e = oracle.exp_series(lam * model.tau)
    ok &= abs(rep.gates[0].margin - (a1 - a2 * e)) <= 1e-12 and abs(rep.gates[1].margin - (1 - e / 6)) <= 1e-12
    ok &= rep.passed
    return SuiteResult("certificate", bool(ok), f"threshold = {cert.threshold:.6f} (expected {expected:.6f})")


def suite_inequalities(n: int = 100_000, seed: int = 5) -> SuiteResult:
    rng = np.random.default_rng(seed)
    sec5, _ = builtin_example_sec5()
    rem = builtin_remark42(1.0, linear_neutral([0.3, -0.2]), 0.3, n_regimes=2)
    lin = linear_test_model(1.0)
    bad = 0
    for model in (sec5, rem, lin):
        bad += inequalities.neutral_power_bound(model, (-5, 5), n, rng).n_violations
    bad2 = inequalities.binomial_power_bound(n, rng).n_violations
    return SuiteResult("inequalities", bad == 0 and bad2 == 0, f"violations: contraction bound {bad}, binomial bound {bad2}")


def suite_lv(n: int = 1000, seed: int = 13) -> SuiteResult:
    rng = np.random.default_rng(seed)
    sec5, gen = builtin_example_sec5()
    rem = builtin_remark42(1.0, linear_neutral([0.3, -0.2]), 0.3, n_regimes=2)
    lyap = quadratic_lyapunov()
    worst = 0.0
    for _ in range(n):
        i = int(rng.integers(1, 3))
        for model, closed in ((sec5, lambda mo, x, y, i: quadratic_LV(mo, x, y, 0.0, i)),
                              (rem, remark42_closed_form_LV)):
            x = rng.uniform(-3, 3, model.dim_x)
            y = rng.uniform(-3, 3, model.dim_x)
            a = evaluate_LV(model, gen, lyap, x, y, 0.0, i)
            b = closed(model, x, y, i)
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return SuiteResult("lv_evaluator", worst <= 1e-12, f"max relative difference {worst:.2e}")


SUITES = (
    suite_linear_oracle,
    suite_implicit_solver,
    suite_ctmc_law,
    suite_certificate,
    suite_inequalities,
    suite_lv,
)


def run_all() -> list[SuiteResult]:
    out = []
    for suite in SUITES:
        try:
            out.append(suite())
        except Exception as exc:  # a crashing suite is a failing suite
            out.append(SuiteResult(suite.__name__.removeprefix("suite_"), False, f"error: {exc!r}"))
    return out
