"""Command-line front end.

Usage::

    nsdde [--config FILE] [--output FILE] [--seed N] [--workers N] COMMAND

Commands are ``simulate``, ``moments``, ``lyapunov``, ``certify`` and
``selftest``. Global flags may also follow the command name.

Exit codes: 0 success, 1 usage or config error, 2 certificate fail,
3 internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from . import io, selftest, stability
from .config import RunConfig
from .ctmc import regime_at_grid, sample_regime_path
from .ensemble import path_streams, pathwise_exponents, run_ensemble
from .errors import ConfigError, MissingConstants, NSDDEError
from .theta_em import simulate_path

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CERT_FAIL = 2
EXIT_INTERNAL = 3

_DEFAULT_OUTPUT = {"simulate": "path.csv", "moments": "moments.csv"}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for certificate failure
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--config", metavar="PATH", help="run configuration file", **kw)
    p.add_argument("--output", metavar="PATH", help="output file (overrides ensemble.output)", **kw)
    p.add_argument("--seed", type=int, metavar="INT", help="master seed (overrides ensemble.seed)", **kw)
    p.add_argument("--workers", type=int, metavar="INT", help="worker threads; never changes results", **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nsdde", description="theta-EM simulation and stability checks for neutral SDDEs with Markov switching")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="simulate one path and write its CSV")
    _add_globals(p, True)
    p = sub.add_parser("moments", help="estimate E|X(t)|^p over an ensemble and write the curve CSV")
    _add_globals(p, True)
    p = sub.add_parser("lyapunov", help="fit the moment exponent and summarise pathwise exponents")
    _add_globals(p, True)
    p.add_argument("--curve", metavar="CSV", help="fit an existing moment-curve CSV instead of simulating")
    p = sub.add_parser("certify", help="check the discrete-scheme stability hypotheses")
    _add_globals(p, True)
    p = sub.add_parser("selftest", help="run the oracle suites")
    _add_globals(p, True)
    p.add_argument("--mutate-threshold", type=float, default=None, help=argparse.SUPPRESS)
    return parser


# ------------------------------------------------------------------ helpers


def _load(args, **kw) -> RunConfig:
    if not args.config:
        raise ConfigError(f"{args.command} needs --config")
    cfg = RunConfig.load(args.config, **kw)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed: must be non-negative")
        cfg.seed = args.seed
    return cfg


def _output(args, cfg: RunConfig) -> Path:
    return Path(args.output or cfg.output_path or _DEFAULT_OUTPUT[args.command])


def _ensemble(cfg: RunConfig, args, retain: bool):
    model = cfg.build_model()
    scheme = cfg.scheme_config(model)
    result = run_ensemble(
        model, scheme, cfg.ensemble_config(), cfg.build_generator(), cfg.i0, cfg.initial_segment(model),
        workers=args.workers or 1, retain=retain,
    )
    return model, scheme, result


def _echo_config(cfg: RunConfig, out) -> None:
    for line in cfg.to_text().splitlines():
        print(f"# {line}" if line else "#", file=out)


# ----------------------------------------------------------------- commands


def cmd_simulate(args, out) -> int:
    cfg = _load(args)
    model = cfg.build_model()
    scheme = cfg.scheme_config(model)
    chain_rng, noise_rng = path_streams(cfg.seed, 0)
    rp = sample_regime_path(cfg.build_generator(), cfg.i0, max(scheme.horizon, scheme.delta), chain_rng)
    regimes = regime_at_grid(rp, scheme.delta, scheme.horizon_steps)
    path = simulate_path(model, scheme, cfg.initial_segment(model), regimes, noise_rng, keep_increments=False)
    dest = _output(args, cfg)
    io.write_path_csv(path, dest)
    print(f"model = {model.name}", file=out)
    print(f"steps = {scheme.horizon_steps} (delta = {scheme.delta!r}, m = {scheme.m_steps})", file=out)
    print(f"rows = {path.states.shape[0]}", file=out)
    print(f"regime_jumps = {len(rp.jump_times)}", file=out)
    if path.blew_up:
        print(f"blowup = yes, at step {path.blowup_at} (t = {path.blowup_at * scheme.delta!r}); path truncated", file=out)
    else:
        print(f"blowup = no; final |X| = {float(path.norms()[-1])!r}", file=out)
    print(f"output = {dest}", file=out)
    return EXIT_OK


def cmd_moments(args, out) -> int:
    cfg = _load(args)
    model, scheme, res = _ensemble(cfg, args, retain=False)
    curve = res.curve
    dest = _output(args, cfg)
    extra = {"model": model.name, "m_steps": scheme.m_steps, "horizon": scheme.horizon, "i0": cfg.i0}
    io.write_moment_csv(curve, dest, extra)
    print(f"model = {model.name}", file=out)
    print(f"n_paths = {curve.n_paths}", file=out)
    print(f"n_blowups = {curve.n_blowups}", file=out)
    print(f"moment_at_horizon = {float(curve.values[-1])!r} (stderr {float(curve.std_err[-1])!r})", file=out)
    print(f"output = {dest}", file=out)
    return EXIT_OK


def cmd_lyapunov(args, out) -> int:
    if args.curve:
        try:
            curve = io.read_moment_csv(args.curve)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"--curve: cannot read moment CSV {args.curve}: {exc}") from None
        window = (float(curve.times[0]), float(curve.times[-1]))
        if args.config:
            cfg = _load(args)
            if cfg.window is not None:
                window = cfg.window
        est = stability.fit_moment_exponent(curve, window)
        print(f"source = {args.curve}", file=out)
        _print_moment_fit(est, out)
        return EXIT_OK

    cfg = _load(args)
    _echo_config(cfg, out)
    model, scheme, res = _ensemble(cfg, args, retain=True)
    window = cfg.fit_window()
    est = stability.fit_moment_exponent(res.curve, window)
    _print_moment_fit(est, out)
    print(f"n_paths = {res.curve.n_paths}", file=out)
    print(f"n_blowups = {res.curve.n_blowups}", file=out)
    summary = pathwise_exponents(res.paths, cfg.tail_window())
    pw = stability.pathwise_estimate(summary)
    print(f"pathwise_window = [{summary.window[0]!r}, {summary.window[1]!r}]", file=out)
    print(f"pathwise_mean = {pw.slope!r} (stderr {pw.std_err!r})", file=out)
    print(f"pathwise_q95 = {summary.q95!r}", file=out)
    print(f"pathwise_zero_paths = {summary.n_zero}", file=out)
    print(f"pathwise_excluded = {summary.n_excluded}", file=out)
    if args.output:
        io.write_moment_csv(res.curve, args.output, {"model": model.name, "m_steps": scheme.m_steps})
        print(f"output = {args.output}", file=out)
    return EXIT_OK


def _print_moment_fit(est, out) -> None:
    print(f"window = [{est.window[0]!r}, {est.window[1]!r}]", file=out)
    print(f"p = {est.p_moment!r}", file=out)
    print(f"moment_slope = {est.slope!r} (stderr {est.std_err!r}, {est.n_points} points)", file=out)


def cmd_certify(args, out) -> int:
    # the well-posedness gate is reported as a check, not enforced at load
    cfg = _load(args, require_well_posed=False)
    model = cfg.build_model()
    scheme = cfg.scheme_config(model, check=False)
    _echo_config(cfg, out)
    try:
        cert = stability.certify_scheme(model, scheme)
    except MissingConstants as exc:
        raise ConfigError(f"model.c1/model.c2: {exc}") from None
    print(cert.to_text(), file=out)
    passed = cert.passed
    rows = list(cert.to_rows())
    if cfg.certify:
        need = {"lambda", "alpha1", "alpha2"} - set(cfg.certify)
        if need:
            raise ConfigError(f"certify: missing key(s) {', '.join(sorted(need))}")
        rng = path_streams(cfg.seed, 0)[0]
        sampled = stability.certify_exact_quadratic(
            model, cfg.build_generator(), cfg.certify["lambda"], cfg.certify["alpha1"], cfg.certify["alpha2"],
            tuple(cfg.certify.get("box", (-5.0, 5.0))), cfg.certify.get("n_samples", 10_000), rng,
        )
        print("# moment hypotheses with V = |x|^2 (sampled)", file=out)
        print(sampled.to_text(), file=out)
        rows += [(c.name, c.margin, c.passed) for c in sampled.checks]
        passed = passed and sampled.passed
    print("check,margin,pass", file=out)
    for name, margin, ok in rows:
        print(f"{name},{margin!r},{'true' if ok else 'false'}", file=out)
    print(f"result = {'pass' if passed else 'fail'}", file=out)
    if args.output:
        lines = ["check,margin,pass", *(f"{n},{m!r},{'true' if ok else 'false'}" for n, m, ok in rows)]
        io.atomic_write(args.output, "\n".join(lines) + "\n")
    return EXIT_OK if passed else EXIT_CERT_FAIL


def cmd_selftest(args, out) -> int:
    saved = stability.CERT_CONSTANT
    if args.mutate_threshold is not None:
        stability.CERT_CONSTANT = args.mutate_threshold
    try:
        results = selftest.run_all()
    finally:
        stability.CERT_CONSTANT = saved
    for r in results:
        print(r.line(), file=out)
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} suites passed", file=out)
    # a failing oracle suite means the implementation is broken
    return EXIT_OK if n_fail == 0 else EXIT_INTERNAL


COMMANDS = {
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "lyapunov": cmd_lyapunov,
    "certify": cmd_certify,
    "selftest": cmd_selftest,
}


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    if args.workers is not None and args.workers < 1:
        print("nsdde: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"nsdde: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NSDDEError as exc:
        print(f"nsdde: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
