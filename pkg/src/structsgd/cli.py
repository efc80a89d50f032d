"""Command-line harness: ``run``, ``sweep``, ``constants``, ``verify`` and ``bound``.

Exit codes: 0 success, 2 config error, 3 divergence, 4 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import problems as P
from .bounds import (BoundPreconditionError, CURVES, bound_curve, optimal_b, params_from,
                     total_complexity)
from .config import ConfigError, build_experiment, default_sweep, load_config
from .constants import minibatch_table
from .engine import (DivergenceError, first_hit, initial_point, run_many,
                     write_aggregate_csv, write_trajectory_csv)
from .stepsize import gamma_at

__all__ = ["main", "build_parser", "cmd_run", "cmd_sweep", "cmd_constants", "cmd_verify",
           "cmd_bound", "EXIT_OK", "EXIT_CONFIG", "EXIT_DIVERGED", "EXIT_VERIFY"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_VERIFY = 4


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def _out_dir(args, cfg):
    out = args.out or cfg.get("out")
    if out is None:
        raise ConfigError("no output directory: pass --out or set out=")
    os.makedirs(out, exist_ok=True)
    return out


def _say(args, msg):
    if not args.quiet:
        print(msg)


def _workers(cfg):
    return cfg.int("workers")


def _bound_params(exp, **overrides):
    run = exp.run
    x0 = initial_point(run.x0, exp.problem, run.master_seed)
    s = run.schedule
    extra = dict(gamma=s.gamma, c=s.c, T=s.T if s.T is not None else run.iterations,
                 k_star=s.k_star)
    if s.variant != "sps":
        extra["gammas"] = [gamma_at(s, k) for k in range(run.iterations + 1)]
    extra.update(overrides)
    return params_from(exp.report, exp.problem.cert, x0=x0, p=exp.problem, **extra)


def _write_bound(path, curve):
    with open(path, "w", newline="") as fh:
        fh.write("k,bound,valid\n")
        for k, v, ok in curve.rows():
            fh.write(f"{k},{_fmt(v)},{int(ok)}\n")


def cmd_run(args, cfg):
    exp = build_experiment(cfg, seeds=args.seeds)
    out = _out_dir(args, cfg)
    agg = run_many(exp.run, workers=_workers(cfg), keep=True)
    for t in agg.trajectories:
        write_trajectory_csv(os.path.join(out, f"seed_{t.seed_index}.csv"), t)
    write_aggregate_csv(os.path.join(out, "aggregate.csv"), agg)
    with open(os.path.join(out, "resolved.cfg"), "w") as fh:
        fh.write(exp.resolved().dumps())
    theorem = cfg.get("theorem")
    if theorem:
        curve = bound_curve(theorem, _bound_params(exp), exp.run.iterations, exp.run.log_every)
        _write_bound(os.path.join(out, "bound.csv"), curve)
    _say(args, f"wrote {agg.seeds} trajectories to {out}")
    _say(args, f"final mean_f_sub={_fmt(agg.mean_f_sub[-1])}")
    return EXIT_OK


def sweep_rows(cfg, seeds=None, workers=None):
    """Rows ``(b, empirical_tc, theoretical_tc, predicted_b, censored)`` of a batch-size sweep."""
    eps = cfg.float("target_eps")
    if eps is None or eps <= 0:
        raise ConfigError("sweep needs target_eps > 0")
    base = build_experiment(cfg, sampling="full", seeds=seeds)
    n = base.problem.n
    if cfg.get("sweep_values"):
        try:
            values = [int(v) for v in cfg.get("sweep_values").split(",")]
        except ValueError:
            raise ConfigError("sweep_values must be a comma list of integers") from None
    else:
        values = default_sweep(n)
    setting = cfg.get("tc_setting")
    cert = base.problem.cert
    if setting == "pl_interp":
        predicted = optimal_b(setting, n, cert.L, cert.L_max, cert.mu)
    else:
        predicted = optimal_b(setting, n, cert.L, cert.L_max)
    rows = []
    for b in values:
        exp = build_experiment(cfg, sampling=f"minibatch:{b}", seeds=seeds)
        agg = run_many(exp.run, workers=workers)
        hit = first_hit(agg.mean_f_sub, eps)
        emp = float("nan") if hit is None else float(agg.k[hit] * b)
        theo = total_complexity(setting, _bound_params(exp), b, eps)
        rows.append((b, emp, theo, predicted, hit is None))
    return rows


def cmd_sweep(args, cfg):
    rows = sweep_rows(cfg, seeds=args.seeds, workers=_workers(cfg))
    out = _out_dir(args, cfg)
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
        fh.write("b,empirical_tc,theoretical_tc,predicted_b,censored\n")
        for b, emp, theo, pb, cens in rows:
            fh.write(f"{b},{_fmt(emp)},{_fmt(theo)},{pb},{int(cens)}\n")
    _say(args, f"wrote sweep over b={[r[0] for r in rows]} to {out}")
    return EXIT_OK


def cmd_constants(args, cfg):
    exp = build_experiment(cfg)
    for key, value in exp.report.items():
        tag = exp.report.tags.get(key)
        print(f"{key}={_fmt(value)}" + (f"  # {tag}" if tag and not args.quiet else ""))
    lines = ["b,rho,sigma2,calL,calLmax"]
    for row in minibatch_table(exp.problem):
        lines.append(",".join([str(row[0])] + [_fmt(v) for v in row[1:]]))
    out = args.out or cfg.get("out")
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "constants.csv"), "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        print()
        print("\n".join(lines))
    return EXIT_OK


def verify_checks(p, seed=0, count=20):
    """Named pass/fail checks of a problem's oracles and certificate."""
    rng = np.random.default_rng(seed)
    R = 1.0 + np.linalg.norm(p.x_star)
    pts = p.x_star + R * rng.standard_normal((count, p.d))
    checks = {}
    checks["finite_diff"] = max(P.finite_diff_check(p, x) for x in pts) <= 1e-5
    checks["mean_of_components"] = all(
        abs(p.value(x) - np.mean(p.component_values(x))) <= 1e-12 * (1 + abs(p.value(x)))
        and np.allclose(p.grad(x), p.component_grads(x).mean(axis=0), rtol=1e-12, atol=1e-12)
        for x in pts)
    g0 = np.linalg.norm(p.grad(pts[0]))
    checks["stationary_x_star"] = np.linalg.norm(p.grad(p.x_star)) <= 1e-8 * (1 + g0)
    if p.cert.interpolated:
        checks["interpolation"] = P.certify_interpolation(p).passed
    cert_pts = P.default_points(p, count=2000, seed=seed)
    checks["smoothness_along_x_star"] = P.smoothness_gap(p, cert_pts) <= 1e-9
    if p.cert.zeta is not None:
        checks["quasar_convexity"] = P.certify_quasar(p, cert_pts).ok
    if p.cert.mu is not None:
        res = P.certify_pl(p, cert_pts)
        checks["pl_positive"] = res.ok and res.value <= p.cert.L * (1 + 1e-9)
    return checks


def cmd_verify(args, cfg):
    exp = build_experiment(cfg)
    checks = verify_checks(exp.problem)
    for name, ok in checks.items():
        print(f"{name}={'PASS' if ok else 'FAIL'}")
    return EXIT_OK if all(checks.values()) else EXIT_VERIFY


def cmd_bound(args, cfg):
    theorem = cfg.get("theorem")
    if not theorem:
        raise ConfigError("bound needs theorem=<id>; choose from " + ", ".join(CURVES))
    exp = build_experiment(cfg)
    curve = bound_curve(theorem, _bound_params(exp), exp.run.iterations, exp.run.log_every)
    out = args.out or cfg.get("out")
    if out:
        os.makedirs(out, exist_ok=True)
        _write_bound(os.path.join(out, "bound.csv"), curve)
    else:
        print("k,bound,valid")
        for k, v, ok in curve.rows():
            print(f"{k},{_fmt(v)},{int(ok)}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "constants": cmd_constants,
    "verify": cmd_verify,
    "bound": cmd_bound,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="structsgd", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="key=value config file")
    parser.add_argument("--out", help="output directory (overrides out=)")
    parser.add_argument("--seeds", type=int, help="number of seeds (overrides seeds=)")
    parser.add_argument("--quiet", action="store_true", help="suppress progress messages")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seeds is not None and args.seeds < 1:
            raise ConfigError("--seeds must be >= 1")
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, BoundPreconditionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
