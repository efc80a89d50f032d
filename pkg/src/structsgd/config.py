"""Flat ``key=value`` experiment configs and the objects they describe.

One key per line, ``#`` starts a comment, unknown keys are rejected.
Problem parameters live under ``problem.*``; matrices are written row by
row with ``;`` between rows and ``,`` between entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import problems as P
from .constants import constants_report
from .engine import RunConfig
from .sampling import SamplingScheme
from .stepsize import parse_schedule

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "KEYS",
    "PROBLEM_KEYS",
    "parse_config",
    "load_config",
    "build_problem",
    "Experiment",
    "build_experiment",
]

KEYS = {
    "problem", "sampling", "schedule", "iterations", "seeds", "master_seed", "init",
    "out", "theorem", "target_eps", "workers", "sweep_values", "tc_setting", "log_every",
}
PROBLEM_KEYS = {
    "n", "d", "seed", "interpolated", "noise", "A", "y", "x_star", "a", "b", "base",
}
DEFAULTS = {
    "sampling": "full",
    "iterations": "100",
    "seeds": "1",
    "master_seed": "0",
    "init": "zero",
    "log_every": "1",
    "workers": "1",
    "tc_setting": "pl_interp",
}
# order used when writing a config back out
ORDER = ("problem", "sampling", "schedule", "iterations", "seeds", "master_seed", "init",
         "log_every", "theorem", "target_eps", "tc_setting", "sweep_values", "workers", "out")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    """Parsed key=value pairs; ``problem_params`` holds the ``problem.*`` keys."""

    values: dict
    problem_params: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.values.get(key, DEFAULTS.get(key, default))

    def _typed(self, key, cast):
        raw = self.get(key)
        if raw is None:
            return None
        try:
            return cast(raw)
        except ValueError:
            raise ConfigError(f"{key}={raw!r} is not a valid {cast.__name__}") from None

    def int(self, key):
        return self._typed(key, int)

    def float(self, key):
        return self._typed(key, float)

    def dumps(self) -> str:
        """Render as config text with a stable key order."""
        lines = [f"{k}={self.values[k]}" for k in ORDER if k in self.values]
        lines += [f"problem.{k}={v}" for k, v in sorted(self.problem_params.items())]
        return "\n".join(lines) + "\n"


def parse_config(text: str) -> ExperimentConfig:
    values, params = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        if key.startswith("problem."):
            sub = key[len("problem."):]
            if sub not in PROBLEM_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            target, name = params, sub
        elif key in KEYS:
            target, name = values, key
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if name in target:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        target[name] = value
    if "problem" not in values:
        raise ConfigError("missing required key 'problem'")
    if "schedule" not in values:
        raise ConfigError("missing required key 'schedule'")
    return ExperimentConfig(values, params)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _vector(text):
    return np.array([float(t) for t in text.split(",")], dtype=float)


def _matrix(text):
    rows = [r for r in text.split(";") if r.strip()]
    M = np.array([[float(t) for t in r.split(",")] for r in rows], dtype=float)
    if M.ndim != 2:
        raise ConfigError("matrix rows have different lengths")
    return M


def _flag(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes"):
        return True
    if t in ("0", "false", "no"):
        return False
    raise ConfigError(f"bad boolean {text!r}")


def build_problem(name, params):
    """Construct a named problem from ``problem.*`` parameters.

    Names: ``least_squares``, ``sin_squared``, ``nonlinear_lsq``,
    ``composition``. When ``A`` is not given it is a standard normal
    ``n x d`` matrix drawn from ``seed``.
    """
    try:
        return _build_problem(name, dict(params))
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"problem {name!r}: {exc}") from None


def _design(pp):
    seed = int(pp.get("seed", 0))
    if "A" in pp:
        return _matrix(pp["A"]), np.random.default_rng(seed)
    if "n" not in pp or "d" not in pp:
        raise ConfigError("give problem.A or both problem.n and problem.d")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((int(pp["n"]), int(pp["d"]))), rng


def _build_problem(name, pp):
    allowed = {
        "least_squares": {"n", "d", "seed", "interpolated", "noise", "A", "y", "x_star"},
        "sin_squared": {"a", "b"},
        "nonlinear_lsq": {"n", "d", "seed", "A", "x_star"},
        "composition": {"n", "d", "seed", "A", "x_star", "base"},
    }
    if name not in allowed:
        raise ConfigError(f"unknown problem {name!r}; choose from {', '.join(sorted(allowed))}")
    extra = set(pp) - allowed[name]
    if extra:
        raise ConfigError(f"problem {name!r} does not take {', '.join(sorted(extra))}")
    if name == "sin_squared":
        if "a" not in pp or "b" not in pp:
            raise ConfigError("sin_squared needs problem.a and problem.b")
        return P.make_sin_squared(_vector(pp["a"]), _vector(pp["b"]))
    A, rng = _design(pp)
    d = A.shape[1]
    x_star = _vector(pp["x_star"]) if "x_star" in pp else None
    if name == "least_squares":
        interpolated = _flag(pp.get("interpolated", "true"))
        if interpolated:
            if "y" in pp:
                raise ConfigError("an interpolated problem derives y from x_star")
            if x_star is None:
                x_star = rng.standard_normal(d)
            return P.make_least_squares(A, interpolated=True, x_star=x_star)
        if "y" in pp:
            y = _vector(pp["y"])
        else:
            noise = float(pp.get("noise", 1.0))
            y = A @ rng.standard_normal(d) + noise * rng.standard_normal(A.shape[0])
        return P.make_least_squares(A, y)
    if x_star is None:
        x_star = rng.standard_normal(d)
    if name == "nonlinear_lsq":
        return P.make_nonlinear_lsq(A, x_star)
    return P.make_composition(pp.get("base", "square"), A, x_star=x_star)


@dataclass
class Experiment:
    """A parsed config resolved to concrete objects."""

    config: ExperimentConfig
    problem: object
    scheme: SamplingScheme
    report: object
    run: RunConfig
    target_eps: float = None

    def resolved(self) -> ExperimentConfig:
        """Copy of the config with the numeric schedule spelled out."""
        values = dict(self.config.values)
        values["schedule"] = self.run.schedule.spec()
        for key in ("sampling", "iterations", "master_seed", "init", "log_every"):
            values[key] = self.config.get(key)
        values["sampling"] = self.scheme.spec if self.scheme.kind != "single" else values["sampling"]
        values["seeds"] = str(self.run.seeds)
        return ExperimentConfig(values, dict(self.config.problem_params))


def build_experiment(cfg: ExperimentConfig, sampling=None, seeds=None) -> Experiment:
    """Resolve problem, sampling, constants and schedule from a config.

    ``sampling`` and ``seeds`` override the config values when given.
    """
    p = build_problem(cfg.get("problem"), cfg.problem_params)
    sampling = sampling or cfg.get("sampling")
    try:
        scheme = SamplingScheme.parse(sampling, p.n, p.cert.L_i)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report = constants_report(p, scheme)
    K = cfg.int("iterations")
    eps = cfg.float("target_eps")
    try:
        schedule = parse_schedule(cfg.get("schedule"), report, p.cert, iterations=K,
                                  target_eps=eps)
        run = RunConfig(
            problem=p, scheme=scheme, schedule=schedule, iterations=K,
            x0=cfg.get("init"), master_seed=cfg.int("master_seed"),
            seeds=seeds if seeds is not None else cfg.int("seeds"),
            log_every=cfg.int("log_every"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return Experiment(cfg, p, scheme, report, run, eps)


def default_sweep(n):
    """Batch sizes ``1, ceil(n/4), ceil(n/2), n`` without repeats."""
    return sorted({1, math.ceil(n / 4), math.ceil(n / 2), n})
