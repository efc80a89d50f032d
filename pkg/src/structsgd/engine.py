"""Seeded SGD runs, per-iteration metrics and aggregation over seeds.

Row ``k`` of a trajectory holds the metrics of ``x^k`` and the step
``gamma_k`` used to move from ``x^k`` to ``x^{k+1}``. Metrics use the exact
full objective, not the sampled loss.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .sampling import RngStream, SamplingScheme, draw, stoch_grad, stoch_loss
from .stepsize import StepSchedule, gamma_at

__all__ = [
    "RunConfig",
    "Trajectory",
    "AggregateRun",
    "DivergenceError",
    "DIVERGENCE_LIMIT",
    "INIT_STREAM",
    "initial_point",
    "run_sgd",
    "run_many",
    "aggregate",
    "write_trajectory_csv",
    "write_aggregate_csv",
    "first_hit",
]

DIVERGENCE_LIMIT = 1e100

# stream index reserved for random initial points, disjoint from seed indices
INIT_STREAM = -1

TRAJ_HEADER = "k,f_sub,dist_sq,gamma,min_f_sub"
AGG_HEADER = "k,mean_f_sub,std_f_sub,mean_dist_sq,std_dist_sq,mean_min_f_sub"


class DivergenceError(RuntimeError):
    """A run produced a non-finite or huge metric."""

    def __init__(self, iteration, seed_index, what="iterate"):
        self.iteration = iteration
        self.seed_index = seed_index
        super().__init__(f"{what} diverged at iteration {iteration} (seed {seed_index})")


@dataclass
class RunConfig:
    """Everything needed to reproduce a set of SGD runs.

    ``x0`` is a vector or one of ``"zero"``, ``"ones"``, ``"gauss:r"``.
    The Gaussian start lies at distance ``r`` from ``x_star`` in a random
    direction drawn once from ``master_seed``, so all seeds share it.
    """

    problem: object
    scheme: SamplingScheme
    schedule: StepSchedule
    iterations: int
    x0: Union[str, np.ndarray] = "zero"
    master_seed: int = 0
    seeds: int = 1
    log_every: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        if self.scheme.n != self.problem.n:
            raise ValueError("sampling scheme and problem disagree on n")

    @property
    def logged(self) -> np.ndarray:
        """Logged iteration indices."""
        return np.arange(0, self.iterations, self.log_every)


def initial_point(spec, p, master_seed=0) -> np.ndarray:
    """Resolve a named initialisation to a vector of length ``p.d``."""
    if not isinstance(spec, str):
        x0 = np.asarray(spec, dtype=float).reshape(-1)
        if x0.size != p.d:
            raise ValueError(f"x0 has {x0.size} entries, expected {p.d}")
        return x0.copy()
    if spec == "zero":
        return np.zeros(p.d)
    if spec == "ones":
        return np.ones(p.d)
    if spec.startswith("gauss:"):
        r = float(spec.split(":", 1)[1])
        if p.x_star is None:
            raise ValueError("gauss:r needs a known x_star")
        u = RngStream(master_seed, INIT_STREAM).generator.standard_normal(p.d)
        return p.x_star + r * u / np.linalg.norm(u)
    raise ValueError(f"unknown init {spec!r}")


@dataclass
class Trajectory:
    """Logged metrics of one seeded run and its final iterate."""

    k: np.ndarray
    f_sub: np.ndarray
    dist_sq: np.ndarray
    gamma: np.ndarray
    min_f_sub: np.ndarray
    x_final: np.ndarray
    f_sub_final: float
    seed_index: int = 0

    def __len__(self):
        return self.k.size


@dataclass
class AggregateRun:
    """Pointwise mean and spread over seeds, reduced in seed order."""

    k: np.ndarray
    mean_f_sub: np.ndarray
    std_f_sub: np.ndarray
    mean_dist_sq: np.ndarray
    std_dist_sq: np.ndarray
    mean_min_f_sub: np.ndarray
    seeds: int
    trajectories: list = field(default_factory=list, repr=False)

    def stderr(self, name="f_sub") -> np.ndarray:
        return getattr(self, f"std_{name}") / np.sqrt(self.seeds)


def _check(value, k, seed_index, what):
    if not np.isfinite(value) or abs(value) > DIVERGENCE_LIMIT:
        raise DivergenceError(k, seed_index, what)


def run_sgd(cfg: RunConfig, seed_index: int = 0) -> Trajectory:
    """Run ``x^{k+1} = x^k - gamma_k g(x^k)`` for ``cfg.iterations`` steps."""
    p, scheme, sched = cfg.problem, cfg.scheme, cfg.schedule
    rng = RngStream(cfg.master_seed, seed_index)
    x = initial_point(cfg.x0, p, cfg.master_seed)
    has_star = p.x_star is not None
    f_star = p.f_star if p.f_star is not None else 0.0
    K, every = cfg.iterations, cfg.log_every
    m = len(range(0, K, every))
    out = np.empty((4, m))
    best = np.inf
    row = 0
    for k in range(K):
        f_sub = p.value(x) - f_star
        _check(f_sub, k, seed_index, "f_sub")
        dist = float(np.sum((x - p.x_star) ** 2)) if has_star else np.nan
        if has_star:
            _check(dist, k, seed_index, "dist_sq")
        best = min(best, f_sub)
        d = draw(scheme, rng)
        g = stoch_grad(p, x, d)
        if sched.variant == "sps":
            f_v, f_v_star = stoch_loss(p, x, d)
            gamma = gamma_at(sched, k, (f_v, f_v_star, float(g @ g)))
        else:
            gamma = gamma_at(sched, k)
        if k % every == 0:
            out[:, row] = (f_sub, dist, gamma, best)
            row += 1
        x = x - gamma * g
    f_final = p.value(x) - f_star
    _check(f_final, K, seed_index, "f_sub")
    return Trajectory(
        k=np.arange(0, K, every), f_sub=out[0], dist_sq=out[1], gamma=out[2],
        min_f_sub=out[3], x_final=x, f_sub_final=float(f_final), seed_index=seed_index,
    )


def aggregate(trajs, keep=False) -> AggregateRun:
    """Mean and sample standard deviation (``ddof=1``; 0 for one seed) per row."""
    trajs = sorted(trajs, key=lambda t: t.seed_index)
    s = len(trajs)
    ddof = 1 if s > 1 else 0

    def stats(name):
        M = np.stack([getattr(t, name) for t in trajs])
        mean, std = M.mean(axis=0), M.std(axis=0, ddof=ddof)
        # rows where every seed agrees are exact, without rounding noise
        same = np.all(M == M[0], axis=0)
        mean[same], std[same] = M[0, same], 0.0
        return mean, std

    mf, sf = stats("f_sub")
    md, sd = stats("dist_sq")
    mm, _ = stats("min_f_sub")
    return AggregateRun(trajs[0].k.copy(), mf, sf, md, sd, mm, s, trajs if keep else [])


def _run_one(args):
    cfg, s = args
    return run_sgd(cfg, s)


def run_many(cfg: RunConfig, workers: Optional[int] = None, keep=False) -> AggregateRun:
    """Run seeds ``0..cfg.seeds-1`` and aggregate them.

    With ``workers > 1`` seeds run in a process pool; results are merged
    in seed order, so the output does not depend on the worker count. The
    first divergence, by seed index, is re-raised.
    """
    seeds = range(cfg.seeds)
    if workers is None or workers <= 1 or cfg.seeds == 1:
        trajs = [run_sgd(cfg, s) for s in seeds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, (cfg, s)) for s in seeds]
            trajs = [f.result() for f in futures]
    return aggregate(trajs, keep=keep)


def first_hit(values, eps) -> Optional[int]:
    """Index of the first entry ``<= eps``, or ``None``."""
    hits = np.flatnonzero(np.asarray(values) <= eps)
    return int(hits[0]) if hits.size else None


def _fmt(v) -> str:
    return "%.17g" % v


def write_trajectory_csv(path, t: Trajectory):
    with open(path, "w", newline="") as fh:
        fh.write(TRAJ_HEADER + "\n")
        for row in zip(t.k, t.f_sub, t.dist_sq, t.gamma, t.min_f_sub):
            fh.write(str(int(row[0])) + "," + ",".join(_fmt(v) for v in row[1:]) + "\n")


def write_aggregate_csv(path, a: AggregateRun):
    cols = (a.mean_f_sub, a.std_f_sub, a.mean_dist_sq, a.std_dist_sq, a.mean_min_f_sub)
    with open(path, "w", newline="") as fh:
        fh.write(AGG_HEADER + "\n")
        for i, k in enumerate(a.k):
            fh.write(str(int(k)) + "," + ",".join(_fmt(c[i]) for c in cols) + "\n")
