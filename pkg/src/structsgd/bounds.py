"""Right-hand sides of the convergence guarantees, complexities and batch-size rules.

Scalar bound functions return ``math.inf`` at an iteration count where
the guarantee does not apply (for example a non-positive denominator),
and raise :class:`BoundPreconditionError` when the parameters themselves
violate the guarantee's assumptions. :func:`bound_curve` turns a bound
into per-row values and a validity mask aligned with trajectory rows.

Row ``k`` of a trajectory holds ``x^k``. Bounds on ``min_{t<k}`` are
therefore evaluated at count ``k + 1`` for row ``k``; bounds on ``x^k``
itself are evaluated at ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .constants import calL_minibatch, rho_minibatch, sigma2_minibatch

__all__ = [
    "BoundParams",
    "BoundCurve",
    "BoundPreconditionError",
    "CURVES",
    "bound_quasar",
    "bound_pl",
    "bound_sps",
    "bound_quasar_strong",
    "bound_noninterp_minibatch",
    "total_complexity",
    "optimal_b",
    "iteration_complexity",
    "bound_curve",
    "tighter_quasar_curve",
    "params_from",
]

INF = math.inf


class BoundPreconditionError(ValueError):
    """Parameters violate the assumptions of a convergence guarantee."""


@dataclass
class BoundParams:
    """Constants entering the bounds. Unused fields may stay ``None``."""

    r0: Optional[float] = None
    f0_sub: Optional[float] = None
    rho: float = 0.0
    calL: Optional[float] = None
    calLmax: Optional[float] = None
    L: Optional[float] = None
    L_max: Optional[float] = None
    L_bar: Optional[float] = None
    mu: Optional[float] = None
    zeta: Optional[float] = None
    lam: Optional[float] = None
    sigma2: float = 0.0
    sigma1_sq: float = 0.0
    gamma: Optional[float] = None
    c: Optional[float] = None
    n: Optional[int] = None
    b: Optional[int] = None
    T: Optional[int] = None
    k_star: Optional[float] = None
    E_Lv: Optional[float] = None
    gammas: Optional[Sequence[float]] = field(default=None, repr=False)

    def need(self, *names):
        vals = []
        for name in names:
            v = getattr(self, name)
            if v is None:
                raise BoundPreconditionError(f"bound needs parameter {name!r}")
            vals.append(v)
        return vals if len(vals) > 1 else vals[0]


def _aggregate(params, condition):
    """``2 rho + L`` under ER, ``2 calL`` under ES."""
    if condition == "ER":
        return 2.0 * params.rho + params.need("L")
    if condition == "ES":
        return 2.0 * params.need("calL")
    raise ValueError(f"condition must be ER or ES, got {condition!r}")


def _log(x):
    return math.log(x)


def bound_quasar(kind, condition, params: BoundParams, k) -> float:
    """Bound on ``min_{t<k} E[f(x^t) - f*]`` for quasar-convex ``f``.

    ``kind`` is ``general`` (uses ``params.gammas``), ``constant``,
    ``horizon`` or ``decreasing``. Under ``condition='ES'`` the aggregate
    constant ``2 rho + L`` becomes ``2 calL``.
    """
    zeta, r0 = params.need("zeta", "r0")
    A = _aggregate(params, condition)
    s2 = params.sigma2
    k = int(k)
    if kind == "general":
        g = np.asarray(params.need("gammas"), dtype=float)
        if k < 1 or k > g.size:
            return INF
        g = g[:k]
        if np.any(g <= 0) or np.any(g > zeta / A):
            return INF
        denom = float(np.sum(g * (zeta - g * A)))
        if denom <= 0:
            return INF
        return (r0 / 2.0 + s2 * float(np.sum(g ** 2))) / denom
    if kind == "constant":
        gamma = params.gamma if params.gamma is not None else zeta / (2.0 * A)
        if not 0 < gamma < zeta / A:
            raise BoundPreconditionError(f"constant step needs 0 < gamma < zeta/A = {zeta / A!r}")
        if k < 1:
            return INF
        slack = zeta - gamma * A
        return r0 / (2.0 * gamma * slack * k) + gamma * s2 / slack
    if kind == "horizon":
        gamma, T = params.need("gamma", "T")
        if not 0 < gamma <= zeta / (2.0 * A) * (1 + 1e-12):
            raise BoundPreconditionError("horizon step needs 0 < gamma <= zeta/(2A)")
        if k != T:
            return INF
        return (r0 + 2.0 * gamma ** 2 * s2) / (gamma * math.sqrt(T))
    if kind == "decreasing":
        gamma = params.need("gamma")
        if not 0 < gamma <= zeta / A * (1 + 1e-12):
            raise BoundPreconditionError("decreasing step needs 0 < gamma <= zeta/A")
        if k < 1:
            return INF
        lk = _log(k) + 1.0
        denom = zeta * (math.sqrt(k) - 1.0) - gamma * (A / 2.0) * lk
        if denom <= 0:
            return INF
        return (r0 + 2.0 * gamma ** 2 * s2 * lk) / (4.0 * gamma * denom)
    raise ValueError(f"unknown quasar bound kind {kind!r}")


def _geometric(q, k):
    """``(1 - q)^k`` for ``0 < q <= 1`` without underflow trouble."""
    if k == 0:
        return 1.0
    if q >= 1.0:
        return 0.0
    return math.exp(k * math.log1p(-q))


def bound_pl(kind, params: BoundParams, k) -> float:
    """Bound on ``E[f(x^k) - f*]`` under the PL condition.

    ``constant`` and ``ES_constant`` are the linear rate plus neighbourhood
    ``(1 - gamma mu)^k f0 + L gamma sigma^2 / mu``; they differ only in the
    admissible step. ``switching`` applies for ``k >= ceil(k*)``.
    """
    L, mu, f0 = params.need("L", "mu", "f0_sub")
    s2 = params.sigma2
    k = int(k)
    if k < 0:
        return INF
    if kind in ("constant", "ES_constant"):
        gamma = params.need("gamma")
        if kind == "constant":
            cap = 1.0 / (L * (1.0 + 2.0 * params.rho / mu))
        else:
            cap = mu / (2.0 * L * params.need("calL"))
        if not 0 < gamma <= cap * (1 + 1e-12):
            raise BoundPreconditionError(f"{kind} needs 0 < gamma <= {cap!r}")
        if gamma * mu > 1.0:
            raise BoundPreconditionError("need gamma * mu <= 1")
        return _geometric(gamma * mu, k) * f0 + L * gamma * s2 / mu
    if kind == "switching":
        k_star = params.k_star
        if k_star is None:
            k_star = 2.0 * (L / mu) * (1.0 + 2.0 * params.rho / mu)
        if k < math.ceil(k_star) or k == 0:
            return INF
        return 4.0 * L * s2 / (mu ** 2 * k) + k_star ** 2 / (k ** 2 * math.e ** 2) * f0
    raise ValueError(f"unknown PL bound kind {kind!r}")


def bound_sps(kind, params: BoundParams, K) -> float:
    """Bounds for SGD with the stochastic Polyak step.

    ``quasar``: ``2c^2/(2c zeta - 1) calLmax r0 / K`` on ``min_{t<K}`` of the
    suboptimality, needs ``c > 1/(2 zeta)``. ``quasar_strong``:
    ``(1 - lam / (2c E[L_v]))^K r0`` on ``E|x^K - x*|^2``, which at the
    default ``c = 1/(2 zeta)`` is ``(1 - lam zeta / E[L_v])^K r0``;
    ``E[L_v]`` defaults to ``L_bar``.
    """
    zeta, r0 = params.need("zeta", "r0")
    K = int(K)
    if kind == "quasar":
        c, cLmax = params.need("c", "calLmax")
        if 2.0 * c * zeta - 1.0 <= 0:
            raise BoundPreconditionError(f"SPS rate needs c > 1/(2 zeta) = {1 / (2 * zeta)!r}")
        if K < 1:
            return INF
        return 2.0 * c ** 2 / (2.0 * c * zeta - 1.0) * cLmax / K * r0
    if kind == "quasar_strong":
        lam = params.need("lam")
        c = params.c if params.c is not None else 1.0 / (2.0 * zeta)
        if c < 1.0 / (2.0 * zeta) * (1 - 1e-12):
            raise BoundPreconditionError("SPS quasar-strong rate needs c >= 1/(2 zeta)")
        E_Lv = params.E_Lv if params.E_Lv is not None else params.need("L_bar")
        q = lam / (2.0 * c * E_Lv)
        if not 0 < q <= 1.0 + 1e-12:
            raise BoundPreconditionError("need 0 < lam / (2c E[L_v]) <= 1")
        if K < 0:
            return INF
        return _geometric(min(q, 1.0), K) * r0
    raise ValueError(f"unknown SPS bound kind {kind!r}")


def bound_quasar_strong(params: BoundParams, k, condition="ER") -> float:
    """``(1 - gamma zeta lam)^k r0 + 2 gamma sigma^2 / (zeta lam)`` on ``E|x^k - x*|^2``.

    The step must lie in ``(0, zeta / A]`` with ``A = 2 rho + L`` under ER
    or ``2 calL`` under ES, and ``0 < gamma zeta lam <= 1``.
    """
    zeta, lam, r0, gamma = params.need("zeta", "lam", "r0", "gamma")
    A = _aggregate(params, condition)
    if not 0 < gamma <= zeta / A * (1 + 1e-12):
        raise BoundPreconditionError(f"need 0 < gamma <= zeta/A = {zeta / A!r}")
    q = gamma * zeta * lam
    if not 0 < q <= 1.0:
        raise BoundPreconditionError("need 0 < gamma zeta lam <= 1")
    k = int(k)
    if k < 0:
        return INF
    return _geometric(q, k) * r0 + 2.0 * gamma * params.sigma2 / (zeta * lam)


def _minibatch_params(params):
    n, b, L_max = params.need("n", "b", "L_max")
    if not 1 <= b <= n:
        raise BoundPreconditionError(f"need 1 <= b <= n, got b={b}, n={n}")
    return n, b, L_max


def bound_noninterp_minibatch(kind, params: BoundParams, k) -> float:
    """Minibatch bounds without interpolation, using ``sigma_1^2``.

    ``quasar_strong_b`` is the constant-step quasar bound with ``rho(b)``
    and ``sigma^2(b)`` substituted (a bound on ``min_{t<k}``);
    ``pl_b`` is the PL bound at the step
    ``mu (n-1) b / ((mu (n-1) b + 2 L_max (n-b)) L)``.
    """
    n, b, L_max = _minibatch_params(params)
    if kind == "quasar_strong_b":
        zeta, r0, L = params.need("zeta", "r0", "L")
        A = 2.0 * rho_minibatch(L_max, n, b) + L
        k = int(k)
        if k < 1:
            return INF
        return 2.0 * r0 * A / (zeta ** 2 * k) + sigma2_minibatch(params.sigma1_sq, n, b) / A
    if kind == "pl_b":
        L, mu, f0 = params.need("L", "mu", "f0_sub")
        k = int(k)
        if k < 0:
            return INF
        D = mu * (n - 1) * b + 2.0 * L_max * (n - b)
        q = mu ** 2 * (n - 1) * b / (D * L) if n > 1 else mu / L
        noise = (n - b) * params.sigma1_sq / D if n > 1 else 0.0
        return _geometric(q, k) * f0 + noise
    raise ValueError(f"unknown minibatch bound kind {kind!r}")


def total_complexity(setting, params: BoundParams, b, eps) -> float:
    """Iterations-to-``eps`` times ``b`` for the interpolated minibatch rates.

    ``quasar_interp``: ``(2(n-b) L_max + (n-1) b L) / (zeta^2 (n-1)) * 2 r0 / eps``.
    ``pl_interp``: ``(L/mu) (b + 2 (L_max/mu) (n-b)/(n-1)) log(f0/eps)``.
    """
    n, L, L_max = params.need("n", "L", "L_max")
    if not 1 <= b <= n:
        raise BoundPreconditionError(f"need 1 <= b <= n, got b={b}")
    if eps <= 0:
        raise BoundPreconditionError("eps must be positive")
    frac = (n - b) / (n - 1) if n > 1 else 0.0
    if setting == "quasar_interp":
        zeta, r0 = params.need("zeta", "r0")
        return (2.0 * L_max * frac + b * L) / zeta ** 2 * 2.0 * r0 / eps
    if setting == "pl_interp":
        mu, f0 = params.need("mu", "f0_sub")
        return (L / mu) * (b + 2.0 * (L_max / mu) * frac) * _log(f0 / eps)
    raise ValueError(f"unknown setting {setting!r}")


def optimal_b(setting, n, L, L_max, mu_or_zeta=None) -> int:
    """Minimiser over ``b`` of :func:`total_complexity`, which is 1 or ``n``.

    ``pl_interp``: ``b* = 1`` iff ``n - 1 >= 2 L_max / mu``.
    ``quasar_interp``: ``b* = 1`` iff ``n - 1 >= 2 L_max / L``; ``zeta``
    only scales the complexity and does not enter the rule.
    """
    if n < 2:
        return 1
    if setting == "pl_interp":
        if mu_or_zeta is None:
            raise BoundPreconditionError("pl_interp needs mu")
        return 1 if n - 1 >= 2.0 * L_max / mu_or_zeta else n
    if setting == "quasar_interp":
        return 1 if n - 1 >= 2.0 * L_max / L else n
    raise ValueError(f"unknown setting {setting!r}")


def iteration_complexity(setting, params: BoundParams, eps) -> int:
    """Iteration count after which the guarantee drops below ``eps``; never negative."""
    if eps <= 0:
        raise BoundPreconditionError("eps must be positive")
    if setting == "pl":
        L, mu, f0 = params.need("L", "mu", "f0_sub")
        k = (L / mu) * max(2.0 * params.sigma2 / (mu * eps), 1.0 + 2.0 * params.rho / mu) \
            * _log(2.0 * f0 / eps)
    elif setting == "pl_interp":
        L, mu, f0 = params.need("L", "mu", "f0_sub")
        k = (L / mu) * (1.0 + 2.0 * params.rho / mu) * _log(f0 / eps)
    elif setting == "sps_quasar":
        zeta, r0, cLmax = params.need("zeta", "r0", "calLmax")
        k = cLmax * r0 / (4.0 * zeta ** 2 * eps)
    elif setting == "sps_quasar_strong_b":
        zeta, lam, r0, n, b, L, L_max = params.need("zeta", "lam", "r0", "n", "b", "L", "L_max")
        E_Lv = calL_minibatch(L, L_max, n, b)
        k = E_Lv / (zeta * lam) * _log(r0 / eps)
    else:
        raise ValueError(f"unknown setting {setting!r}")
    return max(0, math.ceil(k))


@dataclass
class BoundCurve:
    """A bound evaluated on trajectory rows ``k``."""

    theorem: str
    params: BoundParams
    k: np.ndarray
    values: np.ndarray
    valid: np.ndarray

    def rows(self):
        for k, v, ok in zip(self.k, self.values, self.valid):
            yield int(k), float(v), bool(ok)


# theorem id -> (evaluator(params, count), row offset, metric bounded)
CURVES = {
    "quasar_general": (lambda p, k: bound_quasar("general", "ER", p, k), 1, "min_f_sub"),
    "quasar_constant": (lambda p, k: bound_quasar("constant", "ER", p, k), 1, "min_f_sub"),
    "quasar_horizon": (lambda p, k: bound_quasar("horizon", "ER", p, k), 1, "min_f_sub"),
    "quasar_decreasing": (lambda p, k: bound_quasar("decreasing", "ER", p, k), 1, "min_f_sub"),
    "quasar_constant_es": (lambda p, k: bound_quasar("constant", "ES", p, k), 1, "min_f_sub"),
    "quasar_horizon_es": (lambda p, k: bound_quasar("horizon", "ES", p, k), 1, "min_f_sub"),
    "quasar_decreasing_es": (lambda p, k: bound_quasar("decreasing", "ES", p, k), 1, "min_f_sub"),
    "pl_constant": (lambda p, k: bound_pl("constant", p, k), 0, "f_sub"),
    "pl_es_constant": (lambda p, k: bound_pl("ES_constant", p, k), 0, "f_sub"),
    "pl_switching": (lambda p, k: bound_pl("switching", p, k), 0, "f_sub"),
    "sps_quasar": (lambda p, k: bound_sps("quasar", p, k), 1, "min_f_sub"),
    "sps_quasar_strong": (lambda p, k: bound_sps("quasar_strong", p, k), 0, "dist_sq"),
    "quasar_strong": (lambda p, k: bound_quasar_strong(p, k), 0, "dist_sq"),
    "quasar_strong_es": (lambda p, k: bound_quasar_strong(p, k, "ES"), 0, "dist_sq"),
    "quasar_strong_b": (lambda p, k: bound_noninterp_minibatch("quasar_strong_b", p, k), 1,
                        "min_f_sub"),
    "pl_b": (lambda p, k: bound_noninterp_minibatch("pl_b", p, k), 0, "f_sub"),
}


def bound_curve(theorem_id, params: BoundParams, K, log_every=1) -> BoundCurve:
    """Evaluate a bound on the rows ``0, log_every, ...`` below ``K``.

    Invalid rows carry ``inf`` with ``valid = False``.
    """
    if theorem_id not in CURVES:
        raise ValueError(f"unknown theorem id {theorem_id!r}; choose from {', '.join(CURVES)}")
    fn, offset, _ = CURVES[theorem_id]
    ks = np.arange(0, int(K), int(log_every))
    vals = np.array([fn(params, int(k) + offset) for k in ks], dtype=float)
    return BoundCurve(theorem_id, params, ks, vals, np.isfinite(vals))


def tighter_quasar_curve(kind, params: BoundParams, K, log_every=1) -> BoundCurve:
    """Pointwise minimum of the ER and ES versions of a quasar-convex bound.

    Both are valid envelopes of the same run; a version whose step
    precondition fails is left out.
    """
    curves = []
    for suffix in ("", "_es"):
        try:
            curves.append(bound_curve(f"quasar_{kind}{suffix}", params, K, log_every))
        except BoundPreconditionError:
            pass
    if not curves:
        raise BoundPreconditionError("neither the ER nor the ES bound applies")
    vals = np.min(np.stack([c.values for c in curves]), axis=0)
    return BoundCurve(f"quasar_{kind}_tighter", params, curves[0].k, vals, np.isfinite(vals))


def params_from(report, cert, x0=None, p=None, **overrides) -> BoundParams:
    """Collect bound parameters from a constants report and certificate."""
    bp = BoundParams(
        rho=report.rho, calL=report.calL, calLmax=report.calLmax, L=report.L,
        L_max=report.L_max, L_bar=report.L_bar, mu=cert.mu, zeta=cert.zeta,
        lam=cert.lam, sigma2=report.sigma2, sigma1_sq=report.sigma1_sq,
        n=report.n, b=report.b,
    )
    if x0 is not None and p is not None:
        bp.r0 = float(np.sum((np.asarray(x0) - p.x_star) ** 2))
        bp.f0_sub = float(p.value(x0) - p.f_star)
    return replace(bp, **overrides)
