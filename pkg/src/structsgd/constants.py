"""Closed-form and enumerated constants of the gradient-noise conditions.

Closed forms cover the expected-residual constant ``rho``, gradient noise
``sigma^2``, expected-smoothness constant ``calL`` and the SPS constant
``calLmax``. Brute-force counterparts enumerate the sampling support
exactly and serve as independent checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Optional

import numpy as np

from .sampling import SamplingScheme, enumerate_exact, support_matrix

__all__ = [
    "ConstantsReport",
    "ConditionEstimate",
    "HierarchyReport",
    "rho_minibatch",
    "sigma2_minibatch",
    "sigma_constants",
    "calL_minibatch",
    "calL_independent",
    "cLmax_minibatch",
    "cLmax_enumerated",
    "sampling_covariance",
    "rho_bruteforce",
    "gradient_noise",
    "variance_decomposition",
    "estimate_condition",
    "hierarchy_check",
    "constants_report",
    "minibatch_table",
]

CLOSED_FORM = "closed_form"
BRUTE_FORCE = "brute_force"
ESTIMATED = "estimated"
UPPER_BOUND = "upper_bound"

# f(x) - f* at or below this (times 1 + |f*|) is treated as optimal
DEGENERATE_TOL = 1e-10


def _check_b(n, b):
    if not 1 <= b <= n:
        raise ValueError(f"need 1 <= b <= n, got b={b}, n={n}")


def rho_minibatch(L_max, n, b) -> float:
    """``rho(b) = L_max (n - b) / ((n - 1) b)``; zero when ``n = 1``."""
    _check_b(n, b)
    if n == 1:
        return 0.0
    return L_max * (n - b) / ((n - 1) * b)


def sigma2_minibatch(sigma1_sq, n, b) -> float:
    """``sigma^2(b) = sigma_1^2 (n - b) / (b (n - 1))``; zero when ``n = 1``."""
    _check_b(n, b)
    if n == 1:
        return 0.0
    return sigma1_sq * (n - b) / (b * (n - 1))


def sigma_constants(p, b):
    """``(sigma_1^2, sigma^2(b))`` with ``sigma_1^2 = (1/n) sum |grad f_i(x*)|^2``."""
    if p.x_star is None:
        raise ValueError("sigma constants need x_star")
    G = p.component_grads(p.x_star)
    sigma1_sq = float(np.mean(np.einsum("ij,ij->i", G, G)))
    return sigma1_sq, sigma2_minibatch(sigma1_sq, p.n, b)


def calL_minibatch(L, L_max, n, b) -> float:
    """Expected smoothness of ``b``-minibatching:
    ``n (b-1) / (b (n-1)) L + (n-b) / (b (n-1)) L_max``."""
    _check_b(n, b)
    if n == 1:
        return float(L)
    return n * (b - 1) / (b * (n - 1)) * L + (n - b) / (b * (n - 1)) * L_max


def _c2(scheme: SamplingScheme) -> float:
    if scheme.kind == "single":
        return 0.0
    if scheme.kind == "full":
        return 1.0
    n, b = scheme.n, scheme.b
    if n == 1:
        return 1.0
    return n * (b - 1) / (b * (n - 1))


def calL_independent(scheme: SamplingScheme, L, L_i) -> float:
    """``calL = c2 L + max_i L_i (1 - p_i c2) / (n p_i)`` for an independent sampling.

    ``c2`` is the ratio ``P(i, j in S) / (P(i in S) P(j in S))``: zero for
    single-element sampling, ``n (b-1) / (b (n-1))`` for minibatches.
    """
    L_i = np.asarray(L_i, dtype=float)
    c2 = _c2(scheme)
    p = scheme.inclusion
    return float(c2 * L + np.max(L_i * (1.0 - p * c2) / (scheme.n * p)))


def cLmax_minibatch(L_i, b) -> float:
    """``max_i C(n-1, b-1) / sum_{B containing i} 1/L_B`` with ``L_B = mean_{j in B} L_j``.

    ``L_B`` is the average-of-components upper bound on the smoothness of
    the minibatch loss, so at ``b = n`` the value is the mean of ``L_i``
    rather than the (smaller) smoothness of ``f``.
    """
    L_i = np.asarray(L_i, dtype=float)
    n = L_i.size
    _check_b(n, b)
    if comb(n, b) > 10 ** 6:
        raise ValueError(f"C({n},{b}) subsets is too many to enumerate")
    inv_sum = np.zeros(n)
    for B in combinations(range(n), b):
        B = list(B)
        inv_sum[B] += 1.0 / L_i[B].mean()
    return float(np.max(comb(n - 1, b - 1) / inv_sum))


def cLmax_enumerated(scheme: SamplingScheme, L_i) -> float:
    """``max_i p_i / sum_{B containing i} p_B / L_B`` over the scheme's support.

    Here ``L_B = (1/n) sum_{j in B} v_j L_j`` bounds the smoothness of the
    sampled loss ``f_v``; this covers every enumerable scheme.
    """
    L_i = np.asarray(L_i, dtype=float)
    n = scheme.n
    V, probs = support_matrix(scheme)
    L_B = V @ L_i / n
    acc = np.zeros(n)
    for v, pB, lB in zip(V, probs, L_B):
        acc[v > 0] += pB / lB
    return float(np.max(scheme.inclusion / acc))


def sampling_covariance(scheme: SamplingScheme) -> np.ndarray:
    """``E[(v - 1)(v - 1)^T]`` accumulated in exact rational arithmetic."""
    n = scheme.n
    cov = [[Fraction(0)] * n for _ in range(n)]
    for S, w, prob in enumerate_exact(scheme):
        v = [Fraction(0)] * n
        for i, wi in zip(S, w):
            v[i] = Fraction(wi)
        r = [vi - 1 for vi in v]
        for i in range(n):
            if r[i]:
                for j in range(n):
                    cov[i][j] += prob * r[i] * r[j]
    return np.array([[float(c) for c in row] for row in cov])


def rho_bruteforce(scheme: SamplingScheme, L_max) -> float:
    """``lambda_max(Var(v)) / n * L_max`` from the enumerated covariance."""
    lam = np.linalg.eigvalsh(sampling_covariance(scheme))[-1]
    return float(max(lam, 0.0) / scheme.n * L_max)


def gradient_noise(p, scheme: SamplingScheme) -> float:
    """``E|g(x*)|^2`` by exact enumeration."""
    V, probs = support_matrix(scheme)
    G = V @ p.component_grads(p.x_star) / p.n
    return float(probs @ np.einsum("ij,ij->i", G, G))


@dataclass
class _Moments:
    f_sub: float
    grad_sq: float       # |grad f(x)|^2 with grad f = E[g(x)]
    er: float            # E|g - g* - (grad f - grad f*)|^2
    es: float            # E|g - g*|^2
    wgc: float           # E|g|^2
    es_minus_gap: float  # E|g - g*|^2 - |grad f - grad f*|^2


def _moments(p, V, probs, x, G_star, mean_star):
    G = V @ p.component_grads(x) / p.n
    mean = probs @ G
    D = G - G_star
    mean_diff = mean - mean_star
    R = D - mean_diff
    es = float(probs @ np.einsum("ij,ij->i", D, D))
    gap = float(mean_diff @ mean_diff)
    return _Moments(
        f_sub=p.value(x) - p.f_star,
        grad_sq=float(mean @ mean),
        er=float(probs @ np.einsum("ij,ij->i", R, R)),
        es=es,
        wgc=float(probs @ np.einsum("ij,ij->i", G, G)),
        es_minus_gap=es - gap,
    )


def _prepare(p, scheme):
    if p.x_star is None or p.f_star is None:
        raise ValueError("condition estimates need x_star and f_star")
    V, probs = support_matrix(scheme)
    G_star = V @ p.component_grads(p.x_star) / p.n
    return V, probs, G_star, probs @ G_star


def variance_decomposition(p, scheme: SamplingScheme, x):
    """Both sides of ``E|g - g* - (grad f - grad f*)|^2 = E|g - g*|^2 - |grad f - grad f*|^2``."""
    V, probs, G_star, mean_star = _prepare(p, scheme)
    m = _moments(p, V, probs, np.asarray(x, dtype=float), G_star, mean_star)
    return m.er, m.es_minus_gap


@dataclass
class ConditionEstimate:
    """Largest ratio ``LHS / denominator`` of a growth condition over sample points."""

    condition: str
    value: float
    lhs: np.ndarray
    denom: np.ndarray
    used: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        return self.lhs[self.used] / self.denom[self.used]


_FIELDS = {"ER": "er", "ES": "es", "WGC": "wgc", "SGC": "wgc"}


def _estimate(cond, moments, f_star):
    lhs = np.array([getattr(m, _FIELDS[cond]) for m in moments])
    if cond == "SGC":
        denom = np.array([m.grad_sq for m in moments])
        used = np.flatnonzero(denom > 1e-20)
    else:
        denom = np.array([2.0 * m.f_sub for m in moments])
        used = np.flatnonzero(denom / 2.0 > DEGENERATE_TOL * (1.0 + abs(f_star)))
    if used.size == 0:
        raise ValueError(f"{cond}: every point is degenerate")
    value = float(np.max(lhs[used] / denom[used]))
    return ConditionEstimate(cond, value, lhs, denom, used)


def estimate_condition(p, scheme: SamplingScheme, condition: str, points) -> ConditionEstimate:
    """Estimate the constant of ER, ES, WGC or SGC over ``points``.

    Expectations are exact sums over the enumerated support; the full
    gradient is taken as the enumeration mean of ``g``, so full batch gives
    an ER left-hand side of exactly zero.
    """
    condition = condition.upper()
    if condition not in _FIELDS:
        raise ValueError(f"unknown condition {condition!r}")
    V, probs, G_star, mean_star = _prepare(p, scheme)
    moments = [_moments(p, V, probs, x, G_star, mean_star)
               for x in np.atleast_2d(np.asarray(points, dtype=float))]
    return _estimate(condition, moments, p.f_star)


@dataclass
class HierarchyReport:
    """Pointwise checks of the ER <= ES (<= WGC under interpolation) ordering."""

    estimates: dict
    er_le_es: bool
    es_eq_wgc: Optional[bool]
    wgc_holds: bool
    noise_at_optimum: float

    @property
    def ordered(self):
        """Estimated constants from the strongest to the weakest condition."""
        return [(c, self.estimates[c].value) for c in ("SGC", "WGC", "ES", "ER")
                if c in self.estimates]


def hierarchy_check(p, scheme: SamplingScheme, points, tol=1e-10) -> HierarchyReport:
    """Evaluate every condition on the same points and verify the ordering.

    WGC is reported as failing whenever ``E|g(x*)|^2 > 0``: its ratio then
    grows without bound as points approach ``x*``.
    """
    V, probs, G_star, mean_star = _prepare(p, scheme)
    moments = [_moments(p, V, probs, x, G_star, mean_star)
               for x in np.atleast_2d(np.asarray(points, dtype=float))]
    estimates = {}
    for cond in ("SGC", "WGC", "ES", "ER"):
        try:
            estimates[cond] = _estimate(cond, moments, p.f_star)
        except ValueError:
            pass
    er_le_es = all(m.er <= m.es * (1 + tol) + tol for m in moments)
    noise = float(probs @ np.einsum("ij,ij->i", G_star, G_star))
    interpolated = p.cert is not None and p.cert.interpolated
    es_eq_wgc = None
    if interpolated:
        es_eq_wgc = all(abs(m.es - m.wgc) <= tol * max(1.0, m.wgc) for m in moments)
    wgc_holds = noise <= tol
    return HierarchyReport(estimates, er_le_es, es_eq_wgc, wgc_holds, noise)


@dataclass
class ConstantsReport:
    """Constants of one (problem, sampling) pair, each with a provenance tag."""

    L_max: float
    L_bar: float
    L: float
    rho: float
    sigma2: float
    sigma1_sq: float
    calL: float
    calLmax: Optional[float]
    c2: float
    kappa_max: Optional[float]
    n: int
    b: int
    tags: dict = field(default_factory=dict)

    def items(self):
        for key in ("n", "b", "L_max", "L_bar", "L", "rho", "sigma2", "sigma1_sq",
                    "calL", "calLmax", "c2", "kappa_max"):
            yield key, getattr(self, key)


def _scheme_b(scheme):
    if scheme.kind == "full":
        return scheme.n
    if scheme.kind == "minibatch":
        return scheme.b
    return 1


def constants_report(p, scheme: SamplingScheme) -> ConstantsReport:
    """Constants for ``p`` under ``scheme``.

    Minibatch and full schemes use the closed forms; single-element schemes
    use the independent-sampling expression for ``calL`` and brute-force
    enumeration for ``rho``, ``sigma^2`` and ``calLmax``.
    """
    cert = p.cert
    L_i = cert.L_i
    n = p.n
    b = _scheme_b(scheme)
    sigma1_sq, _ = sigma_constants(p, 1) if p.x_star is not None else (0.0, 0.0)
    tags = {"L_max": cert.provenance.get("L_i", "analytic"),
            "L_bar": cert.provenance.get("L_i", "analytic"),
            "L": cert.provenance.get("L", "analytic"),
            "sigma1_sq": CLOSED_FORM, "c2": CLOSED_FORM}
    if scheme.kind in ("full", "minibatch"):
        rho = rho_minibatch(cert.L_max, n, b)
        sigma2 = sigma2_minibatch(sigma1_sq, n, b)
        calL = calL_minibatch(cert.L, cert.L_max, n, b)
        tags.update(rho=CLOSED_FORM, sigma2=CLOSED_FORM, calL=CLOSED_FORM)
        calLmax = None
        if comb(n, b) <= 10 ** 6:
            calLmax = cLmax_minibatch(L_i, b)
            tags["calLmax"] = UPPER_BOUND if b == n else CLOSED_FORM
    else:
        rho = rho_bruteforce(scheme, cert.L_max)
        sigma2 = gradient_noise(p, scheme) if p.x_star is not None else 0.0
        calL = calL_independent(scheme, cert.L, L_i)
        calLmax = cLmax_enumerated(scheme, L_i)
        tags.update(rho=BRUTE_FORCE, sigma2=BRUTE_FORCE, calL=CLOSED_FORM,
                    calLmax=BRUTE_FORCE)
    kappa = cert.L_max / cert.mu if cert.mu else None
    if kappa is not None:
        tags["kappa_max"] = CLOSED_FORM
    return ConstantsReport(
        L_max=cert.L_max, L_bar=cert.L_bar, L=cert.L, rho=rho, sigma2=sigma2,
        sigma1_sq=sigma1_sq, calL=calL, calLmax=calLmax, c2=_c2(scheme),
        kappa_max=kappa, n=n, b=b, tags=tags,
    )


def minibatch_table(p):
    """Rows ``(b, rho, sigma2, calL, calLmax)`` for ``b = 1..n``."""
    cert = p.cert
    sigma1_sq, _ = sigma_constants(p, 1)
    rows = []
    for b in range(1, p.n + 1):
        calLmax = cLmax_minibatch(cert.L_i, b) if comb(p.n, b) <= 10 ** 6 else float("nan")
        rows.append((b, rho_minibatch(cert.L_max, p.n, b),
                     sigma2_minibatch(sigma1_sq, p.n, b),
                     calL_minibatch(cert.L, cert.L_max, p.n, b), calLmax))
    return rows
