"""Finite-sum problems, benchmark instances and numerical structure certifiers.

A problem is ``f(x) = (1/n) sum_i f_i(x)`` exposed through vectorised
component oracles. Every concrete problem carries a :class:`StructureCert`
recording which constants are known in closed form and which were estimated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "StructureCert",
    "FiniteSumProblem",
    "LeastSquares",
    "SinSquared",
    "NonlinearLeastSquares",
    "Composition",
    "CertResult",
    "InterpolationResult",
    "DegenerateSampleError",
    "make_sin_squared",
    "make_least_squares",
    "random_least_squares",
    "make_nonlinear_lsq",
    "make_composition",
    "default_points",
    "certify_quasar",
    "certify_pl",
    "certify_interpolation",
    "finite_diff_check",
    "smoothness_gap",
]

ANALYTIC = "analytic"
ESTIMATED = "estimated"

# f(x) - f* at or below this (relative to 1 + |f*|) makes a ratio vacuous.
DEGENERATE_TOL = 1e-12
INTERPOLATION_TOL = 1e-10


class DegenerateSampleError(ValueError):
    """Raised when every certification point sits at the optimal value."""


@dataclass
class StructureCert:
    """Structural constants of a problem and where each one came from."""

    L_i: np.ndarray
    L: float
    mu: Optional[float] = None
    zeta: Optional[float] = None
    lam: Optional[float] = None
    interpolated: bool = False
    xstar_convex: bool = False
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.L_i = np.asarray(self.L_i, dtype=float)
        if np.any(self.L_i < 0):
            raise ValueError("component smoothness constants must be >= 0")
        if self.zeta is not None and not 0.0 < self.zeta <= 1.0:
            raise ValueError(f"zeta must lie in (0, 1], got {self.zeta}")
        if self.mu is not None and not 0.0 < self.mu <= self.L * (1 + 1e-9):
            raise ValueError(f"mu must satisfy 0 < mu <= L, got mu={self.mu}, L={self.L}")

    @property
    def L_max(self) -> float:
        return float(self.L_i.max())

    @property
    def L_bar(self) -> float:
        return float(self.L_i.mean())


class FiniteSumProblem:
    """Base class for ``f(x) = (1/n) sum_i f_i(x)``.

    Subclasses implement :meth:`component_values` and
    :meth:`component_grads`; both take an optional index array selecting
    a subset of components and are vectorised over it.
    """

    name = "finite_sum"

    def __init__(self, n, d, x_star=None, f_star=None, f_i_star=None, cert=None):
        self.n = int(n)
        self.d = int(d)
        self.x_star = None if x_star is None else np.asarray(x_star, dtype=float)
        self.f_star = None if f_star is None else float(f_star)
        self.f_i_star = None if f_i_star is None else np.asarray(f_i_star, dtype=float)
        self.cert = cert

    def component_values(self, x, idx=None) -> np.ndarray:
        raise NotImplementedError

    def component_grads(self, x, idx=None) -> np.ndarray:
        raise NotImplementedError

    def value(self, x) -> float:
        return float(np.mean(self.component_values(x)))

    def grad(self, x) -> np.ndarray:
        return self.component_grads(x).mean(axis=0)

    def _rows(self, idx):
        return slice(None) if idx is None else np.asarray(idx)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, d={self.d})"


class LeastSquares(FiniteSumProblem):
    """``f_i(x) = (A_i . x - y_i)^2 / 2``."""

    name = "least_squares"

    def __init__(self, A, y, x_star, f_star, cert):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        super().__init__(A.shape[0], A.shape[1], x_star, f_star,
                         np.zeros(A.shape[0]), cert)
        self.A = A
        self.y = np.asarray(y, dtype=float).reshape(-1)

    def residuals(self, x, idx=None):
        rows = self._rows(idx)
        return self.A[rows] @ x - self.y[rows]

    def component_values(self, x, idx=None):
        return 0.5 * self.residuals(x, idx) ** 2

    def component_grads(self, x, idx=None):
        rows = self._rows(idx)
        return self.residuals(x, idx)[:, None] * self.A[rows]

    def grad(self, x):
        return self.A.T @ self.residuals(x) / self.n


class SinSquared(FiniteSumProblem):
    """Separable ``f_i(x) = a_i (x_i^2 + 4 b_i sin^2(x_i))`` with ``d = n``."""

    name = "sin_squared"

    def __init__(self, a, b, cert=None):
        a = np.asarray(a, dtype=float)
        super().__init__(a.size, a.size, np.zeros(a.size), 0.0, np.zeros(a.size), cert)
        self.a = a
        self.b = np.asarray(b, dtype=float)

    def component_values(self, x, idx=None):
        rows = self._rows(idx)
        xi = np.asarray(x, dtype=float)[rows]
        return self.a[rows] * (xi ** 2 + 4.0 * self.b[rows] * np.sin(xi) ** 2)

    def component_derivs(self, x, idx=None):
        rows = self._rows(idx)
        xi = np.asarray(x, dtype=float)[rows]
        return self.a[rows] * (2.0 * xi + 4.0 * self.b[rows] * np.sin(2.0 * xi))

    def component_grads(self, x, idx=None):
        rows = np.arange(self.n) if idx is None else np.asarray(idx)
        out = np.zeros((rows.size, self.d))
        out[np.arange(rows.size), rows] = self.component_derivs(x, rows)
        return out

    def grad(self, x):
        return self.component_derivs(x) / self.n


class NonlinearLeastSquares(FiniteSumProblem):
    """``f_i(x) = (tanh(A_i . x) - y_i)^2 / 2`` with ``y = tanh(A x_star)``."""

    name = "nonlinear_lsq"

    def __init__(self, A, x_star, cert=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        x_star = np.asarray(x_star, dtype=float)
        super().__init__(A.shape[0], A.shape[1], x_star, 0.0, np.zeros(A.shape[0]), cert)
        self.A = A
        self.y = np.tanh(A @ x_star)

    def residuals(self, x, idx=None):
        rows = self._rows(idx)
        return np.tanh(self.A[rows] @ x) - self.y[rows]

    def component_values(self, x, idx=None):
        return 0.5 * self.residuals(x, idx) ** 2

    def component_grads(self, x, idx=None):
        rows = self._rows(idx)
        t = self.A[rows] @ x
        scale = (np.tanh(t) - self.y[rows]) / np.cosh(t) ** 2
        return scale[:, None] * self.A[rows]

    def jacobian(self, x):
        """Jacobian of ``F(x) = tanh(A x)``, shape ``(n, d)``."""
        return self.A / np.cosh(self.A @ x)[:, None] ** 2


# One-dimensional bases for compositions: value, derivative, sup |second
# derivative| (None when unbounded on the real line), and quasar constant
# of the base around 0 (None when it must be estimated).
def _square(u):
    return u ** 2, 2.0 * u


def _quartic(u):
    return u ** 4, 4.0 * u ** 3


def _sinsq(u):
    return u ** 2 + 3.0 * np.sin(u) ** 2, 2.0 * u + 3.0 * np.sin(2.0 * u)


def _logcosh(u):
    # log(cosh(u)) computed without overflow
    au = np.abs(u)
    return au + np.log1p(np.exp(-2.0 * au)) - np.log(2.0), np.tanh(u)


BASES = {
    "square": (_square, 2.0, 1.0),
    "quartic": (_quartic, None, 1.0),
    "sinsq": (_sinsq, 8.0, None),
    "logcosh": (_logcosh, 1.0, 1.0),
}


class Composition(FiniteSumProblem):
    """``f_i(x) = base(A_i . x - b_i)`` for a one-dimensional ``base``."""

    name = "composition"

    def __init__(self, base, A, b, x_star, cert=None):
        if base not in BASES:
            raise ValueError(f"unknown base {base!r}; choose from {sorted(BASES)}")
        A = np.atleast_2d(np.asarray(A, dtype=float))
        super().__init__(A.shape[0], A.shape[1], x_star, 0.0, np.zeros(A.shape[0]), cert)
        self.base = base
        self._fn = BASES[base][0]
        self.A = A
        self.b = np.asarray(b, dtype=float).reshape(-1)

    def component_values(self, x, idx=None):
        rows = self._rows(idx)
        return self._fn(self.A[rows] @ x - self.b[rows])[0]

    def component_grads(self, x, idx=None):
        rows = self._rows(idx)
        return self._fn(self.A[rows] @ x - self.b[rows])[1][:, None] * self.A[rows]


# ---------------------------------------------------------------------------
# constructors


def make_sin_squared(a, b, certify_points=None) -> SinSquared:
    """Separable PL benchmark ``f_i(x) = a_i (x_i^2 + 4 b_i sin^2 x_i)``.

    The component smoothness ``L_i = 2 a_i (1 + 4 b_i)`` bounds
    ``|f_i''(x)| = a_i |2 + 8 b_i cos(2x)|``. The PL constant is estimated
    with :func:`certify_pl` on ``certify_points`` (default point set when
    omitted).
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be 1-d sequences of equal length")
    if np.any(a <= 0):
        raise ValueError("all a_i must be positive")
    if np.any((b <= 0) | (b >= 1)):
        raise ValueError("all b_i must lie in (0, 1)")
    n = a.size
    L_i = 2.0 * a * (1.0 + 4.0 * b)
    p = SinSquared(a, b)
    p.cert = StructureCert(L_i=L_i, L=float(L_i.max() / n), interpolated=True,
                           xstar_convex=True,
                           provenance={"L_i": ANALYTIC, "L": ANALYTIC})
    res = certify_pl(p, default_points(p) if certify_points is None else certify_points)
    if res.ok:
        p.cert.mu = res.value
        p.cert.provenance["mu"] = ESTIMATED
    return p


def _lsq_cert(A, interpolated):
    n = A.shape[0]
    H = A.T @ A / n
    eig = np.linalg.eigvalsh(H)
    L = float(eig[-1])
    mu = float(eig[0]) if eig[0] > 1e-12 * max(L, 1.0) else None
    cert = StructureCert(
        L_i=np.einsum("ij,ij->i", A, A), L=L, mu=mu, zeta=1.0, lam=mu,
        interpolated=interpolated, xstar_convex=True,
        provenance={k: ANALYTIC for k in ("L_i", "L", "mu", "zeta", "lam")},
    )
    return cert


def make_least_squares(A, y=None, interpolated=False, x_star=None, seed=0) -> LeastSquares:
    """Linear least squares with ``f_i(x) = (A_i . x - y_i)^2 / 2``.

    With ``interpolated=True`` the targets become ``y = A x_star`` where
    ``x_star`` is either supplied or drawn as a standard normal vector from
    ``seed``. Otherwise ``x_star`` is the minimum-norm least-squares
    solution.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n, d = A.shape
    if interpolated:
        if x_star is None:
            x_star = np.random.default_rng(seed).standard_normal(d)
        x_star = np.asarray(x_star, dtype=float).reshape(d)
        y = A @ x_star
    else:
        if y is None:
            raise ValueError("y is required for a non-interpolated problem")
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size != n:
            raise ValueError(f"y has {y.size} entries, expected {n}")
        x_star = np.linalg.lstsq(A, y, rcond=None)[0]
    r = A @ x_star - y
    f_star = float(np.mean(0.5 * r ** 2))
    if interpolated:
        f_star = 0.0
    return LeastSquares(A, y, x_star, f_star, _lsq_cert(A, interpolated))


def random_least_squares(n, d, seed=0, interpolated=True, noise=1.0) -> LeastSquares:
    """Gaussian design least squares; noisy targets when not interpolated."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    if interpolated:
        return make_least_squares(A, interpolated=True, x_star=rng.standard_normal(d))
    y = A @ rng.standard_normal(d) + noise * rng.standard_normal(n)
    return make_least_squares(A, y)


def _tanh_curvature_bound(c):
    # sup_t |g''(t)| for g(t) = (tanh t - c)^2 / 2 on a dense grid; g'' -> 0
    # in both tails so a wide bounded grid captures the supremum.
    t = np.linspace(-20.0, 20.0, 400001)
    th = np.tanh(t)
    s2 = 1.0 - th ** 2
    return float(np.max(np.abs(s2 ** 2 - 2.0 * (th - c) * th * s2)))


def make_nonlinear_lsq(A, x_star) -> NonlinearLeastSquares:
    """Interpolated nonlinear least squares ``F(x) = tanh(A x)``.

    Requires ``n <= d`` so that the Jacobian can have full row rank. The
    PL constant is a local estimate ``s_min(DF(x_star))^2 / n``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n, d = A.shape
    if n > d:
        raise ValueError(f"need n <= d for a full-row-rank Jacobian, got n={n}, d={d}")
    p = NonlinearLeastSquares(A, x_star)
    row_sq = np.einsum("ij,ij->i", A, A)
    L_i = np.array([_tanh_curvature_bound(c) for c in p.y]) * row_sq
    s = np.linalg.svd(p.jacobian(p.x_star), compute_uv=False)
    mu = float(s[-1] ** 2 / n) if s[-1] > 0 else None
    # smoothness of the average: Hessian at x* is DF^T DF / n, plus curvature
    # away from x*; bounded by the average of L_i.
    L = float(L_i.mean())
    p.cert = StructureCert(
        L_i=L_i, L=L, mu=mu, interpolated=True, xstar_convex=True,
        provenance={"L_i": ESTIMATED, "L": ESTIMATED, "mu": ESTIMATED},
    )
    return p


def make_composition(base, A, x_star=None, b=None, seed=0, certify_points=None) -> Composition:
    """Composition ``f_i(x) = base(A_i . x - b_i)`` with ``A x_star = b``.

    Either ``x_star`` (then ``b = A x_star``) or a consistent ``b`` must be
    given; when both are missing ``x_star`` is drawn from ``seed``. The
    quasar constant is certified empirically.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n, d = A.shape
    if x_star is None and b is None:
        x_star = np.random.default_rng(seed).standard_normal(d)
    if x_star is None:
        b = np.asarray(b, dtype=float).reshape(-1)
        x_star, *_ = np.linalg.lstsq(A, b, rcond=None)
        if not np.allclose(A @ x_star, b, rtol=1e-10, atol=1e-10):
            raise ValueError("b is inconsistent: A x = b has no solution")
    x_star = np.asarray(x_star, dtype=float).reshape(d)
    b = A @ x_star
    p = Composition(base, A, b, x_star)
    _, curv, zeta = BASES[base]
    row_sq = np.einsum("ij,ij->i", A, A)
    if curv is None:
        # only u^4: local bound on the ball |x - x*| <= R, where |u_i| <= |A_i| R
        R = 5.0 * (1.0 + np.linalg.norm(x_star))
        L_i = 12.0 * R ** 2 * row_sq ** 2
        L = float(L_i.mean())
        provenance = {"L_i": ESTIMATED, "L": ESTIMATED}
    else:
        L_i = curv * row_sq
        L = float(curv * np.linalg.eigvalsh(A.T @ A / n)[-1])
        provenance = {"L_i": ANALYTIC, "L": ANALYTIC}
    p.cert = StructureCert(L_i=L_i, L=L, interpolated=True,
                           xstar_convex=zeta is not None, provenance=provenance)
    res = certify_quasar(p, default_points(p) if certify_points is None else certify_points)
    if res.ok:
        p.cert.zeta = res.value
        p.cert.provenance["zeta"] = ESTIMATED
    return p


# ---------------------------------------------------------------------------
# certifiers


def default_points(p: FiniteSumProblem, count=10_000, seed=0, grid=201) -> np.ndarray:
    """Uniform points in the ball of radius ``5 (1 + |x_star|)`` plus an axis grid."""
    rng = np.random.default_rng(seed)
    R = 5.0 * (1.0 + np.linalg.norm(p.x_star))
    z = rng.standard_normal((count, p.d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    radii = R * rng.random(count) ** (1.0 / p.d)
    ball = p.x_star + radii[:, None] * z
    t = np.linspace(-R, R, grid)
    axes = [p.x_star + np.outer(t, np.eye(p.d)[j]) for j in range(p.d)]
    return np.vstack([ball, *axes])


@dataclass
class CertResult:
    """Outcome of a sampled certification.

    ``value`` is the estimated constant (minimum ratio over usable points);
    ``violations`` indexes points whose ratio was non-positive.
    """

    value: float
    ratios: np.ndarray
    used: np.ndarray
    violations: np.ndarray

    @property
    def ok(self) -> bool:
        return self.violations.size == 0 and self.value > 0


def _sub_optimality(p, points):
    if p.x_star is None or p.f_star is None:
        raise ValueError("certification needs x_star and f_star")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    f_sub = np.array([p.value(x) for x in points]) - p.f_star
    keep = f_sub > DEGENERATE_TOL * (1.0 + abs(p.f_star))
    if not np.any(keep):
        raise DegenerateSampleError("every point sits at the optimal value")
    return points, f_sub, keep


def _finish(ratios, keep, clamp):
    used = np.flatnonzero(keep)
    r = ratios[used]
    violations = used[r <= 0]
    value = float(np.min(np.clip(r, 0.0, 1.0) if clamp else r))
    return CertResult(value=value, ratios=r, used=used, violations=violations)


def certify_quasar(p: FiniteSumProblem, points) -> CertResult:
    """Estimate zeta as ``min <grad f(x), x - x*> / (f(x) - f*)`` clamped to [0, 1]."""
    points, f_sub, keep = _sub_optimality(p, points)
    ratios = np.full(len(points), np.inf)
    for j in np.flatnonzero(keep):
        ratios[j] = p.grad(points[j]) @ (points[j] - p.x_star) / f_sub[j]
    return _finish(ratios, keep, clamp=True)


def certify_pl(p: FiniteSumProblem, points) -> CertResult:
    """Estimate mu as ``min |grad f(x)|^2 / (2 (f(x) - f*))``."""
    points, f_sub, keep = _sub_optimality(p, points)
    ratios = np.full(len(points), np.inf)
    for j in np.flatnonzero(keep):
        g = p.grad(points[j])
        ratios[j] = g @ g / (2.0 * f_sub[j])
    return _finish(ratios, keep, clamp=False)


@dataclass
class InterpolationResult:
    passed: bool
    worst_gap: float
    worst_index: int


def certify_interpolation(p: FiniteSumProblem, tol=INTERPOLATION_TOL) -> InterpolationResult:
    """Check ``f_i(x*) = min f_i`` for every component."""
    if p.f_i_star is None:
        raise ValueError("component minima f_i_star are unknown")
    if p.x_star is None:
        raise ValueError("x_star is unknown")
    gaps = p.component_values(p.x_star) - p.f_i_star
    j = int(np.argmax(gaps))
    return InterpolationResult(passed=bool(gaps[j] <= tol), worst_gap=float(gaps[j]),
                               worst_index=j)


def finite_diff_check(p: FiniteSumProblem, x, h=1e-6) -> float:
    """Largest relative error between analytic and central-difference gradients.

    Coordinate ``j`` is perturbed by ``h (1 + |x_j|)``. Errors are measured
    per component in the Euclidean norm and divided by ``max(|grad f_i|, 1)``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    analytic = p.component_grads(x)
    numeric = np.empty_like(analytic)
    for j in range(p.d):
        step = h * (1.0 + abs(x[j]))
        e = np.zeros(p.d)
        e[j] = step
        numeric[:, j] = (p.component_values(x + e) - p.component_values(x - e)) / (2.0 * step)
    err = np.linalg.norm(numeric - analytic, axis=1)
    scale = np.maximum(np.linalg.norm(analytic, axis=1), 1.0)
    return float(np.max(err / scale))


def smoothness_gap(p: FiniteSumProblem, points) -> float:
    """Max of ``|grad f|^2 - 2 L (f - f*)`` over points; <= 0 when L bounds the curvature along x*."""
    L = p.cert.L
    worst = -np.inf
    for x in np.atleast_2d(points):
        g = p.grad(x)
        worst = max(worst, g @ g - 2.0 * L * (p.value(x) - p.f_star))
    return float(worst)
