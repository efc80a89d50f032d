"""Step-size schedules and the parameter choices that go with each rate.

Five rules are supported: constant, finite horizon ``gamma / sqrt(T)``,
``gamma / sqrt(k + 1)``, a constant-then-``O(1/k)`` switching rule and the
stochastic Polyak step. :func:`derive_schedule` fills in the parameters a
convergence result prescribes from a :class:`ConstantsReport`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

__all__ = [
    "StepSchedule",
    "MissingConstantError",
    "THEOREMS",
    "SPS_SKIP_TOL",
    "gamma_at",
    "derive_schedule",
    "parse_schedule",
]

VARIANTS = ("constant", "finite_horizon", "inv_sqrt", "switching", "sps")

THEOREMS = (
    "quasar_constant",
    "quasar_horizon",
    "quasar_decreasing",
    "pl_constant",
    "pl_switching",
    "sps",
    "pl_minibatch_noninterp",
)

# SPS takes no step when |grad f_v|^2 <= SPS_SKIP_TOL * (1 + f_v)
SPS_SKIP_TOL = 1e-14


class MissingConstantError(ValueError):
    """A schedule derivation needs a constant the report does not carry."""


@dataclass(frozen=True)
class StepSchedule:
    """One step-size rule.

    ``gamma`` is the base step for constant, finite_horizon, inv_sqrt and
    the constant phase of switching. ``T`` is the horizon of
    finite_horizon; ``k_star`` and ``mu`` parameterise switching; ``c``
    is the SPS constant.
    """

    variant: str
    gamma: Optional[float] = None
    T: Optional[int] = None
    k_star: Optional[float] = None
    mu: Optional[float] = None
    c: Optional[float] = None

    def __post_init__(self):
        v = self.variant
        if v not in VARIANTS:
            raise ValueError(f"unknown schedule variant {v!r}")
        if v != "sps" and not (self.gamma is not None and self.gamma > 0):
            raise ValueError(f"{v} needs gamma > 0")
        if v == "finite_horizon" and not (self.T is not None and self.T >= 1):
            raise ValueError("finite_horizon needs T >= 1")
        if v == "switching":
            if not (self.k_star is not None and self.k_star >= 1):
                raise ValueError("switching needs k_star >= 1")
            if not (self.mu is not None and self.mu > 0):
                raise ValueError("switching needs mu > 0")
        if v == "sps" and not (self.c is not None and self.c > 0):
            raise ValueError("sps needs c > 0")

    @classmethod
    def constant(cls, gamma):
        return cls("constant", gamma=float(gamma))

    @classmethod
    def finite_horizon(cls, gamma, T):
        return cls("finite_horizon", gamma=float(gamma), T=int(T))

    @classmethod
    def inv_sqrt(cls, gamma):
        return cls("inv_sqrt", gamma=float(gamma))

    @classmethod
    def switching(cls, gamma, k_star, mu):
        return cls("switching", gamma=float(gamma), k_star=float(k_star), mu=float(mu))

    @classmethod
    def sps(cls, c):
        return cls("sps", c=float(c))

    @property
    def switch_at(self) -> int:
        """``ceil(k_star)``, the last iteration of the constant phase."""
        return math.ceil(self.k_star)

    def spec(self) -> str:
        """Fully numeric schedule string, parseable by :func:`parse_schedule`."""
        if self.variant == "constant":
            return f"constant:{self.gamma!r}"
        if self.variant == "finite_horizon":
            return f"horizon:{self.gamma!r}:{self.T}"
        if self.variant == "inv_sqrt":
            return f"invsqrt:{self.gamma!r}"
        if self.variant == "switching":
            return f"switching:{self.gamma!r}:{self.k_star!r}:{self.mu!r}"
        return f"sps:{self.c!r}"


def gamma_at(s: StepSchedule, k: int, sps_state=None) -> float:
    """Step size at iteration ``k``.

    ``sps_state`` is ``(f_v, f_v_star, grad_norm_sq)`` for the current draw
    and is required by the SPS rule, which returns 0 at (near) stationary
    points of ``f_v`` and clamps negative ratios to 0.
    """
    v = s.variant
    if v == "constant":
        return s.gamma
    if v == "finite_horizon":
        return s.gamma / math.sqrt(s.T)
    if v == "inv_sqrt":
        return s.gamma / math.sqrt(k + 1)
    if v == "switching":
        if k <= s.switch_at:
            return s.gamma
        return (2 * k + 1) / ((k + 1) ** 2 * s.mu)
    if sps_state is None:
        raise ValueError("the SPS rule needs (f_v, f_v_star, grad_norm_sq)")
    f_v, f_v_star, gsq = sps_state
    if gsq <= SPS_SKIP_TOL * (1.0 + abs(f_v)):
        return 0.0
    return max(f_v - f_v_star, 0.0) / (s.c * gsq)


def _need(name, value):
    if value is None:
        raise MissingConstantError(f"schedule needs {name}, which is not available")
    return value


def derive_schedule(theorem_id, report, cert, horizon=None, target_eps=None, c=None) -> StepSchedule:
    """Schedule prescribed by a convergence result.

    Args:
        theorem_id: one of :data:`THEOREMS`.
        report: :class:`~structsgd.constants.ConstantsReport` of the run.
        cert: the problem's :class:`~structsgd.problems.StructureCert`.
        horizon: iteration budget ``T`` (finite horizon only).
        target_eps: accuracy used by the noisy PL step; ignored if ``sigma2 = 0``.
        c: SPS constant; defaults to ``1/zeta``, which minimises the
            ``2c^2/(2c zeta - 1)`` prefactor of the SPS rate.

    Raises:
        MissingConstantError: a required constant (``zeta``, ``mu``, ...) is absent.
    """
    L, rho, sigma2 = report.L, report.rho, report.sigma2
    if theorem_id in ("quasar_constant", "quasar_horizon", "quasar_decreasing"):
        zeta = _need("zeta", cert.zeta)
        A = 2.0 * rho + L
        if theorem_id == "quasar_constant":
            return StepSchedule.constant(zeta / (2.0 * A))
        if theorem_id == "quasar_horizon":
            return StepSchedule.finite_horizon(zeta / (2.0 * A), _need("horizon", horizon))
        return StepSchedule.inv_sqrt(zeta / A)
    if theorem_id == "pl_constant":
        mu = _need("mu", cert.mu)
        gamma = 1.0 / (L * (1.0 + 2.0 * rho / mu))
        if sigma2 > 0 and target_eps is not None:
            gamma = min(gamma, mu * target_eps / (2.0 * sigma2 * L))
        return StepSchedule.constant(gamma)
    if theorem_id == "pl_switching":
        mu = _need("mu", cert.mu)
        gamma = mu / (L * (mu + 2.0 * rho))
        k_star = 2.0 * (L / mu) * (1.0 + 2.0 * rho / mu)
        return StepSchedule.switching(gamma, k_star, mu)
    if theorem_id == "sps":
        if c is None:
            c = 1.0 / _need("zeta", cert.zeta)
        return StepSchedule.sps(c)
    if theorem_id == "pl_minibatch_noninterp":
        mu = _need("mu", cert.mu)
        n, b = report.n, report.b
        if n == 1:
            return StepSchedule.constant(1.0 / L)
        num = mu * (n - 1) * b
        return StepSchedule.constant(num / (num + 2.0 * report.L_max * (n - b)) / L)
    raise ValueError(f"unknown theorem id {theorem_id!r}; choose from {', '.join(THEOREMS)}")


def parse_schedule(text, report=None, cert=None, iterations=None, target_eps=None) -> StepSchedule:
    """Parse ``constant:g | horizon:g[:T] | invsqrt:g | switching[:g:k*:mu] | sps:c | derive:<id>``.

    ``horizon`` without ``T`` uses ``iterations``. Bare ``switching`` and
    ``derive:`` forms need ``report`` and ``cert``.
    """
    head, *args = text.strip().split(":")
    try:
        nums = [float(a) for a in args] if head != "derive" else []
    except ValueError:
        raise ValueError(f"bad schedule {text!r}") from None
    if head == "constant" and len(nums) == 1:
        return StepSchedule.constant(nums[0])
    if head == "horizon" and len(nums) in (1, 2):
        T = int(nums[1]) if len(nums) == 2 else iterations
        if T is None:
            raise ValueError("horizon schedule needs T or an iteration count")
        return StepSchedule.finite_horizon(nums[0], T)
    if head == "invsqrt" and len(nums) == 1:
        return StepSchedule.inv_sqrt(nums[0])
    if head == "sps" and len(nums) == 1:
        return StepSchedule.sps(nums[0])
    if head == "switching" and len(nums) == 3:
        return StepSchedule.switching(*nums)
    if head == "switching" and not nums:
        head, args = "derive", ["pl_switching"]
    if head == "derive" and len(args) == 1:
        if report is None or cert is None:
            raise ValueError("derived schedules need the problem constants")
        return derive_schedule(args[0], report, cert, horizon=iterations, target_eps=target_eps)
    raise ValueError(f"bad schedule {text!r}")
