"""Sampling vectors, seeded random streams and stochastic oracles.

A sampling vector ``v`` is a nonnegative random n-vector with ``E[v_i] = 1``;
the stochastic gradient is ``g(x) = (1/n) sum_i v_i grad f_i(x)``. Three
families are supported: full batch, uniform ``b``-minibatch without
replacement, and single-element sampling with probabilities ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Optional

import numpy as np

__all__ = [
    "SamplingScheme",
    "SampleDraw",
    "RngStream",
    "EnumerationTooLarge",
    "mix64",
    "draw",
    "enumerate_support",
    "enumerate_exact",
    "support_matrix",
    "stoch_grad",
    "stoch_loss",
]

MAX_ENUMERATION = 10 ** 6

_MASK64 = (1 << 64) - 1


class EnumerationTooLarge(ValueError):
    """The support of a scheme is too large to enumerate."""


def mix64(master_seed: int, stream_index: int) -> int:
    """Derive a child seed with the splitmix64 finaliser.

    ``z = master_seed + (stream_index + 1) * 0x9E3779B97F4A7C15 (mod 2^64)``
    followed by the two xor-shift-multiply rounds of splitmix64.
    """
    z = (int(master_seed) + (int(stream_index) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class RngStream:
    """A PCG64 generator seeded from ``mix64(master_seed, stream_index)``."""

    def __init__(self, master_seed: int, stream_index: int):
        self.master_seed = int(master_seed) & _MASK64
        self.stream_index = int(stream_index)
        self.generator = np.random.Generator(
            np.random.PCG64(mix64(self.master_seed, self.stream_index)))

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_index={self.stream_index})"


@dataclass(frozen=True, eq=False)
class SamplingScheme:
    """Distribution over sampling vectors.

    Use the constructors :meth:`full`, :meth:`minibatch`, :meth:`single`,
    :meth:`uniform` and :meth:`importance` rather than the raw fields.
    """

    kind: str
    n: int
    b: Optional[int] = None
    p: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.kind == "minibatch":
            if self.b is None or not 1 <= self.b <= self.n:
                raise ValueError(f"minibatch size must satisfy 1 <= b <= n, got b={self.b}")
        elif self.kind == "single":
            p = np.asarray(self.p, dtype=float)
            if p.shape != (self.n,):
                raise ValueError("p must have one entry per component")
            if np.any(p <= 0):
                raise ValueError("all probabilities must be positive")
            if abs(p.sum() - 1.0) > 1e-12:
                raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
            object.__setattr__(self, "p", p)
            object.__setattr__(self, "_cdf", np.cumsum(p))
        elif self.kind != "full":
            raise ValueError(f"unknown sampling kind {self.kind!r}")

    @classmethod
    def full(cls, n):
        return cls("full", int(n))

    @classmethod
    def minibatch(cls, n, b):
        return cls("minibatch", int(n), int(b))

    @classmethod
    def single(cls, p):
        p = np.asarray(p, dtype=float)
        return cls("single", p.size, p=p)

    @classmethod
    def uniform(cls, n):
        return cls.single(np.full(int(n), 1.0 / int(n)))

    @classmethod
    def importance(cls, L_i):
        """Single-element sampling with ``p_i = L_i / sum_j L_j``."""
        L_i = np.asarray(L_i, dtype=float)
        return cls.single(L_i / L_i.sum())

    @classmethod
    def parse(cls, spec: str, n: int, L_i=None):
        """Build a scheme from ``full | minibatch:b | single:uniform | single:importance``."""
        head, _, arg = spec.strip().partition(":")
        if head == "full" and not arg:
            return cls.full(n)
        if head == "minibatch":
            try:
                return cls.minibatch(n, int(arg))
            except ValueError as exc:
                raise ValueError(f"bad sampling spec {spec!r}: {exc}") from None
        if head == "single" and arg == "uniform":
            return cls.uniform(n)
        if head == "single" and arg == "importance":
            if L_i is None:
                raise ValueError("importance sampling needs the component constants L_i")
            return cls.importance(L_i)
        raise ValueError(f"bad sampling spec {spec!r}")

    @property
    def spec(self) -> str:
        if self.kind == "full":
            return "full"
        if self.kind == "minibatch":
            return f"minibatch:{self.b}"
        return "single"

    @property
    def inclusion(self) -> np.ndarray:
        """``P(i in S)`` for every component."""
        if self.kind == "full":
            return np.ones(self.n)
        if self.kind == "minibatch":
            return np.full(self.n, self.b / self.n)
        return self.p.copy()

    @property
    def support_size(self) -> int:
        if self.kind == "full":
            return 1
        if self.kind == "minibatch":
            return comb(self.n, self.b)
        return self.n


@dataclass(frozen=True, eq=False)
class SampleDraw:
    """One realised sampling vector: sorted support ``S`` and weights ``v_i``, i in S."""

    support: np.ndarray
    weights: np.ndarray

    def vector(self, n) -> np.ndarray:
        v = np.zeros(n)
        v[self.support] = self.weights
        return v


def draw(scheme: SamplingScheme, rng: RngStream) -> SampleDraw:
    """Draw one sampling vector.

    Minibatches use a partial Fisher-Yates shuffle, so each of the
    ``C(n, b)`` subsets is equally likely; the support is returned sorted.
    """
    n = scheme.n
    if scheme.kind == "full":
        return SampleDraw(np.arange(n), np.ones(n))
    gen = rng.generator
    if scheme.kind == "minibatch":
        b = scheme.b
        if b == n:
            return SampleDraw(np.arange(n), np.ones(n))
        if b == 1:
            return SampleDraw(np.array([gen.integers(n)]), np.array([float(n)]))
        picks = gen.integers(np.arange(b), n)
        idx = np.arange(n)
        for j, r in enumerate(picks):
            idx[j], idx[r] = idx[r], idx[j]
        return SampleDraw(np.sort(idx[:b]), np.full(b, n / b))
    i = int(np.searchsorted(scheme._cdf, gen.random(), side="right"))
    i = min(i, n - 1)
    return SampleDraw(np.array([i]), np.array([1.0 / scheme.p[i]]))


def enumerate_exact(scheme: SamplingScheme, max_size=MAX_ENUMERATION):
    """Support with exact probabilities: list of ``(support tuple, weights, Fraction)``.

    Minibatch weights are returned as Fractions ``n/b``; single-element
    probabilities are the exact rationals of the stored floats, renormalised.
    """
    size = scheme.support_size
    if size > max_size:
        raise EnumerationTooLarge(f"support has {size} elements (limit {max_size})")
    n = scheme.n
    if scheme.kind == "full":
        return [(tuple(range(n)), (Fraction(1),) * n, Fraction(1))]
    if scheme.kind == "minibatch":
        b = scheme.b
        prob = Fraction(1, comb(n, b))
        w = Fraction(n, b)
        return [(S, (w,) * b, prob) for S in combinations(range(n), b)]
    fracs = [Fraction(float(pi)) for pi in scheme.p]
    total = sum(fracs)
    probs = [f / total for f in fracs]
    return [((i,), (1 / probs[i],), probs[i]) for i in range(n)]


def enumerate_support(scheme: SamplingScheme, max_size=MAX_ENUMERATION):
    """All draws with their probabilities, as ``[(SampleDraw, float), ...]``.

    For single-element sampling the weight is ``1 / p_i`` computed from the
    stored float ``p_i``, exactly as :func:`draw` produces it.
    """
    out = []
    for S, w, prob in enumerate_exact(scheme, max_size):
        support = np.array(S, dtype=int)
        if scheme.kind == "single":
            weights = 1.0 / scheme.p[support]
        else:
            weights = np.array([float(x) for x in w])
        out.append((SampleDraw(support, weights), float(prob)))
    return out


def support_matrix(scheme: SamplingScheme, max_size=MAX_ENUMERATION):
    """Dense ``(m, n)`` matrix of sampling vectors and the ``(m,)`` probabilities."""
    draws = enumerate_support(scheme, max_size)
    V = np.array([d.vector(scheme.n) for d, _ in draws])
    probs = np.array([p for _, p in draws])
    return V, probs


def stoch_grad(p, x, d: SampleDraw) -> np.ndarray:
    """``(1/n) sum_{i in S} v_i grad f_i(x)``."""
    return d.weights @ p.component_grads(x, d.support) / p.n


def stoch_loss(p, x, d: SampleDraw):
    """``f_v(x)`` and the surrogate ``f_v* = (1/n) sum_{i in S} v_i f_i*``."""
    if p.f_i_star is None:
        raise ValueError("component minima f_i_star are unknown")
    f_v = d.weights @ p.component_values(x, d.support) / p.n
    f_v_star = d.weights @ p.f_i_star[d.support] / p.n
    return float(f_v), float(f_v_star)
