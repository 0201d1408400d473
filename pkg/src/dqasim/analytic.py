"""Closed-form output distribution of the noisy adder and its symmetry properties.

With a uniform fidelity parameter ``a`` and total input ``T``, the server reads
``x`` with probability::

    P(x) = 2**-n * prod_{s=0}^{n-1} [1 + a*cos(theta_s - 2*pi*x / 2**(n-s))],
    theta_s = 2*pi*T / 2**(n-s)

The error ``z = x - T mod 2**n`` then has a distribution that depends only
on ``(n, a)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dqa import OutcomeDistribution, correct_sum
from .noise import NoiseModel

ANALYTIC_TOL = 1e-12
SIMULATED_TOL = 1e-9


class LemmaViolation(AssertionError):
    pass


@dataclass(frozen=True)
class AnalyticParams:
    inputs: tuple
    n: int
    a: float

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(int(t) for t in self.inputs))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 <= self.a <= 1.0:
            raise ValueError(f"fidelity parameter a={self.a} outside [0, 1]")


def _cos_terms(n: int) -> np.ndarray:
    # cos(2*pi*z / 2**k) for k = 1..n (rows) and z = 0..2**n-1 (columns)
    z = np.arange(2**n)
    k = np.arange(1, n + 1)[:, None]
    return np.cos(2 * np.pi * (z[None, :] % 2**k) / 2**k)


def error_distribution(n: int, a: float) -> np.ndarray:
    """``P(z) = 2**-n prod_{k=1}^{n} [1 + a cos(2 pi z / 2**k)]``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    probs = np.prod(1 + a * _cos_terms(n), axis=0) / 2**n
    return probs


def analytic_distribution(params: AnalyticParams) -> OutcomeDistribution:
    n, a = params.n, params.a
    total = sum(params.inputs)
    x = np.arange(2**n)
    probs = np.ones(2**n)
    for s in range(n):
        period = 2 ** (n - s)
        theta = 2 * np.pi * (total % period) / period
        probs *= 1 + a * np.cos(theta - 2 * np.pi * (x % period) / period)
    probs /= 2**n
    if abs(probs.sum() - 1) > 1e-10:
        raise ArithmeticError(f"analytic distribution sums to {probs.sum()!r}")
    return OutcomeDistribution.from_array(np.clip(probs, 0.0, 1.0))


def error_profile(dist: OutcomeDistribution, inputs: Sequence[int]) -> np.ndarray:
    """Re-index a distribution by the error ``z`` relative to the correct sum."""
    shift = correct_sum(inputs, dist.n)
    return np.roll(dist.array, -shift)


def p_correct(n: int, a: float) -> float:
    return ((1 + a) / 2) ** n


def predicted_a(
    noise: NoiseModel, ghz_size: int | None = None, rounds: int = 2
) -> float:
    """Fidelity parameter for uniform per-qubit link noise.

    ``a = (1 - p)**(rounds * ghz_size)``: each GHZ qubit that carries noise
    damps the server coherence by ``1 - p`` under either noise kind.
    """
    if noise.is_noiseless:
        return 1.0
    if ghz_size is None:
        raise ValueError("ghz_size (number of parties + 1) is required for noisy links")
    if ghz_size < 2:
        raise ValueError("GHZ links have at least 2 qubits")
    if rounds not in (1, 2):
        raise ValueError("rounds must be 1 or 2")
    return (1.0 - noise.p) ** (rounds * ghz_size)


@dataclass
class LemmaReport:
    name: str
    n: int
    a: float | None
    tol: float
    checks: int = 0
    worst: float = 0.0  # largest violation (positive means the inequality failed)
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, lhs: float, rhs: float, label: str, equality: bool = False):
        self.checks += 1
        gap = abs(lhs - rhs) if equality else rhs - lhs
        self.worst = max(self.worst, gap)
        if gap > self.tol:
            self.failures.append((label, lhs, rhs))

    def to_dict(self) -> dict:
        return {
            "lemma": self.name,
            "n": self.n,
            "a": self.a,
            "tol": self.tol,
            "checks": self.checks,
            "worst_violation": self.worst,
            "passed": self.passed,
            "failures": [list(f) for f in self.failures[:20]],
        }


def _resolve(n, a, error_probs, tol):
    if error_probs is None:
        return error_distribution(n, a), ANALYTIC_TOL if tol is None else tol
    probs = np.asarray(error_probs, dtype=float)
    if probs.size != 2**n:
        raise ValueError("error distribution length does not match n")
    return probs, SIMULATED_TOL if tol is None else tol


def _finish(report: LemmaReport, strict: bool) -> LemmaReport:
    if strict and not report.passed:
        raise LemmaViolation(f"{report.name} violated: {report.failures[:3]}")
    return report


def check_reflection_symmetry(
    n: int, a: float | None = None, *, error_probs=None, tol=None, strict=True
) -> LemmaReport:
    """``P(x+z) == P(x + 2**n - z)`` for every ``z <= 2**(n-1)``."""
    probs, tol = _resolve(n, a, error_probs, tol)
    report = LemmaReport("reflection_symmetry", n, a, tol)
    for z in range(1, 2 ** (n - 1) + 1):
        report.record(probs[z], probs[(2**n - z) % 2**n], f"z={z}", equality=True)
    return _finish(report, strict)


def check_power_of_two_dominance(
    n: int, a: float | None = None, *, error_probs=None, tol=None, strict=True
) -> LemmaReport:
    """``P(x + 2**k) >= P(x + z)`` for ``k in 1..n-1`` and ``z in 1..2**k``."""
    probs, tol = _resolve(n, a, error_probs, tol)
    report = LemmaReport("power_of_two_dominance", n, a, tol)
    for k in range(1, n):
        for z in range(1, 2**k + 1):
            report.record(probs[2**k], probs[z], f"k={k} z={z}")
    return _finish(report, strict)


def check_proximity_ordering(
    n: int, a: float | None = None, *, error_probs=None, tol=None, strict=True
) -> LemmaReport:
    """``P(x + z) >= P(x + 2**(k+1) - z)`` for ``k in 1..n-1`` and ``z in 1..2**k``."""
    probs, tol = _resolve(n, a, error_probs, tol)
    report = LemmaReport("proximity_ordering", n, a, tol)
    for k in range(1, n):
        for z in range(1, 2**k + 1):
            report.record(probs[z], probs[(2 ** (k + 1) - z) % 2**n], f"k={k} z={z}")
    return _finish(report, strict)


LEMMA_CHECKS = (
    check_reflection_symmetry,
    check_power_of_two_dominance,
    check_proximity_ordering,
)


def polar_coordinates(dist: OutcomeDistribution) -> list[tuple[float, float]]:
    """``(2*pi*x / 2**n, P(x))`` for every outcome ``x``."""
    size = 2**dist.n
    return [(2 * np.pi * x / size, float(dist.array[x])) for x in range(size)]
