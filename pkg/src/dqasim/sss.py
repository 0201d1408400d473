"""Threshold Shamir secret sharing over a prime field GF(q)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sympy import isprime

MAX_MODULUS = 2**61


class SharingError(ValueError):
    pass


@dataclass(frozen=True)
class PrimeField:
    q: int

    def __post_init__(self):
        q = int(self.q)
        if q < 2 or q >= MAX_MODULUS:
            raise SharingError(f"modulus {q} outside [2, 2**61)")
        if not isprime(q):
            raise SharingError(f"modulus {q} is not prime")
        object.__setattr__(self, "q", q)

    def inv(self, x: int) -> int:
        x %= self.q
        if x == 0:
            raise ZeroDivisionError("0 has no inverse")
        return pow(x, -1, self.q)


@dataclass(frozen=True)
class SecretPolynomial:
    """``g(x) = c_0 + c_1 x + ... + c_{t-1} x^{t-1}`` over GF(q), ``c_0`` the secret."""

    q: int
    coefficients: tuple

    @property
    def secret(self) -> int:
        return self.coefficients[0]

    @property
    def threshold(self) -> int:
        return len(self.coefficients)

    def __call__(self, x: int) -> int:
        acc = 0
        for c in reversed(self.coefficients):
            acc = (acc * x + c) % self.q
        return acc


@dataclass(frozen=True)
class Share:
    point: int
    value: int

    def __post_init__(self):
        if self.point == 0:
            raise SharingError("share point must be nonzero")


def gen_polynomial(secret: int, t: int, q: int, rng: np.random.Generator) -> SecretPolynomial:
    """Random degree ``t-1`` polynomial with ``g(0) = secret`` and nonzero higher coefficients."""
    field = PrimeField(q)
    if t < 1:
        raise SharingError("threshold t must be >= 1")
    if not 0 <= secret < field.q:
        raise SharingError(f"secret {secret} not in [0, {field.q})")
    coeffs = [int(c) for c in rng.integers(1, field.q, size=t - 1)]
    return SecretPolynomial(field.q, (int(secret), *coeffs))


def eval_shares(poly: SecretPolynomial, points: Sequence[int]) -> list[Share]:
    points = [int(x) for x in points]
    if len(set(points)) != len(points):
        raise SharingError(f"duplicate evaluation points in {points}")
    if any(not 0 < x < poly.q for x in points):
        raise SharingError(f"evaluation points must lie in [1, {poly.q})")
    return [Share(x, poly(x)) for x in points]


def lagrange_weights(points: Sequence[int], q: int) -> list[int]:
    """Weights ``w_r`` with ``g(0) = sum_r w_r g(x_r)`` for a polynomial of degree < len(points)."""
    field = PrimeField(q)
    weights = []
    for r, xr in enumerate(points):
        num, den = 1, 1
        for j, xj in enumerate(points):
            if j != r:
                num = num * xj % field.q
                den = den * (xj - xr) % field.q
        if den == 0:
            raise SharingError("evaluation points must be distinct modulo q")
        weights.append(num * field.inv(den) % field.q)
    return weights


def reconstruct(shares: Sequence[Share], q: int, t: int | None = None) -> int:
    """Interpolate at zero from the first ``t`` shares (all of them when ``t`` is None)."""
    shares = list(shares)
    if t is not None:
        if len(shares) < t:
            raise SharingError(f"need {t} shares, got {len(shares)}")
        shares = shares[:t]
    if not shares:
        raise SharingError("no shares given")
    points = [s.point % q for s in shares]
    if len(set(points)) != len(points):
        raise SharingError("duplicate share points")
    weights = lagrange_weights(points, q)
    return sum(w * s.value for w, s in zip(weights, shares)) % q
