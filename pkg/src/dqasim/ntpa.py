"""Trusted-party-free summation: DQA rounds over Shamir shares.

Party ``i`` hides ``X_i`` as ``g_i(0)`` of a random polynomial. In round
``r = 1..m`` party ``r`` acts as the server and every party feeds its share
``g_i(r)`` into one DQA run, so the server learns ``G(r) = sum_i g_i(r)``.
Any ``t`` of the values ``G(r) mod q`` interpolate ``G(0) = sum_i X_i mod q``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dqa import ENGINES, DqaConfig, OutcomeDistribution, fit_fidelity_param, run_exact
from .noise import NoiseModel
from .sss import PrimeField, eval_shares, gen_polynomial, lagrange_weights


def required_bits(m: int, q: int) -> int:
    """Smallest width at which ``m`` values below ``q`` add without wrapping."""
    if m < 1 or q < 2:
        raise ValueError("need m >= 1 and q >= 2")
    return (m * (q - 1)).bit_length()


@dataclass(frozen=True)
class NtpaConfig:
    inputs: tuple
    t: int
    q: int
    noise: NoiseModel = field(default_factory=NoiseModel)
    engine: str = "factorized"  # "sample" draws per-trial round outcomes
    shots: int = 9000
    seed: int = 0
    subset: tuple | None = None  # rounds (1-based) used for reconstruction

    def __post_init__(self):
        inputs = tuple(int(x) for x in self.inputs)
        q = PrimeField(self.q).q
        m = len(inputs)
        if m < 1:
            raise ValueError("at least one party is required")
        if q <= m:
            raise ValueError(f"q={q} must exceed the number of parties m={m}")
        if any(not 0 <= x < q for x in inputs):
            raise ValueError(f"inputs must lie in [0, q={q})")
        if not 1 <= int(self.t) <= m:
            raise ValueError(f"threshold t={self.t} must satisfy 1 <= t <= m={m}")
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.engine == "sample" and int(self.shots) < 1:
            raise ValueError("shots must be >= 1")
        subset = self.subset
        if subset is not None:
            subset = tuple(int(r) for r in subset)
            if len(subset) != int(self.t) or len(set(subset)) != len(subset):
                raise ValueError(f"subset must name {self.t} distinct rounds")
            if any(not 1 <= r <= m for r in subset):
                raise ValueError(f"subset rounds must lie in 1..{m}")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "t", int(self.t))
        object.__setattr__(self, "subset", subset)

    @property
    def m(self) -> int:
        return len(self.inputs)

    @property
    def n_round(self) -> int:
        return required_bits(self.m, self.q)

    @property
    def rounds_used(self) -> tuple:
        return self.subset if self.subset is not None else tuple(range(1, self.t + 1))

    @property
    def expected(self) -> int:
        return sum(self.inputs) % self.q


@dataclass(frozen=True)
class RoundResult:
    round: int
    server: int  # party acting as server, 1-based
    inputs: tuple  # the shares g_i(round) fed into DQA
    n_round: int
    distribution: OutcomeDistribution
    samples: np.ndarray | None = None  # per-trial G(round) in sample mode

    def residue_distribution(self, q: int) -> np.ndarray:
        """Distribution of ``G(round) mod q``."""
        out = np.zeros(q)
        np.add.at(out, np.arange(2**self.n_round) % q, self.distribution.array)
        return out


@dataclass(frozen=True)
class NtpaResult:
    config: NtpaConfig
    polynomials: tuple
    rounds: tuple
    distribution: np.ndarray  # over reconstructed values in Z_q
    samples: np.ndarray | None = None  # per-trial reconstructions in sample mode

    @property
    def value(self) -> int:
        return int(np.argmax(self.distribution))

    @property
    def success_probability(self) -> float:
        return float(self.distribution[self.config.expected])


def run_round(
    r: int,
    shares: Sequence[int],
    n_round: int,
    noise: NoiseModel,
    engine: str = "factorized",
    rng: np.random.Generator | None = None,
    shots: int = 0,
) -> RoundResult:
    """One DQA execution on the shares of round ``r``; party ``r`` is the server."""
    shares = tuple(int(v) for v in shares)
    if any(v < 0 for v in shares):
        raise ValueError("shares must be non-negative")
    exact_engine = "full" if engine == "full" else "factorized"
    dist = run_exact(DqaConfig(shares, n_round, noise, engine=exact_engine))
    samples = None
    if engine == "sample":
        if rng is None:
            raise ValueError("sample mode needs an rng")
        p = dist.array / dist.array.sum()
        samples = rng.choice(2**n_round, size=shots, p=p)
    return RoundResult(r, r, shares, n_round, dist, samples)


def combine_rounds(residues: Sequence[np.ndarray], weights: Sequence[int], q: int) -> np.ndarray:
    """Distribution of ``sum_r w_r v_r mod q`` for independent ``v_r ~ residues[r]``."""
    acc = np.zeros(q)
    acc[0] = 1.0
    for dist, w in zip(residues, weights):
        scaled = np.zeros(q)
        np.add.at(scaled, (w * np.arange(q)) % q, dist)
        nxt = np.zeros(q)
        for y in np.flatnonzero(scaled):
            nxt += scaled[y] * np.roll(acc, y)
        acc = nxt
    return acc


def combine_rounds_enumerated(
    residues: Sequence[np.ndarray], weights: Sequence[int], q: int
) -> np.ndarray:
    """Reference for :func:`combine_rounds` that walks every tuple of round outcomes."""
    out = np.zeros(q)
    supports = [np.flatnonzero(d) for d in residues]
    for combo in itertools.product(*supports):
        p = 1.0
        for d, v in zip(residues, combo):
            p *= d[v]
        out[sum(w * v for w, v in zip(weights, combo)) % q] += p
    return out


def run_ntpa(config: NtpaConfig) -> NtpaResult:
    m, q, n_round = config.m, config.q, config.n_round
    streams = np.random.SeedSequence(int(config.seed)).spawn(m + 1)
    poly_rng = np.random.default_rng(streams[0])
    polys = tuple(gen_polynomial(x, config.t, q, poly_rng) for x in config.inputs)
    points = list(range(1, m + 1))
    share_table = [[s.value for s in eval_shares(g, points)] for g in polys]

    rounds = []
    for r in points:
        shares = [row[r - 1] for row in share_table]
        rng = np.random.default_rng(streams[r])
        rounds.append(
            run_round(r, shares, n_round, config.noise, config.engine, rng, config.shots)
        )

    used = config.rounds_used
    weights = lagrange_weights(list(used), q)
    residues = [rounds[r - 1].residue_distribution(q) for r in used]
    dist = combine_rounds(residues, weights, q)

    samples = None
    if config.engine == "sample":
        acc = np.zeros(config.shots, dtype=np.int64)
        for r, w in zip(used, weights):
            acc = (acc + w * (rounds[r - 1].samples % q)) % q
        samples = acc
    return NtpaResult(config, polys, tuple(rounds), dist, samples)


def success_probability(config: NtpaConfig) -> float:
    """Exact probability that reconstruction returns ``sum(X_i) mod q``."""
    if config.engine == "sample":
        config = replace(config, engine="factorized")
    return run_ntpa(config).success_probability


def success_bound(config: NtpaConfig) -> float:
    """``((1+a)/2)**(n_round * t)``: every used round returns its exact sum."""
    a = fit_fidelity_param(DqaConfig((0,) * config.m, 1, config.noise))
    return ((1 + a) / 2) ** (config.n_round * config.t)

