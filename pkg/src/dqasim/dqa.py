"""The distributed QFT adder: engines that produce the server's output distribution.

Three engines share one circuit description:

* ``factorized`` simulates each server qubit (column) on its own register of
  the server qubit plus one copy qubit per party, then tensors the columns
  and applies the inverse QFT. This is the default exact engine.
* ``full`` carries every server and copy qubit in one density matrix and is
  only meant as an oracle for the factorized engine.
* ``sample`` draws shots, either from the factorized distribution or by
  sampling noise branches and measurement outcomes per shot.

Party inputs are classical integers: a party's data stays in a basis state,
so its controlled phase block is a plain phase on its copy qubit.

Column ``s`` carries the phase ``2*pi*T / 2**(n-s)`` and lives at server
qubit index ``n-1-s`` (qubit 0 is the most significant output bit).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .ghzlink import (
    SessionTranscript,
    apply_superoperator,
    disentangle_fanout,
    entangle_fanout,
    fanout_superoperator,
    generate_noisy_ghz,
    sample_noisy_ghz,
)
from .noise import NoiseModel
from .qkernel import (
    H,
    DensityMatrix,
    ProbabilityDistribution,
    apply_diagonal,
    apply_unitary,
    controlled_phase,
    measurement_distribution,
    partial_trace,
    phase_gate,
    qft_unitary,
    tensor,
)

ENGINES = ("factorized", "full", "sample")
DEFAULT_MAX_QUBITS = 12
COLUMN_MAX_QUBITS = 12
AGREEMENT_TOL = 1e-9


class CapacityError(ValueError):
    """Requested register does not fit the engine's size guard."""


class FactorizationError(RuntimeError):
    """Server columns disagree on the fidelity parameter."""


def max_qubits() -> int:
    return int(os.environ.get("DQA_MAX_QUBITS", DEFAULT_MAX_QUBITS))


@dataclass(frozen=True)
class DqaConfig:
    inputs: tuple
    n: int
    noise: NoiseModel = field(default_factory=NoiseModel)
    engine: str = "factorized"
    shots: int = 9000
    seed: int = 0
    noisy_rounds: int = 2  # 1 keeps the uncompute fan-out noiseless
    trajectory: bool = False

    def __post_init__(self):
        inputs = tuple(int(t) for t in self.inputs)
        if not inputs:
            raise ValueError("at least one party input is required")
        if any(t < 0 for t in inputs):
            raise ValueError("party inputs must be non-negative")
        if int(self.n) < 1:
            raise ValueError("bit width n must be >= 1")
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.engine == "sample" and int(self.shots) < 1:
            raise ValueError("shots must be >= 1")
        if self.noisy_rounds not in (1, 2):
            raise ValueError("noisy_rounds must be 1 or 2")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "n", int(self.n))

    @property
    def m(self) -> int:
        return len(self.inputs)


@dataclass(frozen=True)
class OutcomeDistribution:
    n: int
    probs: ProbabilityDistribution

    @classmethod
    def from_array(cls, probs) -> "OutcomeDistribution":
        pd = ProbabilityDistribution(probs)
        return cls(pd.n, pd)

    def __getitem__(self, x: int) -> float:
        return self.probs[x]

    @property
    def array(self) -> np.ndarray:
        return self.probs.probs

    def mode(self) -> int:
        return int(np.argmax(self.array))


@dataclass(frozen=True)
class Histogram:
    n: int
    counts: np.ndarray
    shots: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.size != 2**self.n:
            raise ValueError("histogram needs one count per outcome")
        if counts.sum() != self.shots:
            raise ValueError("counts do not sum to the number of shots")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.shots


def auto_bits(inputs: Sequence[int]) -> int:
    return max(1, int(sum(inputs)).bit_length())


def correct_sum(inputs: Sequence[int], n: int) -> int:
    return int(sum(inputs)) % (2**n)


def party_phase_angle(t: int, s: int, n: int) -> float:
    if not 0 <= s < n:
        raise ValueError(f"column s={s} out of range for n={n}")
    # reduce the integer first so large inputs keep full precision
    period = 2 ** (n - s)
    return 2 * math.pi * (int(t) % period) / period


def _noise_for_round(config: DqaConfig, round_index: int) -> NoiseModel:
    if round_index == 1 and config.noisy_rounds == 1:
        return NoiseModel()
    return config.noise


def _check_column_size(config: DqaConfig):
    peak = 2 * (config.m + 1)
    if peak > COLUMN_MAX_QUBITS:
        raise CapacityError(
            f"{config.m} parties need a {peak}-qubit column register "
            f"(server, copies and GHZ ancillas); limit is {COLUMN_MAX_QUBITS}"
        )


@lru_cache(maxsize=16)
def _copied_plus(m: int, noise: NoiseModel) -> tuple[DensityMatrix, SessionTranscript]:
    # |+> on the server fanned out to m fresh copies; identical for every column and input
    reg = apply_unitary(DensityMatrix.zero(m + 1), H, [0])
    ghz = generate_noisy_ghz(m + 1, noise)
    return entangle_fanout(reg, 0, ghz, list(range(1, m + 1)))


def _column(
    config: DqaConfig, s: int, rng: np.random.Generator | None = None
) -> tuple[DensityMatrix, SessionTranscript]:
    """Server state of column ``s`` right before the inverse QFT."""
    m = config.m
    parties = list(range(1, m + 1))
    if rng is None:
        reg, transcript = _copied_plus(m, _noise_for_round(config, 0))
        transcript = replace(transcript, messages=[], corrections=[])
        ghz2 = generate_noisy_ghz(m + 1, _noise_for_round(config, 1))
    else:
        reg = apply_unitary(DensityMatrix.zero(m + 1), H, [0])
        ghz1 = sample_noisy_ghz(m + 1, _noise_for_round(config, 0), rng)
        ghz2 = sample_noisy_ghz(m + 1, _noise_for_round(config, 1), rng)
        reg, transcript = entangle_fanout(reg, 0, ghz1, parties, rng)
    for q, t in zip(parties, config.inputs):
        reg = apply_unitary(reg, phase_gate(party_phase_angle(t, s, config.n)), [q])
    reg, second = disentangle_fanout(reg, 0, parties, ghz2, rng)
    transcript.extend(second)
    return partial_trace(reg, [0]), transcript


def server_qubit_reduced_state(config: DqaConfig, s: int) -> DensityMatrix:
    if not 0 <= s < config.n:
        raise ValueError(f"column s={s} out of range for n={config.n}")
    _check_column_size(config)
    return _column(config, s)[0]


def _finish(columns: list, n: int) -> OutcomeDistribution:
    # columns[s] belongs at qubit n-1-s, so tensor from s = n-1 down to 0
    rho = columns[n - 1]
    for s in range(n - 2, -1, -1):
        rho = tensor(rho, columns[s])
    rho = apply_unitary(rho, qft_unitary(n, inverse=True), list(range(n)))
    return OutcomeDistribution(n, measurement_distribution(rho))


def run_exact_factorized(config: DqaConfig) -> OutcomeDistribution:
    _check_column_size(config)
    return _finish([_column(config, s)[0] for s in range(config.n)], config.n)


def _full_register_size(config: DqaConfig, explicit_data: bool) -> int:
    per_column = 2 * config.m + 1 if explicit_data else config.m + 1
    return config.n * per_column


def run_exact_full(config: DqaConfig, explicit_data: bool = False) -> OutcomeDistribution:
    """Brute-force oracle: one density matrix over all server and copy qubits.

    Layout: server qubits ``0..n-1``, then party ``i``'s ``n`` copy qubits, then
    (with ``explicit_data``) party ``i``'s ``n``-qubit data register holding
    its input in binary, whose bits drive controlled phases on the copies.
    """
    n, m = config.n, config.m
    size = _full_register_size(config, explicit_data)
    if size > max_qubits():
        raise CapacityError(f"full register needs {size} qubits; limit is {max_qubits()}")

    def copy_qubit(i: int, s: int) -> int:
        return n + i * n + (n - 1 - s)

    def data_qubit(i: int, j: int) -> int:
        return n + m * n + i * n + j

    # QFT of |0...0> on the server qubits is |+>^n; data registers hold the inputs
    plus = apply_unitary(DensityMatrix.zero(1), H, [0])
    rho = plus
    for _ in range(n - 1):
        rho = tensor(rho, plus)
    bits = "0" * (m * n)
    if explicit_data:
        bits += "".join(format(t % 2**n, f"0{n}b") for t in config.inputs)
    rho = tensor(rho, DensityMatrix.basis(bits))

    def fanouts(round_index: int, rho: DensityMatrix) -> DensityMatrix:
        superop = fanout_superoperator(m, _noise_for_round(config, round_index))
        for s in range(n):
            targets = [n - 1 - s] + [copy_qubit(i, s) for i in range(m)]
            rho = apply_superoperator(rho, superop, targets)
        return rho

    rho = fanouts(0, rho)
    if explicit_data:
        for i in range(m):
            for s in range(n):
                # data bit j has weight 2**(n-1-j); it adds pi / 2**(j-s) to column s
                for j in range(s, n):
                    rho = apply_unitary(
                        rho,
                        controlled_phase(math.pi / 2 ** (j - s)),
                        [data_qubit(i, j), copy_qubit(i, s)],
                    )
    else:
        # all party phase gates commute; apply them as one diagonal layer
        idx = np.arange(2**size)
        layer = np.ones(2**size, dtype=complex)
        for i, t in enumerate(config.inputs):
            for s in range(n):
                bit = (idx >> (size - 1 - copy_qubit(i, s))) & 1
                layer *= np.where(bit == 1, np.exp(1j * party_phase_angle(t, s, n)), 1)
        rho = apply_diagonal(rho, layer)
    rho = fanouts(1, rho)
    rho = partial_trace(rho, list(range(n)))
    rho = apply_unitary(rho, qft_unitary(n, inverse=True), list(range(n)))
    return OutcomeDistribution(n, measurement_distribution(rho))


def run_exact(config: DqaConfig) -> OutcomeDistribution:
    if config.engine == "full":
        return run_exact_full(config)
    return run_exact_factorized(config)


def shot_rng(seed: int, shot: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(shot)]))


def sample_trajectory(config: DqaConfig, shot: int) -> tuple[int, list]:
    """One shot with sampled noise branches and measurement messages."""
    rng = shot_rng(config.seed, shot)
    columns, transcripts = [], []
    for s in range(config.n):
        col, transcript = _column(config, s, rng)
        columns.append(col)
        transcripts.append(transcript)
    dist = _finish(columns, config.n)
    outcome = int(rng.choice(2**config.n, p=dist.array))
    return outcome, transcripts


def sample(config: DqaConfig, dist: OutcomeDistribution | None = None) -> Histogram:
    """Draw ``config.shots`` outcomes.

    The default path samples the exact factorized distribution (or ``dist``
    if given); ``config.trajectory`` switches to per-shot noise and
    measurement sampling.
    """
    n = config.n
    if config.trajectory:
        _check_column_size(config)
        counts = np.zeros(2**n, dtype=np.int64)
        for shot in range(config.shots):
            counts[sample_trajectory(config, shot)[0]] += 1
        return Histogram(n, counts, config.shots)
    if dist is None:
        dist = run_exact(replace(config, engine="factorized"))
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed)]))
    p = dist.array / dist.array.sum()
    counts = rng.multinomial(config.shots, p)
    return Histogram(n, counts, config.shots)


def fit_fidelity_param(config: DqaConfig, tol: float = AGREEMENT_TOL) -> float:
    """``a = 2 |rho_01|`` of the server columns, which must all agree."""
    values = [
        2 * abs(server_qubit_reduced_state(config, s).data[0, 1]) for s in range(config.n)
    ]
    if max(values) - min(values) > tol:
        raise FactorizationError(f"columns disagree on the fidelity parameter: {values}")
    return float(np.mean(values))


def calibrate_exponent(
    num_parties: int, kind: str, p_grid: Sequence[float] = (0.05, 0.1, 0.14, 0.25, 0.5)
) -> float:
    """Least-squares slope of ``log a`` against ``log(1 - p)`` from simulated columns."""
    xs, ys = [], []
    for p in p_grid:
        cfg = DqaConfig(inputs=(1,) * num_parties, n=1, noise=NoiseModel(kind, p))
        xs.append(math.log(1 - p))
        ys.append(math.log(fit_fidelity_param(cfg)))
    xs, ys = np.array(xs), np.array(ys)
    return float(xs @ ys / (xs @ xs))
