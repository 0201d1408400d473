"""Noisy GHZ links and the non-local CNOT fan-out built on them.

One fan-out copies the computational value of a server qubit onto ``m``
party qubits using one ``GHZ_{m+1}`` resource:

1. server: CNOT(server -> g0), measure g0, broadcast the bit ``b``
2. every party ``i``: X^b on its GHZ qubit g_i, CNOT(g_i -> target_i)
3. every party ``i``: H on g_i, measure it, send the bit ``c_i`` back
4. server: Z^{c_i} on the server qubit for each received bit

Applied to fresh targets this creates the copies; applied a second time
(with a fresh GHZ) it uncomputes them. Two execution forms exist: the
channel form replaces measurement + classical feedback by controlled gates
and traces the spent ancilla out (exact, deterministic); the trajectory form
samples every measurement and records the classical messages.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import sparse

from .noise import NoiseModel, apply_link_noise
from .qkernel import (
    CNOT,
    CZ,
    H,
    X,
    Z,
    DensityMatrix,
    KernelError,
    apply_operator,
    apply_unitary,
    ghz_state,
    partial_trace,
    project_measure,
    tensor,
)

SERVER = 0
ENTANGLE = "entangle"
DISENTANGLE = "disentangle"


@dataclass(frozen=True)
class GhzResource:
    size: int
    state: DensityMatrix
    noise: NoiseModel


@dataclass(frozen=True)
class ClassicalMessage:
    sender: int  # 0 is the server, parties are numbered from 1
    round: str
    bit: int

    def __post_init__(self):
        if self.bit not in (0, 1):
            raise ValueError(f"message bit must be 0 or 1, got {self.bit!r}")
        if self.round not in (ENTANGLE, DISENTANGLE):
            raise ValueError(f"unknown round {self.round!r}")


@dataclass(frozen=True)
class Correction:
    message: int  # index into SessionTranscript.messages
    gate: str
    targets: tuple
    applied: bool


@dataclass
class SessionTranscript:
    messages: list = field(default_factory=list)
    corrections: list = field(default_factory=list)
    deferred: bool = False  # channel form: corrections are coherent, no messages

    def extend(self, other: "SessionTranscript") -> "SessionTranscript":
        offset = len(self.messages)
        self.messages.extend(other.messages)
        self.corrections.extend(
            Correction(c.message + offset, c.gate, c.targets, c.applied)
            for c in other.corrections
        )
        self.deferred = self.deferred or other.deferred
        return self

    def to_json(self) -> str:
        return json.dumps(
            {
                "deferred": self.deferred,
                "messages": [asdict(m) for m in self.messages],
                "corrections": [
                    {**asdict(c), "targets": list(c.targets)} for c in self.corrections
                ],
            }
        )


def generate_noisy_ghz(size: int, model: NoiseModel) -> GhzResource:
    if size < 2:
        raise KernelError(f"GHZ resource needs at least 2 qubits, got {size}")
    state = apply_link_noise(ghz_state(size), range(size), model)
    return GhzResource(size, state, model)


def sample_noisy_ghz(size: int, model: NoiseModel, rng: np.random.Generator) -> GhzResource:
    """One noise trajectory: a Kraus branch is drawn per qubit instead of averaging."""
    if size < 2:
        raise KernelError(f"GHZ resource needs at least 2 qubits, got {size}")
    rho = ghz_state(size)
    if not model.is_noiseless:
        ops = model.channel().operators
        for q in range(size):
            branches = [apply_operator(rho, k, [q]) for k in ops]
            weights = np.array([np.real(np.trace(b)) for b in branches])
            pick = rng.choice(len(ops), p=weights / weights.sum())
            rho = DensityMatrix._wrap(branches[pick] / weights[pick])
    return GhzResource(size, rho, model)


def _check_layout(register: DensityMatrix, server: int, ghz: GhzResource, parties: Sequence[int]):
    parties = tuple(int(q) for q in parties)
    if ghz.size != len(parties) + 1:
        raise KernelError(
            f"GHZ size {ghz.size} does not match {len(parties)} party qubit(s) + server"
        )
    every = (server,) + parties
    if len(set(every)) != len(every):
        raise KernelError("server and party qubits must be distinct")
    if any(q < 0 or q >= register.num_qubits for q in every):
        raise KernelError("server or party qubit out of range")
    return parties


def _fanout(
    register: DensityMatrix,
    server: int,
    ghz: GhzResource,
    parties: tuple,
    rng: np.random.Generator | None,
) -> tuple[DensityMatrix, SessionTranscript]:
    base = register.num_qubits
    rho = tensor(register, ghz.state)
    transcript = SessionTranscript(deferred=rng is None)
    g0 = base
    rho = apply_unitary(rho, CNOT, [server, g0])
    spare = [g0 + 1 + i for i in range(len(parties))]
    if rng is None:
        for g in spare:
            rho = apply_unitary(rho, CNOT, [g0, g])
    else:
        b, rho = project_measure(rho, g0, rng)
        transcript.messages.append(ClassicalMessage(SERVER, ENTANGLE, b))
        if b:
            for g in spare:
                rho = apply_unitary(rho, X, [g])
        transcript.corrections.append(Correction(0, "X", tuple(spare), bool(b)))
    rho = partial_trace(rho, [q for q in range(rho.num_qubits) if q != g0])

    # after each trace the next party's GHZ qubit sits at index ``base``
    for i, target in enumerate(parties, start=1):
        g = base
        rho = apply_unitary(rho, CNOT, [g, target])
        rho = apply_unitary(rho, H, [g])
        if rng is None:
            rho = apply_unitary(rho, CZ, [g, server])
        else:
            c, rho = project_measure(rho, g, rng)
            transcript.messages.append(ClassicalMessage(i, DISENTANGLE, c))
            if c:
                rho = apply_unitary(rho, Z, [server])
            transcript.corrections.append(
                Correction(len(transcript.messages) - 1, "Z", (server,), bool(c))
            )
        rho = partial_trace(rho, [q for q in range(rho.num_qubits) if q != g])
    return rho, transcript


def entangle_fanout(
    register: DensityMatrix,
    server_qubit: int,
    ghz: GhzResource,
    party_qubits: Sequence[int],
    rng: np.random.Generator | None = None,
) -> tuple[DensityMatrix, SessionTranscript]:
    """Copy the server qubit's computational value onto fresh ``|0>`` party qubits.

    With ``rng=None`` the channel form is used; otherwise measurements are
    sampled from ``rng`` and the transcript lists the exchanged bits.
    """
    parties = _check_layout(register, server_qubit, ghz, party_qubits)
    marginal = partial_trace(register, parties).data
    if abs(marginal[0, 0] - 1) > 1e-10:
        raise KernelError("party qubits must start in |0...0>")
    return _fanout(register, server_qubit, ghz, parties, rng)


def disentangle_fanout(
    register: DensityMatrix,
    server_qubit: int,
    party_qubits: Sequence[int],
    ghz: GhzResource,
    rng: np.random.Generator | None = None,
) -> tuple[DensityMatrix, SessionTranscript]:
    """Second fan-out with a fresh GHZ; uncomputes the party copies back to ``|0>``."""
    parties = _check_layout(register, server_qubit, ghz, party_qubits)
    return _fanout(register, server_qubit, ghz, parties, rng)


@lru_cache(maxsize=32)
def fanout_superoperator(num_parties: int, model: NoiseModel) -> sparse.csr_matrix:
    """Superoperator of one noisy fan-out on ``[server, party_1 .. party_m]``.

    Acts on row-major ``vec(rho)``. Built by running the channel-form gadget on
    density matrices that span operator space, so the ancillas are simulated
    explicitly once per (m, model) and never enter a larger register.
    """
    m = num_parties
    dim = 2 ** (m + 1)
    ghz = generate_noisy_ghz(m + 1, model)
    parties = tuple(range(1, m + 1))

    def run(psi: np.ndarray) -> np.ndarray:
        rho, _ = _fanout(DensityMatrix.from_statevector(psi), 0, ghz, parties, None)
        return rho.data

    eye = np.eye(dim, dtype=complex)
    diag = [run(eye[a]) for a in range(dim)]
    cols = np.zeros((dim * dim, dim * dim), dtype=complex)
    for a in range(dim):
        cols[:, a * dim + a] = diag[a].reshape(-1)
        for b in range(a + 1, dim):
            plus = run(eye[a] + eye[b])
            iplus = run(eye[a] + 1j * eye[b])
            mixed = diag[a] + diag[b]
            ab = plus + 1j * iplus - (1 + 1j) / 2 * mixed
            ba = plus - 1j * iplus - (1 - 1j) / 2 * mixed
            cols[:, a * dim + b] = ab.reshape(-1)
            cols[:, b * dim + a] = ba.reshape(-1)
    cols[np.abs(cols) < 1e-15] = 0
    return sparse.csr_matrix(cols)


def apply_superoperator(
    rho: DensityMatrix, superop: sparse.spmatrix, targets: Sequence[int]
) -> DensityMatrix:
    """Apply a ``k``-qubit superoperator (row-major vec convention) to ``targets``."""
    n = rho.num_qubits
    targets = list(targets)
    k = len(targets)
    if superop.shape != (4**k, 4**k):
        raise KernelError("superoperator dimension does not match targets")
    rest = [q for q in range(n) if q not in targets]
    axes = targets + [n + q for q in targets] + rest + [n + q for q in rest]
    t = np.transpose(rho.data.reshape((2,) * (2 * n)), axes)
    shape = t.shape
    t = superop @ t.reshape(4**k, -1)
    t = np.transpose(t.reshape(shape), np.argsort(axes))
    return DensityMatrix._wrap(np.ascontiguousarray(t.reshape(2**n, 2**n)))
