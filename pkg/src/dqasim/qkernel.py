"""Dense density-matrix kernel for small qubit registers.

Qubit ordering is global: qubit 0 is the most significant bit of the
computational-basis index, so ``|q0 q1 ... q_{N-1}>`` maps to the integer
``q0 * 2**(N-1) + ... + q_{N-1}``. Every function here is functional: inputs
are never mutated and outputs are fresh read-only arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

TRACE_TOL = 1e-10
HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-12
PSD_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


class KernelError(ValueError):
    """Invalid register, operator or target specification."""


def _frozen(a: np.ndarray) -> np.ndarray:
    if isinstance(a, np.ndarray) and a.dtype == complex and not a.flags.writeable:
        return a
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


def _num_qubits_for_dim(dim: int) -> int:
    if dim < 2 or dim & (dim - 1):
        raise KernelError(f"dimension {dim} is not a power of two >= 2")
    return dim.bit_length() - 1


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state of ``num_qubits`` qubits as a dense ``2**n x 2**n`` matrix."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise KernelError(f"density matrix must be square, got {data.shape}")
        _num_qubits_for_dim(data.shape[0])
        if not np.all(np.isfinite(data)):
            raise KernelError("density matrix has non-finite entries")
        object.__setattr__(self, "data", _frozen(data))

    @classmethod
    def _wrap(cls, data: np.ndarray) -> "DensityMatrix":
        # kernel-owned fresh array: freeze in place instead of copying
        if data.dtype != complex:
            data = data.astype(complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise KernelError(f"density matrix must be square, got {data.shape}")
        if not np.isfinite(data.sum()):
            raise KernelError("density matrix has non-finite entries")
        data.flags.writeable = False
        obj = object.__new__(cls)
        object.__setattr__(obj, "data", data)
        return obj

    @property
    def num_qubits(self) -> int:
        return self.data.shape[0].bit_length() - 1

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def check(self, psd: bool = False, tol: float = TRACE_TOL) -> "DensityMatrix":
        """Validate Hermiticity and unit trace; PSD only when asked (it costs an eigensolve)."""
        herm = np.max(np.abs(self.data - self.data.conj().T))
        if herm > HERMITIAN_TOL:
            raise KernelError(f"not Hermitian (max deviation {herm:.3e})")
        tr = self.trace()
        if abs(tr - 1) > tol:
            raise KernelError(f"trace {tr} deviates from 1")
        if psd:
            lo = np.linalg.eigvalsh(self.data).min()
            if lo < -PSD_TOL:
                raise KernelError(f"not positive semidefinite (min eigenvalue {lo:.3e})")
        return self

    @classmethod
    def from_statevector(cls, psi: Sequence[complex]) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise KernelError("zero state vector")
        psi = psi / norm
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, bits: str | Sequence[int]) -> "DensityMatrix":
        """``basis("101")`` is ``|101><101|``."""
        bits = [int(b) for b in bits]
        if not bits or any(b not in (0, 1) for b in bits):
            raise KernelError(f"invalid bit string {bits!r}")
        index = int("".join(map(str, bits)), 2)
        data = np.zeros((2 ** len(bits),) * 2, dtype=complex)
        data[index, index] = 1
        return cls(data)

    @classmethod
    def zero(cls, num_qubits: int) -> "DensityMatrix":
        if num_qubits < 1:
            raise KernelError("register needs at least one qubit")
        return cls.basis([0] * num_qubits)

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> "DensityMatrix":
        if num_qubits < 1:
            raise KernelError("register needs at least one qubit")
        d = 2**num_qubits
        return cls(np.eye(d, dtype=complex) / d)


@dataclass(frozen=True)
class KrausChannel:
    """CPTP map given by Kraus operators; completeness is checked on construction."""

    operators: tuple

    def __post_init__(self):
        ops = tuple(_frozen(k) for k in self.operators)
        if not ops:
            raise KernelError("channel needs at least one Kraus operator")
        shape = ops[0].shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise KernelError(f"Kraus operators must be square, got {shape}")
        _num_qubits_for_dim(shape[0])
        if any(k.shape != shape for k in ops):
            raise KernelError("Kraus operators have mismatched dimensions")
        total = sum(k.conj().T @ k for k in ops)
        dev = np.max(np.abs(total - np.eye(shape[0])))
        if dev > UNITARY_TOL:
            raise KernelError(f"Kraus operators are not complete (deviation {dev:.3e})")
        object.__setattr__(self, "operators", ops)

    @property
    def num_qubits(self) -> int:
        return self.operators[0].shape[0].bit_length() - 1


@dataclass(frozen=True)
class ProbabilityDistribution:
    """Probabilities over computational-basis integers ``0 .. 2**n - 1``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1:
            raise KernelError("probabilities must be a vector")
        _num_qubits_for_dim(p.size)
        if np.any(p < 0) or np.any(p > 1):
            raise KernelError("probabilities outside [0, 1]")
        if abs(p.sum() - 1) > TRACE_TOL:
            raise KernelError(f"probabilities sum to {p.sum()!r}")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return self.probs.size.bit_length() - 1

    def __getitem__(self, x: int) -> float:
        return float(self.probs[x])

    def __len__(self) -> int:
        return self.probs.size


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))) <= tol)


def _check_targets(num_qubits: int, targets: Sequence[int], op_dim: int) -> tuple:
    targets = tuple(int(t) for t in targets)
    if len(set(targets)) != len(targets):
        raise KernelError(f"duplicate target in {targets}")
    if any(t < 0 or t >= num_qubits for t in targets):
        raise KernelError(f"targets {targets} out of range for {num_qubits} qubits")
    if op_dim != 2 ** len(targets):
        raise KernelError(
            f"operator dimension {op_dim} does not match {len(targets)} target(s)"
        )
    return targets


def _monomial(op: np.ndarray):
    """Return (perm, coeffs) with ``op|j> = coeffs[j] |perm[j]>`` or None."""
    nz = op != 0
    if not (np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1)):
        return None
    perm = np.argmax(nz, axis=0)
    coeffs = op[perm, np.arange(op.shape[1])]
    return perm, coeffs


def _sub_indices(num_qubits: int, targets: tuple):
    idx = np.arange(2**num_qubits)
    k = len(targets)
    sub = np.zeros_like(idx)
    mask = 0
    for j, t in enumerate(targets):
        shift = num_qubits - 1 - t
        sub |= ((idx >> shift) & 1) << (k - 1 - j)
        mask |= 1 << shift
    return idx, sub, mask


def _scatter_bits(num_qubits: int, targets: tuple, sub: np.ndarray) -> np.ndarray:
    k = len(targets)
    out = np.zeros_like(sub)
    for j, t in enumerate(targets):
        out |= ((sub >> (k - 1 - j)) & 1) << (num_qubits - 1 - t)
    return out


def _full_diagonal(num_qubits: int, targets: tuple, diag: np.ndarray) -> np.ndarray:
    _, sub, _ = _sub_indices(num_qubits, targets)
    return diag[sub]


def _contiguous(targets: tuple) -> bool:
    return all(b == a + 1 for a, b in zip(targets, targets[1:]))


def _sandwich(data: np.ndarray, num_qubits: int, op: np.ndarray, targets: tuple) -> np.ndarray:
    """Compute ``op_full @ data @ op_full^dagger`` for ``op`` acting on ``targets``."""
    n = num_qubits
    k = len(targets)
    if not np.any(op - np.diag(np.diag(op))):
        d = _full_diagonal(n, targets, np.diag(op))
        return data * d[:, None] * d.conj()[None, :]
    mono = _monomial(op)
    if mono is not None:
        perm, coeffs = mono
        idx, sub, mask = _sub_indices(n, targets)
        dest = (idx & ~mask) | _scatter_bits(n, targets, perm[sub])
        src = np.empty_like(dest)
        src[dest] = idx
        c = coeffs[sub]
        scaled = data * c[:, None] * c.conj()[None, :]
        return scaled.take(src, axis=0).take(src, axis=1)
    if _contiguous(targets):
        lo, dk = 2 ** targets[0], 2**k
        hi = 2 ** (n - targets[-1] - 1)
        t = data.reshape(lo, dk, hi * 2**n)
        t = np.matmul(op, t)
        t = t.reshape(2**n * lo, dk, hi)
        t = np.matmul(op.conj(), t)
        return t.reshape(2**n, 2**n)
    t = data.reshape((2,) * (2 * n))
    op_t = op.reshape((2,) * (2 * k))
    # left: contract op's input axes with the row axes of the targets
    t = np.tensordot(op_t, t, axes=(list(range(k, 2 * k)), list(targets)))
    rest_rows = [q for q in range(n) if q not in targets]
    order = list(targets) + rest_rows
    t = np.transpose(t, np.argsort(order).tolist() + list(range(n, 2 * n)))
    # right: contract conj(op)'s input axes with the column axes of the targets
    t = np.tensordot(t, op_t.conj(), axes=([n + q for q in targets], list(range(k, 2 * k))))
    rest_cols = [n + q for q in range(n) if q not in targets]
    cur = list(range(n)) + rest_cols + [n + q for q in targets]
    t = np.transpose(t, np.argsort(cur).tolist())
    return t.reshape(2**n, 2**n)


def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    """Kronecker product; ``a``'s qubits come first (most significant)."""
    return DensityMatrix._wrap(np.kron(a.data, b.data))


def apply_unitary(rho: DensityMatrix, u: np.ndarray, targets: Sequence[int]) -> DensityMatrix:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise KernelError(f"unitary must be square, got {u.shape}")
    targets = _check_targets(rho.num_qubits, targets, u.shape[0])
    if not is_unitary(u):
        raise KernelError("operator is not unitary")
    return DensityMatrix._wrap(_sandwich(rho.data, rho.num_qubits, u, targets))


def apply_diagonal(rho: DensityMatrix, phases: np.ndarray) -> DensityMatrix:
    """Apply a full-register diagonal unitary given by its diagonal."""
    d = np.asarray(phases, dtype=complex)
    if d.shape != (rho.dim,):
        raise KernelError("diagonal length does not match the register")
    if np.max(np.abs(np.abs(d) - 1)) > UNITARY_TOL:
        raise KernelError("diagonal entries must have unit modulus")
    return DensityMatrix._wrap(rho.data * d[:, None] * d.conj()[None, :])


def apply_kraus(rho: DensityMatrix, ch: KrausChannel, targets: Sequence[int]) -> DensityMatrix:
    targets = _check_targets(rho.num_qubits, targets, ch.operators[0].shape[0])
    out = sum(_sandwich(rho.data, rho.num_qubits, k, targets) for k in ch.operators)
    return DensityMatrix._wrap(out)


def apply_operator(rho: DensityMatrix, op: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Unnormalised ``K rho K^dagger`` as a raw array (one Kraus branch)."""
    op = np.asarray(op, dtype=complex)
    targets = _check_targets(rho.num_qubits, targets, op.shape[0])
    return _sandwich(rho.data, rho.num_qubits, op, targets)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on ``keep``; kept qubits stay in their original relative order."""
    n = rho.num_qubits
    keep = sorted(int(q) for q in keep)
    if not keep:
        raise KernelError("partial trace must keep at least one qubit")
    if len(set(keep)) != len(keep) or keep[0] < 0 or keep[-1] >= n:
        raise KernelError(f"invalid keep set {keep} for {n} qubits")
    if len(keep) == n:
        return rho
    drop = [q for q in range(n) if q not in keep]
    dk, dd = 2 ** len(keep), 2 ** len(drop)
    t = rho.data.reshape((2,) * (2 * n))
    t = np.transpose(t, keep + drop + [n + q for q in keep] + [n + q for q in drop])
    t = t.reshape(dk, dd, dk, dd)
    return DensityMatrix._wrap(np.trace(t, axis1=1, axis2=3))


def qft_unitary(n: int, inverse: bool = False) -> np.ndarray:
    """``QFT|j> = 2**(-n/2) sum_k exp(2 pi i jk / 2**n) |k>`` with qubit 0 as MSB."""
    if n < 1:
        raise KernelError("QFT needs n >= 1")
    dim = 2**n
    jk = np.outer(np.arange(dim), np.arange(dim)) % dim
    f = np.exp(2j * np.pi * jk / dim) / np.sqrt(dim)
    return f.conj().T if inverse else f


def controlled_phase(angle: float) -> np.ndarray:
    return np.diag([1, 1, 1, np.exp(1j * angle)]).astype(complex)


def phase_gate(angle: float) -> np.ndarray:
    return np.diag([1, np.exp(1j * angle)]).astype(complex)


def measurement_distribution(rho: DensityMatrix) -> ProbabilityDistribution:
    diag = np.real(np.diag(rho.data)).copy()
    if diag.min() < -TRACE_TOL:
        raise KernelError(f"negative population {diag.min():.3e}")
    diag = np.clip(diag, 0.0, 1.0)
    total = diag.sum()
    if abs(total - 1) > TRACE_TOL:
        raise KernelError(f"populations sum to {total!r}")
    return ProbabilityDistribution(diag / total)


def project(rho: DensityMatrix, qubit: int, bit: int) -> tuple[float, DensityMatrix | None]:
    """Probability of reading ``bit`` on ``qubit`` and the normalised post-measurement state."""
    proj = np.diag([1.0, 0.0] if bit == 0 else [0.0, 1.0]).astype(complex)
    branch = apply_operator(rho, proj, [qubit])
    prob = float(np.real(np.trace(branch)))
    if prob <= 0:
        return 0.0, None
    return prob, DensityMatrix._wrap(branch / prob)


def project_measure(
    rho: DensityMatrix, qubit: int, rng: np.random.Generator
) -> tuple[int, DensityMatrix]:
    """Sample a computational-basis measurement of one qubit.

    The measured qubit stays in the register, collapsed to ``|bit><bit|``.
    """
    p0, post0 = project(rho, qubit, 0)
    bit = 0 if rng.random() < p0 else 1
    if bit == 0:
        if post0 is None:
            raise KernelError("selected a zero-probability measurement branch")
        return 0, post0
    p1, post1 = project(rho, qubit, 1)
    if post1 is None:
        raise KernelError("selected a zero-probability measurement branch")
    return 1, post1


def ghz_state(size: int) -> DensityMatrix:
    """Ideal ``(|0...0> + |1...1>)/sqrt(2)`` on ``size`` qubits."""
    if size < 1:
        raise KernelError("GHZ state needs at least one qubit")
    psi = np.zeros(2**size, dtype=complex)
    psi[0] = psi[-1] = 1
    return DensityMatrix.from_statevector(psi)
