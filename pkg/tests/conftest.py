import functools

import numpy as np
import pytest


def embed(op: np.ndarray, targets, n: int) -> np.ndarray:
    """Reference full-register matrix of ``op`` on ``targets`` built from basis states."""
    k = len(targets)
    dim = 2**n
    full = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub_in = 0
        for t in targets:
            sub_in = (sub_in << 1) | bits[t]
        for sub_out in range(2**k):
            amp = op[sub_out, sub_in]
            if amp == 0:
                continue
            out = list(bits)
            for j, t in enumerate(targets):
                out[t] = (sub_out >> (k - 1 - j)) & 1
            row = int("".join(map(str, out)), 2)
            full[row, col] += amp
    return full


def random_density(n: int, rng: np.random.Generator, rank: int = 3) -> np.ndarray:
    dim = 2**n
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_unitary(k: int, rng: np.random.Generator) -> np.ndarray:
    dim = 2**k
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def record_acceptance(label: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
