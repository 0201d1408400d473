import itertools
import json

import numpy as np
import pytest

from dqasim.ghzlink import (
    DISENTANGLE,
    ENTANGLE,
    ClassicalMessage,
    SessionTranscript,
    apply_superoperator,
    disentangle_fanout,
    entangle_fanout,
    fanout_superoperator,
    generate_noisy_ghz,
    sample_noisy_ghz,
)
from dqasim.noise import NoiseModel
from dqasim.qkernel import (
    CNOT,
    H,
    X,
    Z,
    DensityMatrix,
    KernelError,
    apply_unitary,
    ghz_state,
    partial_trace,
    phase_gate,
    project,
    tensor,
)

from conftest import random_density

NOISES = [
    NoiseModel(),
    NoiseModel("dephasing", 0.1),
    NoiseModel("dephasing", 0.3),
    NoiseModel("depolarising", 0.1),
    NoiseModel("depolarising", 0.3),
]


def entropy(rho: np.ndarray) -> float:
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-14]
    return float(-(w * np.log2(w)).sum())


def server_with_fresh_parties(server: DensityMatrix, m: int) -> DensityMatrix:
    return tensor(server, DensityMatrix.zero(m))


def branch_average(register, ghz, m):
    """Average over every measurement record, applying the classical corrections by hand."""
    base = register.num_qubits
    start = tensor(register, ghz.state)
    start = apply_unitary(start, CNOT, [0, base])
    total = np.zeros((2**base, 2**base), dtype=complex)
    for bits in itertools.product((0, 1), repeat=m + 1):
        b, cs = bits[0], bits[1:]
        prob, rho = project(start, base, b)
        if rho is None:
            continue
        weight = prob
        for i in range(1, m + 1):
            if b:
                rho = apply_unitary(rho, X, [base + i])
            rho = apply_unitary(rho, CNOT, [base + i, i])
            rho = apply_unitary(rho, H, [base + i])
        for i, c in enumerate(cs, start=1):
            pc, rho = project(rho, base + i, c)
            if rho is None:
                weight = 0
                break
            weight *= pc
            if c:
                rho = apply_unitary(rho, Z, [0])
        if weight:
            total += weight * partial_trace(rho, range(base)).data
    return total


def test_ghz_resource_noiseless_is_ideal():
    assert np.allclose(generate_noisy_ghz(2, NoiseModel()).state.data, ghz_state(2).data)


def test_ghz_resource_dephasing_coherence():
    g = generate_noisy_ghz(3, NoiseModel("dephasing", 0.2))
    assert g.state.data[0, 7] == pytest.approx(0.5 * 0.8**3)


def test_ghz_resource_full_depolarising_is_maximally_mixed():
    g = generate_noisy_ghz(2, NoiseModel("depolarising", 1.0))
    assert np.allclose(g.state.data, np.eye(4) / 4)


def test_ghz_resource_rejects_size_one():
    with pytest.raises(KernelError):
        generate_noisy_ghz(1, NoiseModel())


def test_sampled_ghz_averages_to_channel(rng):
    model = NoiseModel("depolarising", 0.4)
    avg = sum(sample_noisy_ghz(2, model, rng).state.data for _ in range(3000)) / 3000
    assert np.max(np.abs(avg - generate_noisy_ghz(2, model).state.data)) < 0.03


@pytest.mark.parametrize("m", [1, 2, 3])
def test_entangle_copies_basis_value(m):
    reg = server_with_fresh_parties(DensityMatrix.basis("1"), m)
    out, _ = entangle_fanout(reg, 0, generate_noisy_ghz(m + 1, NoiseModel()), range(1, m + 1))
    assert np.allclose(out.data, DensityMatrix.basis("1" * (m + 1)).data)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_entangle_on_plus_makes_ghz(m):
    plus = apply_unitary(DensityMatrix.zero(1), H, [0])
    reg = server_with_fresh_parties(plus, m)
    out, _ = entangle_fanout(reg, 0, generate_noisy_ghz(m + 1, NoiseModel()), range(1, m + 1))
    assert np.allclose(out.data, ghz_state(m + 1).data, atol=1e-14)


def test_entangle_at_full_depolarising_leaves_parties_uncorrelated():
    plus = apply_unitary(DensityMatrix.zero(1), H, [0])
    m = 2
    reg = server_with_fresh_parties(plus, m)
    ghz = generate_noisy_ghz(m + 1, NoiseModel("depolarising", 1.0))
    out, _ = entangle_fanout(reg, 0, ghz, [1, 2])
    mi = (
        entropy(partial_trace(out, [0]).data)
        + entropy(partial_trace(out, [1, 2]).data)
        - entropy(out.data)
    )
    assert abs(mi) < 1e-10


@pytest.mark.parametrize("m", [1, 2, 3])
def test_noiseless_roundtrip_is_identity_on_server(m, rng):
    server = DensityMatrix(random_density(1, rng, rank=2))
    reg = server_with_fresh_parties(server, m)
    ghz = generate_noisy_ghz(m + 1, NoiseModel())
    mid, _ = entangle_fanout(reg, 0, ghz, range(1, m + 1))
    out, _ = disentangle_fanout(mid, 0, range(1, m + 1), ghz)
    assert np.allclose(out.data, reg.data, atol=1e-13)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_noiseless_roundtrip_accumulates_party_phases(m, rng):
    thetas = rng.uniform(0, 2 * np.pi, m)
    plus = apply_unitary(DensityMatrix.zero(1), H, [0])
    ghz = generate_noisy_ghz(m + 1, NoiseModel())
    reg, _ = entangle_fanout(server_with_fresh_parties(plus, m), 0, ghz, range(1, m + 1))
    for q, th in enumerate(thetas, start=1):
        reg = apply_unitary(reg, phase_gate(th), [q])
    reg, _ = disentangle_fanout(reg, 0, range(1, m + 1), ghz)
    expected = apply_unitary(plus, phase_gate(thetas.sum()), [0])
    assert np.allclose(partial_trace(reg, [0]).data, expected.data, atol=1e-13)
    assert np.allclose(partial_trace(reg, range(1, m + 1)).data, DensityMatrix.zero(m).data, atol=1e-13)


@pytest.mark.parametrize("kind", ["dephasing", "depolarising"])
@pytest.mark.parametrize("m", [1, 2, 3])
def test_two_noisy_rounds_scale_coherence(kind, m):
    p = 0.15
    model = NoiseModel(kind, p)
    plus = apply_unitary(DensityMatrix.zero(1), H, [0])
    reg, _ = entangle_fanout(server_with_fresh_parties(plus, m), 0, generate_noisy_ghz(m + 1, model), range(1, m + 1))
    reg, _ = disentangle_fanout(reg, 0, range(1, m + 1), generate_noisy_ghz(m + 1, model))
    server = partial_trace(reg, [0]).data
    assert abs(server[0, 1]) == pytest.approx(0.5 * (1 - p) ** (2 * (m + 1)), abs=1e-13)
    assert server[0, 0] == pytest.approx(0.5, abs=1e-13)


@pytest.mark.parametrize("model", NOISES)
@pytest.mark.parametrize("m", [1, 2])
def test_channel_form_equals_measurement_average(model, m, rng):
    reg = DensityMatrix(random_density(m + 1, rng))
    ghz = generate_noisy_ghz(m + 1, model)
    channel, transcript = disentangle_fanout(reg, 0, range(1, m + 1), ghz)
    assert transcript.deferred and not transcript.messages
    assert np.max(np.abs(channel.data - branch_average(reg, ghz, m))) < 1e-10


@pytest.mark.parametrize("m", [1, 2, 3])
def test_noiseless_trajectories_are_deterministic(m, rng):
    server = DensityMatrix(random_density(1, rng, rank=1))
    reg = server_with_fresh_parties(server, m)
    ghz = generate_noisy_ghz(m + 1, NoiseModel())
    channel, _ = entangle_fanout(reg, 0, ghz, range(1, m + 1))
    for _ in range(8):
        traj, _ = entangle_fanout(reg, 0, ghz, range(1, m + 1), rng)
        assert np.allclose(traj.data, channel.data, atol=1e-12)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_transcript_has_one_plus_m_messages(m, rng):
    reg = server_with_fresh_parties(apply_unitary(DensityMatrix.zero(1), H, [0]), m)
    ghz = generate_noisy_ghz(m + 1, NoiseModel("dephasing", 0.2))
    reg, first = entangle_fanout(reg, 0, ghz, range(1, m + 1), rng)
    reg, second = disentangle_fanout(reg, 0, range(1, m + 1), ghz, rng)
    for t in (first, second):
        assert len(t.messages) == 1 + m
        assert len(t.corrections) == len(t.messages)
        assert [msg.sender for msg in t.messages] == list(range(m + 1))
        assert t.messages[0].round == ENTANGLE
        assert all(msg.round == DISENTANGLE for msg in t.messages[1:])
        assert all(c.applied == bool(t.messages[c.message].bit) for c in t.corrections)
    joined = SessionTranscript().extend(first).extend(second)
    assert len(joined.messages) == 2 * (m + 1)
    assert joined.corrections[-1].message == 2 * (m + 1) - 1
    doc = json.loads(joined.to_json())
    assert len(doc["messages"]) == 2 * (m + 1)


def test_message_validation():
    with pytest.raises(ValueError):
        ClassicalMessage(0, ENTANGLE, 2)
    with pytest.raises(ValueError):
        ClassicalMessage(0, "teleport", 0)


def test_fanout_layout_errors():
    reg = DensityMatrix.zero(3)
    with pytest.raises(KernelError):
        entangle_fanout(reg, 0, generate_noisy_ghz(2, NoiseModel()), [1, 2])
    with pytest.raises(KernelError):
        entangle_fanout(reg, 0, generate_noisy_ghz(3, NoiseModel()), [0, 1])
    with pytest.raises(KernelError):
        entangle_fanout(DensityMatrix.basis("011"), 0, generate_noisy_ghz(3, NoiseModel()), [1, 2])


@pytest.mark.parametrize("model", NOISES[:3])
@pytest.mark.parametrize("m", [1, 2])
def test_superoperator_matches_explicit_gadget(model, m, rng):
    reg = DensityMatrix(random_density(m + 2, rng))
    superop = fanout_superoperator(m, model)
    ghz = generate_noisy_ghz(m + 1, model)
    targets = [1] + [m + 1 - i for i in range(m)]
    via_superop = apply_superoperator(reg, superop, targets)
    direct, _ = disentangle_fanout(reg, 1, targets[1:], ghz)
    assert np.max(np.abs(via_superop.data - direct.data)) < 1e-12
