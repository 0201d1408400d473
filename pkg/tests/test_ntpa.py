import itertools

import numpy as np
import pytest

from dqasim.analytic import AnalyticParams, analytic_distribution
from dqasim.dqa import fit_fidelity_param, DqaConfig
from dqasim.noise import NoiseModel
from dqasim.ntpa import (
    NtpaConfig,
    combine_rounds,
    combine_rounds_enumerated,
    required_bits,
    run_ntpa,
    run_round,
    success_bound,
    success_probability,
)
from dqasim.sss import lagrange_weights


def test_required_bits_examples():
    assert required_bits(2, 11) == 5
    assert required_bits(1, 2) == 1
    assert required_bits(4, 101) == 9
    with pytest.raises(ValueError):
        required_bits(0, 5)


def test_required_bits_prevents_wrap(rng):
    for _ in range(1000):
        m = int(rng.integers(1, 8))
        q = int(rng.choice([2, 3, 5, 7, 11, 13, 101, 257]))
        shares = rng.integers(0, q, m)
        assert shares.sum() < 2 ** required_bits(m, q)


def test_config_validation():
    with pytest.raises(ValueError):
        NtpaConfig((1, 2), 3, 11)
    with pytest.raises(ValueError):
        NtpaConfig((1, 2), 2, 12)
    with pytest.raises(ValueError):
        NtpaConfig((1, 2), 2, 2)
    with pytest.raises(ValueError):
        NtpaConfig((11, 2), 2, 11)
    with pytest.raises(ValueError):
        NtpaConfig((1, 2, 3), 2, 11, subset=(1, 1))
    with pytest.raises(ValueError):
        NtpaConfig((1, 2, 3), 2, 11, subset=(1, 4))
    assert NtpaConfig((1, 2, 3), 2, 11, subset=(3, 1)).rounds_used == (3, 1)


def test_noiseless_example():
    result = run_ntpa(NtpaConfig((3, 4), 2, 11))
    assert result.value == 7
    assert result.success_probability == pytest.approx(1.0)


def test_single_party():
    result = run_ntpa(NtpaConfig((5,), 1, 7))
    assert result.value == 5


def test_noiseless_random_configs(rng):
    for _ in range(10):
        m = int(rng.integers(1, 4))
        q = int(rng.choice([5, 7, 11, 13]))
        t = int(rng.integers(1, m + 1))
        xs = tuple(int(x) for x in rng.integers(0, q, m))
        assert run_ntpa(NtpaConfig(xs, t, q, seed=int(rng.integers(100)))).value == sum(xs) % q


def test_every_subset_reconstructs_same_value():
    xs, q = (4, 9, 2), 13
    for subset in itertools.permutations(range(1, 4), 2):
        assert run_ntpa(NtpaConfig(xs, 2, q, seed=3, subset=subset)).value == sum(xs) % q


def test_round_inputs_are_shares_not_secrets():
    config = NtpaConfig((3, 4, 5), 2, 11, seed=12)
    result = run_ntpa(config)
    for rr in result.rounds:
        assert rr.server == rr.round
        assert rr.inputs == tuple(g(rr.round) for g in result.polynomials)
        assert all(0 <= v < config.q for v in rr.inputs)
    assert [g.secret for g in result.polynomials] == list(config.inputs)


def test_round_marginal_follows_closed_form():
    noise = NoiseModel("dephasing", 0.12)
    rr = run_round(2, (7, 3), 5, noise)
    a = fit_fidelity_param(DqaConfig((7, 3), 5, noise))
    ref = analytic_distribution(AnalyticParams((7, 3), 5, a)).array
    assert np.abs(rr.distribution.array - ref).max() < 1e-9


def test_round_residues():
    rr = run_round(1, (4, 5), 4, NoiseModel())
    res = rr.residue_distribution(7)
    assert res[2] == pytest.approx(1.0)


def test_combination_matches_enumeration(rng):
    q = 7
    residues = [rng.dirichlet(np.ones(q)) for _ in range(3)]
    residues[1][[0, 4]] = 0
    residues[1] /= residues[1].sum()
    weights = lagrange_weights([1, 2, 3], q)
    fast = combine_rounds(residues, weights, q)
    slow = combine_rounds_enumerated(residues, weights, q)
    assert np.abs(fast - slow).max() < 1e-14


def test_fully_noisy_rounds_give_image_of_uniform():
    config = NtpaConfig((1, 2), 2, 5, NoiseModel("depolarising", 1.0))
    result = run_ntpa(config)
    n = config.n_round
    uniform = np.zeros(5)
    np.add.at(uniform, np.arange(2**n) % 5, 1 / 2**n)
    expected = combine_rounds_enumerated([uniform, uniform], lagrange_weights([1, 2], 5), 5)
    assert np.abs(result.distribution - expected).max() < 1e-12


@pytest.mark.parametrize("kind", ["dephasing", "depolarising"])
@pytest.mark.parametrize("p", [0.02, 0.1, 0.3, 1.0])
def test_success_above_bound(kind, p):
    config = NtpaConfig((3, 9), 2, 11, NoiseModel(kind, p))
    assert success_probability(config) >= success_bound(config) - 1e-12


def test_success_noiseless_is_one():
    assert success_probability(NtpaConfig((2, 1, 3), 3, 7)) == pytest.approx(1.0)


def test_success_non_increasing_in_threshold():
    noise = NoiseModel("dephasing", 0.1)
    probs = [success_probability(NtpaConfig((1, 2, 3), t, 5, noise, seed=1)) for t in (1, 2, 3)]
    assert probs[0] >= probs[1] - 1e-12 and probs[1] >= probs[2] - 1e-12


def test_sample_mode():
    config = NtpaConfig((3, 4), 2, 11, NoiseModel("dephasing", 0.05), engine="sample", shots=4000, seed=2)
    a = run_ntpa(config)
    b = run_ntpa(config)
    assert np.array_equal(a.samples, b.samples)
    empirical = np.bincount(a.samples, minlength=11) / 4000
    assert 0.5 * np.abs(empirical - a.distribution).sum() < 0.05
    assert success_probability(config) == pytest.approx(a.success_probability)


def test_sample_mode_noiseless_is_exact():
    result = run_ntpa(NtpaConfig((6, 6, 6), 2, 7, engine="sample", shots=200))
    assert np.all(result.samples == 18 % 7)
