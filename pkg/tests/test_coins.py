from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rqwalk.coins import (BinaryRandom, CoinParams, ContinuousRandom, CrwEmulation, ExplicitSequence, Fixed,
                          PeriodicAlternating, PeriodicSmooth, SeedSpec, Uniform, check_unitary, coin_at,
                          coin_from_params, coin_sequence, crw_heads, derive_stream, is_deterministic, named_coin)
from rqwalk.errors import ContractError, DomainError

R = 1 / math.sqrt(2)
H = R * np.array([[1, 1], [1, -1]])
F = R * np.array([[1, 1j], [1j, 1]])
X = np.array([[0, 1], [1, 0]])


def test_params_half_zero_zero_is_hadamard():
    assert np.allclose(coin_from_params(CoinParams(0.5, 0.0, 0.0)), H, atol=1e-15)


def test_params_quarter_turn_phases_give_fourier():
    assert np.allclose(coin_from_params(CoinParams(0.5, math.pi / 2, math.pi / 2)), F, atol=1e-15)


def test_params_q_zero_is_spin_flip():
    assert np.allclose(coin_from_params(CoinParams(0.0, 0.0, 0.0)), X, atol=1e-15)


@pytest.mark.parametrize("name,expected", [("hadamard", H), ("fourier", F), ("sigma1", X),
                                           ("identity", np.eye(2)), ("H", H), ("F", F)])
def test_named_coins(name, expected):
    assert np.allclose(named_coin(name), expected, atol=1e-15)


def test_unknown_coin_name_rejected():
    with pytest.raises(DomainError):
        named_coin("grover")


@pytest.mark.parametrize("q,theta,phi", [(-0.1, 0, 0), (1.1, 0, 0), (0.5, 2 * math.pi, 0), (0.5, 0, -0.1)])
def test_params_out_of_domain(q, theta, phi):
    with pytest.raises(DomainError):
        CoinParams(q, theta, phi)


def test_unitarity_over_random_parameters():
    rng = np.random.default_rng(11)
    for q, th, ph in zip(rng.random(10_000), rng.random(10_000) * 2 * np.pi, rng.random(10_000) * 2 * np.pi):
        c = coin_from_params(CoinParams(float(q), float(th), float(ph)))
        assert np.max(np.abs(c.conj().T @ c - np.eye(2))) < 1e-12


def test_check_unitary_rejects_non_unitary():
    with pytest.raises(ContractError):
        check_unitary(np.array([[1, 1], [0, 1]]))


def test_fixed_policy_is_constant():
    rng = derive_stream(SeedSpec(1))
    for t in (1, 2, 50):
        assert np.array_equal(coin_at(Fixed(H), t, rng), Fixed(H).coin)


def test_periodic_smooth_coin():
    T = 25
    for t in (1, 7, 12, 25, 31):
        th = 0.5 * math.pi * abs(math.sin(math.pi * t / T))
        expected = coin_from_params(CoinParams(0.5, th % (2 * math.pi), th % (2 * math.pi)))
        assert np.allclose(coin_at(PeriodicSmooth(T), t), expected, atol=1e-14)


def test_periodic_alternating_coin():
    pol = PeriodicAlternating(3)
    labels = ["H" if np.allclose(coin_at(pol, t), H) else "F" for t in range(1, 8)]
    assert "".join(labels) == "HFFHFFH"


def test_crw_coin_choice():
    pol = CrwEmulation(0.5)

    class Fake:
        def __init__(self, u):
            self.u = u

        def random(self):
            return self.u

    assert np.array_equal(coin_at(pol, 1, Fake(0.1), spin_hint="up"), np.eye(2))
    assert np.array_equal(coin_at(pol, 1, Fake(0.9), spin_hint="up"), X)
    assert np.array_equal(coin_at(pol, 1, Fake(0.1), spin_hint="down"), X)
    assert np.array_equal(coin_at(pol, 1, Fake(0.9), spin_hint="down"), np.eye(2))
    with pytest.raises(ContractError):
        coin_at(pol, 1, Fake(0.1), spin_hint=None)


def test_stream_determinism_and_independence():
    a = derive_stream(SeedSpec(7, 0)).random(100)
    assert np.array_equal(a, derive_stream(SeedSpec(7, 0)).random(100))
    assert a[0] != derive_stream(SeedSpec(7, 1)).random()
    assert a[0] != derive_stream(SeedSpec(8, 0)).random()


def test_seed_domain():
    with pytest.raises(DomainError):
        SeedSpec(-1)
    with pytest.raises(DomainError):
        SeedSpec(2**64)


@pytest.mark.parametrize("policy", [
    BinaryRandom(H, F, 0.3),
    ContinuousRandom(),
    ContinuousRandom(q=Uniform(0.4, 0.6), theta=0.0, phi=0.0),
    ContinuousRandom(q=0.5, theta=Uniform(0, 0.3), phi=Uniform(0, 0.3)),
])
def test_coin_sequence_matches_repeated_coin_at(policy):
    seq = coin_sequence(policy, 40, derive_stream(SeedSpec(3, 2)))
    rng = derive_stream(SeedSpec(3, 2))
    for t in range(1, 41):
        assert np.allclose(seq[t - 1], coin_at(policy, t, rng), atol=1e-15, rtol=0)


@pytest.mark.parametrize("policy", [Fixed(H), PeriodicSmooth(10), PeriodicAlternating(4),
                                    ExplicitSequence.from_labels("HFFHF")])
def test_deterministic_sequences_match_coin_at(policy):
    seq = coin_sequence(policy, 5)
    for t in range(1, 6):
        assert np.allclose(seq[t - 1], coin_at(policy, t), atol=1e-15)
    assert is_deterministic(policy)


def test_random_policy_needs_stream():
    with pytest.raises(DomainError):
        coin_at(BinaryRandom(H, F), 1)


def test_explicit_sequence_too_short():
    with pytest.raises(DomainError):
        coin_at(ExplicitSequence.from_labels("HF"), 3)


def test_continuous_parameters_are_uniform():
    # chi-square against the uniform law for each drawn parameter
    pol = ContinuousRandom()
    rng = derive_stream(SeedSpec(5))
    n = 20_000
    u = rng.random((n, 3))
    seq = coin_sequence(pol, n, derive_stream(SeedSpec(5)))
    q = np.abs(seq[:, 0, 0]) ** 2
    assert np.allclose(q, u[:, 0], atol=1e-12)
    for values, hi in ((q, 1.0), (u[:, 1] * np.pi, np.pi), (u[:, 2] * 2 * np.pi, 2 * np.pi)):
        counts, _ = np.histogram(values, bins=20, range=(0, hi))
        assert stats.chisquare(counts).pvalue > 1e-3


def test_binary_frequency():
    seq = coin_sequence(BinaryRandom(H, F, 0.3), 20_000, derive_stream(SeedSpec(9)))
    frac = np.mean(np.all(np.isclose(seq, H), axis=(1, 2)))
    assert abs(frac - 0.3) < 4 * math.sqrt(0.3 * 0.7 / 20_000)


def test_crw_heads_matches_coin_at_draws():
    pol = CrwEmulation(0.4)
    heads = crw_heads(pol, 30, derive_stream(SeedSpec(2)))
    rng = derive_stream(SeedSpec(2))
    for h in heads:
        assert np.array_equal(coin_at(pol, 1, rng, spin_hint="up"), np.eye(2) if h else X)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 2 * math.pi, exclude_max=True), st.floats(0, 2 * math.pi, exclude_max=True))
def test_coin_unitary_property(q, theta, phi):
    c = coin_from_params(CoinParams(q, theta, phi))
    assert np.max(np.abs(c @ c.conj().T - np.eye(2))) < 1e-12
