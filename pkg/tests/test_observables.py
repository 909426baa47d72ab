from __future__ import annotations

import math

import numpy as np
import pytest

from rqwalk.errors import ContractError
from rqwalk.observables import (ReducedDensity, bloch, entropy, entropy_values, moments, reduce, trace_distance,
                                trace_distance_values)
from rqwalk.evolution import step
from rqwalk.coins import named_coin
from rqwalk.state import SPIN_UP, XI2, SpinVector, localized

PAULI = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.array([[1, 0], [0, -1]])]


def test_reduce_localized_up():
    rho = reduce(localized(SPIN_UP))
    assert rho.alpha == 1 and rho.gamma == 0


def test_reduce_same_site_superposition():
    rho = reduce(localized(SpinVector(1 / math.sqrt(2), 1 / math.sqrt(2))))
    assert rho.alpha == pytest.approx(0.5) and rho.gamma == pytest.approx(0.5)


def test_reduce_after_hadamard_step():
    rho = reduce(step(localized(SPIN_UP), named_coin("hadamard")))
    assert rho.alpha == pytest.approx(0.5, abs=1e-15) and rho.gamma == 0


@pytest.mark.parametrize("alpha,gamma,S", [(0.5, 0, 1.0), (1.0, 0, 0.0), (0.5, 0.5, 0.0)])
def test_entropy_values(alpha, gamma, S):
    assert entropy(ReducedDensity(alpha, gamma)) == pytest.approx(S, abs=1e-12)


def test_entropy_against_eigenvalues():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        m = z @ z.conj().T
        m /= np.trace(m).real
        lam = np.linalg.eigvalsh(m)
        lam = lam[lam > 0]
        expected = -np.sum(lam * np.log2(lam))
        assert entropy_values(m[0, 0].real, m[0, 1]) == pytest.approx(expected, abs=1e-12)


def test_entropy_rejects_non_psd():
    with pytest.raises(ContractError):
        entropy_values(0.5, 0.9)


@pytest.mark.parametrize("alpha,gamma,r", [(1.0, 0, (0, 0, 1)), (0.5, 0, (0, 0, 0)), (0.5, 0.5, (1, 0, 0))])
def test_bloch_vectors(alpha, gamma, r):
    assert np.allclose(bloch(ReducedDensity(alpha, gamma)), r, atol=1e-15)


def test_bloch_reconstructs_matrix():
    rng = np.random.default_rng(2)
    for _ in range(500):
        z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        m = z @ z.conj().T
        m /= np.trace(m).real
        rho = ReducedDensity(m[0, 0].real, m[0, 1])
        r = bloch(rho)
        rebuilt = 0.5 * (np.eye(2) + sum(ri * p for ri, p in zip(r, PAULI)))
        assert np.max(np.abs(rebuilt - m)) < 1e-12
        assert np.max(np.abs(rho.matrix() - m)) < 1e-12


def test_trace_distance_simple_cases():
    a = ReducedDensity(0.3, 0.2 + 0.1j)
    assert trace_distance(a, a) == 0
    assert trace_distance(ReducedDensity(1.0, 0), ReducedDensity(0.0, 0)) == pytest.approx(1.0)


def _random_density(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    m = z @ z.conj().T
    return m / np.trace(m).real


def test_trace_distance_matches_spectral_form():
    rng = np.random.default_rng(3)
    for _ in range(10_000):
        m1, m2 = _random_density(rng), _random_density(rng)
        spectral = 0.5 * np.sum(np.linalg.svd(m1 - m2, compute_uv=False))
        bl = trace_distance(ReducedDensity(m1[0, 0].real, m1[0, 1]), ReducedDensity(m2[0, 0].real, m2[0, 1]))
        assert abs(bl - spectral) < 1e-12


def test_trace_distance_vectorized_matches_scalar():
    rng = np.random.default_rng(4)
    pairs = [(_random_density(rng), _random_density(rng)) for _ in range(100)]
    a1 = np.array([p[0][0, 0].real for p in pairs])
    g1 = np.array([p[0][0, 1] for p in pairs])
    a2 = np.array([p[1][0, 0].real for p in pairs])
    g2 = np.array([p[1][0, 1] for p in pairs])
    vec = trace_distance_values(a1, g1, a2, g2)
    for k in range(100):
        assert vec[k] == pytest.approx(trace_distance(ReducedDensity(a1[k], g1[k]), ReducedDensity(a2[k], g2[k])),
                                       abs=1e-15)


def test_moments():
    assert moments(localized(SPIN_UP, 5)) == (5.0, 0.0)
    s = step(localized(SPIN_UP), named_coin("hadamard"))
    assert moments(s) == pytest.approx((0.0, 1.0), abs=1e-15)
