from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from rqwalk.coins import BinaryRandom, ContinuousRandom, CrwEmulation, Fixed, named_coin
from rqwalk.ensemble import (CHUNK_SIZE, EnsembleSpec, asymptotic_range, build_grid, member_entropy,
                             run_ensemble)
from rqwalk.errors import ContractError, DomainError
from rqwalk.state import SPIN_DOWN, SPIN_UP, localized

H = named_coin("hadamard")
F = named_coin("fourier")
I2 = named_coin("identity")


def test_two_site_grid_size_and_first_member():
    g = build_grid("two_site", increment=0.4)
    assert len(g) == 16_384
    assert g.members[0] == (0.0, 0.0, 0.0, 0.0)


def test_localized_grid_size():
    assert len(build_grid("localized_spin", increment=0.1)) == 2016


def test_coarse_localized_grid_by_hand():
    g = build_grid("localized_spin", increment=math.pi)
    pi = math.pi
    assert g.members == ((0, 0), (0, pi), (0, 2 * pi), (pi, 0), (pi, pi), (pi, 2 * pi))


def test_grid_rejects_bad_increment():
    with pytest.raises(DomainError):
        build_grid("two_site", increment=0)
    with pytest.raises(DomainError):
        build_grid("hexagonal", increment=0.1)


def test_subsample_keeps_full_grid_indices():
    g = build_grid("localized_spin", increment=0.1).subsample(8)
    assert len(g) == 252 and g.indices[:3] == (0, 8, 16) and g.subsample_factor == 8


def test_fractions_are_monotone_in_threshold():
    g = build_grid("random_two_site", count=60, seed=3)
    s = run_ensemble(EnsembleSpec(g, ContinuousRandom(), 120, master_seed=1))
    f95, f97, f99 = (s.fraction_above[t] for t in (0.95, 0.97, 0.99))
    assert np.all(f95 >= f97) and np.all(f97 >= f99)
    assert np.all((s.min_S_E <= s.mean_S_E + 1e-15) & (s.mean_S_E <= s.max_S_E + 1e-15))


@pytest.mark.parametrize("p,coin", [(0.0, F), (1.0, H)])
def test_binary_boundaries_reduce_to_fixed_coins(p, coin):
    g = build_grid("random_two_site", count=20, seed=2)
    a = run_ensemble(EnsembleSpec(g, BinaryRandom(H, F, p), 80, master_seed=4))
    b = run_ensemble(EnsembleSpec(g, Fixed(coin), 80))
    assert np.array_equal(a.mean_S_E, b.mean_S_E)
    assert np.array_equal(a.final_mean_P, b.final_mean_P)


def test_results_independent_of_worker_count():
    g = build_grid("random_two_site", count=CHUNK_SIZE * 2 + 17, seed=5)
    spec = EnsembleSpec(g, ContinuousRandom(), 60, master_seed=1)
    a = run_ensemble(spec, jobs=1)
    b = run_ensemble(spec, jobs=2)
    for name in ("mean_S_E", "min_S_E", "max_S_E", "mean_sqrt_variance", "mean_trace_distance", "final_mean_P"):
        assert np.array_equal(getattr(a, name), getattr(b, name)), name


def test_subsampled_run_reproduces_full_members():
    g = build_grid("localized_spin", increment=0.5)
    full = run_ensemble(EnsembleSpec(g, ContinuousRandom(), 50, master_seed=2, realizations_per_condition=2,
                                     keep_members=True))
    sub = run_ensemble(EnsembleSpec(g.subsample(3), ContinuousRandom(), 50, master_seed=2,
                                    realizations_per_condition=2, keep_members=True))
    for k, idx in enumerate(g.subsample(3).indices):
        for r in range(2):
            assert np.array_equal(sub.member_S_E[2 * k + r], full.member_S_E[2 * idx + r])


def test_member_entropy_audit():
    g = build_grid("random_two_site", count=30, seed=1)
    spec = EnsembleSpec(g, ContinuousRandom(), 40, master_seed=3, realizations_per_condition=2, keep_members=True)
    s = run_ensemble(spec)
    for pos, r in ((0, 0), (7, 1), (29, 1)):
        assert np.array_equal(member_entropy(spec, pos, r), s.member_S_E[2 * pos + r])


def test_right_mover_keeps_entropy_zero():
    g = build_grid("explicit", states=[localized(SPIN_UP)])
    s = run_ensemble(EnsembleSpec(g, Fixed(I2), 10))
    assert np.all(s.mean_S_E == 0)


def test_asymptotic_range_right_mover_on_definite_spins():
    g = build_grid("explicit", states=[localized(SPIN_UP), localized(SPIN_DOWN, 3)])
    assert asymptotic_range(Fixed(I2), g, 15) == (0.0, 0.0)


def test_asymptotic_range_single_condition():
    g = build_grid("localized_spin", increment=0.1)
    lo_hi = asymptotic_range(Fixed(H), build_grid("explicit", states=[g.state(0)]), 5)
    assert lo_hi[0] == lo_hi[1]


def test_asymptotic_range_needs_deterministic_policy():
    with pytest.raises(DomainError):
        asymptotic_range(ContinuousRandom(), build_grid("localized_spin", increment=1.0), 5)


def _crw_summary(realizations, n, seed=1):
    g = build_grid("explicit", states=[localized(SPIN_UP)])
    return run_ensemble(EnsembleSpec(g, CrwEmulation(0.5), n, master_seed=seed,
                                     realizations_per_condition=realizations))


def test_crw_embedding_is_classical():
    n = 100
    s = _crw_summary(10_000, n)
    assert np.max(s.max_S_E) < 1e-10
    j = s.final_j
    k = (j + n) // 2
    oracle = np.where((j + n) % 2 == 0, stats.binom.pmf(k, n, 0.5), 0.0)
    # chi-square goodness of fit on the even-parity support, tails pooled
    keep = oracle * 10_000 >= 5
    obs = np.round(s.final_mean_P * 10_000)
    assert obs.sum() == 10_000
    o = np.append(obs[keep], obs[~keep].sum())
    e = np.append(oracle[keep], oracle[~keep].sum()) * 10_000
    assert stats.chisquare(o, e).pvalue > 1e-3


def test_crw_variance_matches_step_count():
    n = 60
    s = _crw_summary(1000, n, seed=2)
    var = np.sum(s.final_j ** 2 * s.final_mean_P) - np.sum(s.final_j * s.final_mean_P) ** 2
    assert var == pytest.approx(n, rel=0.05)


def test_crw_superposed_grid_fails_with_location():
    g = build_grid("localized_spin", increment=1.0)
    with pytest.raises(ContractError) as exc:
        run_ensemble(EnsembleSpec(g, CrwEmulation(0.5), 5))
    assert exc.value.step == 1 and exc.value.condition is not None


def test_shared_sequence_not_allowed_for_crw():
    g = build_grid("explicit", states=[localized(SPIN_UP)])
    with pytest.raises(DomainError):
        EnsembleSpec(g, CrwEmulation(0.5), 5, shared_sequence=True)


def test_csv_output(tmp_path):
    g = build_grid("random_two_site", count=5, seed=1)
    s = run_ensemble(EnsembleSpec(g, ContinuousRandom(), 20, master_seed=1))
    path = tmp_path / "summary.csv"
    s.to_csv(path, header="config_sha256=abc master_seed=1")
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_sha256=abc master_seed=1"
    assert lines[1] == "t,mean_SE,min_SE,max_SE,mean_disp,mean_D,frac_0.95,frac_0.97,frac_0.99"
    assert len(lines) == 22
    first = lines[2].split(",")
    assert float(first[1]) == s.mean_S_E[0]
    assert abs(sum(s.final_mean_P) - 1) < 1e-12
