from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from rqwalk.coins import Fixed, named_coin
from rqwalk.ensemble import build_grid
from rqwalk.errors import DomainError
from rqwalk.observables import entropy_values
from rqwalk.protocols import (REFERENCE_CONDITIONS, REFERENCE_SEQUENCE, CoinLabelSequence, evaluate_sequence,
                              search_best_sequence, worst_initial_condition)
from rqwalk.state import SpinVector

H = named_coin("hadamard")


def test_reference_sequence_values():
    got = evaluate_sequence(REFERENCE_SEQUENCE, [(2.7, math.pi), (2.7, 0.0), (2.7, math.pi / 2), (2.7, -math.pi / 2)])
    assert got == pytest.approx([0.999, 0.979, 0.938, 0.982], abs=1e-3)


def test_all_hadamard_sequence():
    assert evaluate_sequence("H" * 28, [(2.7, 0.0)])[0] == pytest.approx(0.983, abs=1e-3)


def test_label_validation():
    assert str(CoinLabelSequence(" hf H ")) == "HFH"
    with pytest.raises(DomainError):
        CoinLabelSequence("HXF")
    with pytest.raises(DomainError):
        CoinLabelSequence("")


def test_worst_condition_for_hadamard():
    a, b, s = worst_initial_condition(Fixed(H), n=28)
    assert s == pytest.approx(0.645, abs=1e-3)
    assert a == pytest.approx(2.7) and abs(b - math.pi) < 0.1


def test_worst_condition_right_mover_tie_break():
    pairs = [(0.0, 0.0), (math.pi, 0.0), (0.0, 1.0)]
    assert worst_initial_condition(Fixed(named_coin("identity")), pairs, n=10) == (0.0, 0.0, 0.0)


def test_worst_condition_one_step_closed_form():
    # after one step the up and down parts sit on different sites, so
    # alpha is the post-coin up weight and gamma vanishes
    grid = build_grid("localized_spin", increment=0.3)
    a, b, s = worst_initial_condition(Fixed(H), grid, n=1)
    def one_step(x, y):
        spin = SpinVector.from_angles(x, y)
        up_weight = abs((H @ [spin.amp_up, spin.amp_down])[0]) ** 2
        return float(entropy_values(up_weight, 0.0))

    best = min(one_step(x, y) for x, y in grid.members)
    assert s == pytest.approx(best, abs=1e-14)


def test_search_single_trial_is_consistent():
    seq, S = search_best_sequence(1, 12, 0.5, (2.7, math.pi), seed=3)
    assert S == pytest.approx(evaluate_sequence(seq, [(2.7, math.pi)])[0], abs=1e-14)


def test_search_against_exhaustive_enumeration():
    target = (0.4, 1.3)
    every = {"".join(p): evaluate_sequence("".join(p), [target])[0] for p in itertools.product("HF", repeat=4)}
    seq, S = search_best_sequence(50, 4, 0.5, target, seed=1)
    assert S <= max(every.values()) + 1e-14
    assert S == pytest.approx(every[str(seq)], abs=1e-14)
    assert S == pytest.approx(max(every.values()), abs=1e-14)


def test_search_prefix_stable():
    small, s_small = search_best_sequence(30, 10, 0.5, (2.7, math.pi), seed=4, batch=7)
    large, s_large = search_best_sequence(60, 10, 0.5, (2.7, math.pi), seed=4)
    assert s_large >= s_small


def test_search_reaches_high_entanglement():
    _, S = search_best_sequence(10_000, 28, 0.5, (2.7, math.pi), seed=1)
    assert S >= 0.99


def test_reference_conditions_include_both_pi_signs():
    assert (2.7, math.pi) in REFERENCE_CONDITIONS and (2.7, -math.pi) in REFERENCE_CONDITIONS
