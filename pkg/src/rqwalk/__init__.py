"""Simulation of one-dimensional coined quantum walks whose coin changes in time.

The package evolves walker amplitudes on a growing lattice window, measures
spin-position entanglement and related observables, runs seeded ensembles
over grids of initial conditions, and fits power laws to ensemble series.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .analysis import FitResult, classify_regime, dispersion_exponent, fixed_exponent_prefactor, loglog_fit
from .coins import (BinaryRandom, CoinParams, ContinuousRandom, CrwEmulation, ExplicitSequence, Fixed,
                    PeriodicAlternating, PeriodicSmooth, SeedSpec, Uniform, check_unitary, coin_at,
                    coin_from_params, coin_sequence, derive_stream, named_coin)
from .ensemble import ConditionGrid, EnsembleSpec, EnsembleSummary, asymptotic_range, build_grid, run_ensemble
from .errors import ContractError, DomainError
from .evolution import BatchWalker, Trajectory, WalkConfig, dense_oracle, run, step
from .observables import ReducedDensity, bloch, entropy, moments, reduce, trace_distance
from .protocols import (REFERENCE_CONDITIONS, REFERENCE_SEQUENCE, CoinLabelSequence, evaluate_sequence,
                        search_best_sequence, worst_initial_condition)
from .state import SPIN_DOWN, SPIN_UP, XI1, XI2, SpinVector, WalkerState, gaussian, localized, two_site

__all__ = [
    "BatchWalker", "BinaryRandom", "CoinLabelSequence", "CoinParams", "ConditionGrid", "ContinuousRandom",
    "ContractError", "CrwEmulation", "DomainError", "EnsembleSpec", "EnsembleSummary", "ExplicitSequence",
    "FitResult", "Fixed", "REFERENCE_CONDITIONS", "REFERENCE_SEQUENCE", "PeriodicAlternating", "PeriodicSmooth",
    "ReducedDensity", "SPIN_DOWN", "SPIN_UP", "SeedSpec", "SpinVector", "Trajectory", "Uniform", "WalkConfig",
    "WalkerState", "XI1", "XI2", "asymptotic_range", "bloch", "build_grid", "check_unitary", "classify_regime",
    "coin_at", "coin_from_params", "coin_sequence", "dense_oracle", "derive_stream", "dispersion_exponent",
    "entropy", "evaluate_sequence", "fixed_exponent_prefactor", "gaussian", "localized", "loglog_fit",
    "moments", "named_coin", "reduce", "run", "run_ensemble", "search_best_sequence", "step", "trace_distance",
    "two_site", "worst_initial_condition",
]
