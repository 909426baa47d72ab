"""Short-walk experiment design: worst-case initial spins for an ordered walk, random
H/F sequence search, and evaluation of a fixed sequence on localized spins."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coins import (ExplicitSequence, Fixed, SeedSpec, coin_sequence, derive_stream, is_deterministic,
                    named_coin)
from .errors import DomainError
from .ensemble import ConditionGrid, EnsembleSpec, build_grid, run_ensemble
from .evolution import BatchWalker
from .observables import entropy_values
from .state import SpinVector

__all__ = [
    "REFERENCE_SEQUENCE",
    "REFERENCE_CONDITIONS",
    "CoinLabelSequence",
    "worst_initial_condition",
    "evaluate_sequence",
    "entropy_trajectories",
    "search_best_sequence",
]

REFERENCE_SEQUENCE = "HHFHFFHFHFFHFHFHFFHFFHHFHFHH"

REFERENCE_CONDITIONS = (
    (2.7, math.pi),
    (2.7, -math.pi),
    (2.7, 0.0),
    (2.7, math.pi / 2),
    (2.7, -math.pi / 2),
)

_ALPHABET = {"H": "hadamard", "F": "fourier"}


@dataclass(frozen=True)
class CoinLabelSequence:
    """A sequence over {H, F}, first label applied first."""

    labels: str

    def __post_init__(self):
        labels = "".join(str(self.labels).split()).upper()
        if not labels:
            raise DomainError("coin label sequence must not be empty")
        bad = sorted(set(labels) - set(_ALPHABET))
        if bad:
            raise DomainError(f"unknown coin labels {bad}; alphabet is H, F")
        object.__setattr__(self, "labels", labels)

    def __str__(self) -> str:
        return self.labels

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def from_text(cls, text: str) -> "CoinLabelSequence":
        return cls(text)

    def policy(self) -> ExplicitSequence:
        return ExplicitSequence.from_labels(self.labels)


def _localized_batch(conditions, steps):
    spins = [SpinVector.from_angles(a, b) for a, b in conditions]
    up = np.array([[s.amp_up] for s in spins])
    down = np.array([[s.amp_down] for s in spins])
    return BatchWalker(up, down, 0, steps)


def entropy_trajectories(coins: np.ndarray, conditions) -> np.ndarray:
    """S_E after each step for localized spins at j = 0, shape (len(conditions), steps).

    ``coins`` is a (steps, 2, 2) sequence shared by all conditions.
    """
    coins = np.asarray(coins, dtype=np.complex128)
    steps = coins.shape[0]
    walker = _localized_batch(conditions, steps)
    out = np.empty((len(conditions), steps))
    for t in range(steps):
        walker.advance(coins[t])
        out[:, t] = entropy_values(walker.alpha, walker.gamma)
    return out


def evaluate_sequence(seq: CoinLabelSequence | str, conditions) -> list[float]:
    """S_E at step len(seq) for each localized spin (alpha_s, beta_s) at j = 0."""
    if not isinstance(seq, CoinLabelSequence):
        seq = CoinLabelSequence(seq)
    coins = coin_sequence(seq.policy(), len(seq))
    return entropy_trajectories(coins, list(conditions))[:, -1].tolist()


def worst_initial_condition(coin: Fixed, grid: ConditionGrid | None = None,
                            n: int = 28) -> tuple[float, float, float]:
    """Localized spin (alpha_s, beta_s) of smallest S_E at step ``n``.

    ``grid`` is a ``localized_spin`` grid (default increment 0.1) or a list
    of (alpha_s, beta_s) pairs. The first member in grid order wins ties.
    """
    if not is_deterministic(coin):
        raise DomainError("worst_initial_condition needs a deterministic policy")
    if grid is None:
        grid = build_grid("localized_spin", increment=0.1)
    if isinstance(grid, ConditionGrid):
        if grid.kind != "localized_spin":
            raise DomainError(f"expected a localized_spin grid, got {grid.kind!r}")
        final = run_ensemble(EnsembleSpec(grid, coin, n)).final_S_E
        members = grid.members
    else:
        members = [tuple(map(float, c)) for c in grid]
        if not members:
            raise DomainError("empty grid")
        final = entropy_trajectories(coin_sequence(coin, n), members)[:, -1]
    k = int(np.argmin(final))
    return members[k][0], members[k][1], float(final[k])


def _trial_labels(trial: int, n: int, p: float, seed: int) -> np.ndarray:
    rng = derive_stream(SeedSpec(seed, trial))
    return rng.random(n) < p


def search_best_sequence(trials: int, n: int, p: float, target_condition, seed: int,
                         batch: int = 4096) -> tuple[CoinLabelSequence, float]:
    """Best of ``trials`` random H/F sequences for one localized spin.

    Trial ``k`` draws its ``n`` labels from ``SeedSpec(seed, k)`` (H when
    u < p), so the trial list is prefix-stable: raising ``trials`` never
    changes earlier trials. The first maximal trial wins.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p!r}")
    H, F = named_coin("hadamard"), named_coin("fourier")
    best_k, best_S = -1, -np.inf
    for start in range(0, trials, batch):
        ks = range(start, min(start + batch, trials))
        flags = np.array([_trial_labels(k, n, p, seed) for k in ks])
        coins = np.where(flags[:, :, None, None], H, F)
        walker = _localized_batch([target_condition] * len(ks), n)
        for t in range(n):
            walker.advance(np.ascontiguousarray(coins[:, t]))
        S = entropy_values(walker.alpha, walker.gamma)
        k = int(np.argmax(S))
        if S[k] > best_S:
            best_k, best_S = start + k, float(S[k])
    labels = "".join("H" if f else "F" for f in _trial_labels(best_k, n, p, seed))
    return CoinLabelSequence(labels), best_S
