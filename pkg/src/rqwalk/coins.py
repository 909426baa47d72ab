"""Coin operators and per-step coin policies.

Every coin is a 2x2 ``complex128`` array indexed ``[out_spin, in_spin]`` with
spin order (up, down). The three-angle family is

    [[ sqrt(q),                 sqrt(1-q) e^{i theta}          ],
     [ sqrt(1-q) e^{i phi},    -sqrt(q)   e^{i (theta + phi)}  ]]

Random policies draw from a per-realization ``numpy.random.Generator``. The
number of uniforms consumed per step is fixed so that two runs with the same
seed replay the same coins:

- ``BinaryRandom``: 1 uniform, ``c1`` when ``u < p``
- ``ContinuousRandom``: 1 uniform per non-fixed parameter, order q, theta, phi
- ``CrwEmulation``: 1 uniform, heads when ``u < p``
- deterministic policies: 0
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ContractError, DomainError

__all__ = [
    "CoinParams",
    "SeedSpec",
    "Uniform",
    "Fixed",
    "BinaryRandom",
    "ContinuousRandom",
    "PeriodicSmooth",
    "PeriodicAlternating",
    "ExplicitSequence",
    "CrwEmulation",
    "CoinPolicy",
    "GENERATOR_NAME",
    "coin_from_params",
    "named_coin",
    "coin_at",
    "coin_sequence",
    "derive_stream",
    "check_unitary",
    "is_deterministic",
    "describe_policy",
]

TWO_PI = 2.0 * math.pi
UNITARY_TOL = 1e-12

GENERATOR_NAME = "numpy.PCG64(SeedSequence(entropy=master_seed, spawn_key=(realization_index,)))"


@dataclass(frozen=True)
class CoinParams:
    """Bias ``q`` and phases ``theta``, ``phi`` (radians) of an SU(2) coin."""

    q: float
    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise DomainError(f"q must lie in [0, 1], got {self.q!r}")
        for name in ("theta", "phi"):
            value = getattr(self, name)
            if not 0.0 <= value < TWO_PI:
                raise DomainError(f"{name} must lie in [0, 2*pi), got {value!r}")


def _coin_entries(q, theta, phi) -> np.ndarray:
    """Coins for arrays of parameters; output shape ``q.shape + (2, 2)``."""
    q = np.asarray(q, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    sq = np.sqrt(q)
    sp = np.sqrt(1.0 - q)
    out = np.empty(np.broadcast(q, theta, phi).shape + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = sq
    out[..., 0, 1] = sp * (np.cos(theta) + 1j * np.sin(theta))
    out[..., 1, 0] = sp * (np.cos(phi) + 1j * np.sin(phi))
    out[..., 1, 1] = -sq * (np.cos(theta + phi) + 1j * np.sin(theta + phi))
    return out


def coin_from_params(p: CoinParams) -> np.ndarray:
    """Return the coin of the three-angle family for ``p``.

    Examples
    --------
    >>> np.allclose(coin_from_params(CoinParams(0.5, 0.0, 0.0)),
    ...             np.array([[1, 1], [1, -1]]) / np.sqrt(2))
    True
    """
    if not isinstance(p, CoinParams):
        raise DomainError(f"expected CoinParams, got {type(p).__name__}")
    return _coin_entries(p.q, p.theta, p.phi)


_S = 1.0 / math.sqrt(2.0)
_NAMED = {
    "hadamard": np.array([[_S, _S], [_S, -_S]], dtype=np.complex128),
    "fourier": np.array([[_S, 1j * _S], [1j * _S, _S]], dtype=np.complex128),
    "sigma1": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "identity": np.eye(2, dtype=np.complex128),
}
_ALIASES = {"h": "hadamard", "f": "fourier", "x": "sigma1", "i": "identity", "kempe": "fourier"}


def named_coin(name: str) -> np.ndarray:
    """Return a fresh copy of a named coin.

    ``name`` is one of ``hadamard``, ``fourier``, ``sigma1``, ``identity``
    (case-insensitive; the one-letter labels H, F, X, I are accepted too).
    ``identity`` is the true identity, which the three-angle family only
    reaches up to a relative phase.
    """
    key = str(name).strip().lower()
    key = _ALIASES.get(key, key)
    try:
        return _NAMED[key].copy()
    except KeyError:
        raise DomainError(f"unknown coin name {name!r}; expected one of {sorted(_NAMED)}") from None


def check_unitary(c: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    """Return ``c`` as a complex 2x2 array, raising ContractError unless unitary."""
    c = np.asarray(c, dtype=np.complex128)
    if c.shape != (2, 2):
        raise ContractError(f"coin must be 2x2, got shape {c.shape}")
    err = np.abs(c.conj().T @ c - np.eye(2)).max()
    if not err <= tol:
        raise ContractError(f"coin is not unitary (max |C^dag C - 1| = {err:.3g})")
    return c


# -- policies ---------------------------------------------------------------


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float


ParamSpec = Union[float, Uniform]


@dataclass(frozen=True, eq=False)
class Fixed:
    coin: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coin", check_unitary(self.coin))


@dataclass(frozen=True, eq=False)
class BinaryRandom:
    """``c1`` with probability ``p`` at each step, otherwise ``c2``."""

    c1: np.ndarray
    c2: np.ndarray
    p: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "c1", check_unitary(self.c1))
        object.__setattr__(self, "c2", check_unitary(self.c2))
        _check_probability(self.p, "p")


@dataclass(frozen=True)
class ContinuousRandom:
    """Each parameter either fixed or drawn uniformly at every step.

    Defaults are q in [0, 1], theta in [0, pi], phi in [0, 2 pi].
    """

    q: ParamSpec = Uniform(0.0, 1.0)
    theta: ParamSpec = Uniform(0.0, math.pi)
    phi: ParamSpec = Uniform(0.0, TWO_PI)

    def __post_init__(self):
        _check_param("q", self.q, 1.0, closed=True)
        _check_param("theta", self.theta, TWO_PI, closed=False)
        _check_param("phi", self.phi, TWO_PI, closed=False)

    @property
    def random_params(self) -> tuple[str, ...]:
        return tuple(n for n in ("q", "theta", "phi") if isinstance(getattr(self, n), Uniform))


@dataclass(frozen=True)
class PeriodicSmooth:
    """q = 1/2 and theta = phi = (pi/2)|sin(pi t / T)|, sweeping Hadamard to Fourier."""

    T: int

    def __post_init__(self):
        _check_period(self.T)


@dataclass(frozen=True)
class PeriodicAlternating:
    """Hadamard on the first step of every period of ``T`` steps, Fourier on the rest."""

    T: int

    def __post_init__(self):
        _check_period(self.T)


@dataclass(frozen=True, eq=False)
class ExplicitSequence:
    coins: tuple = field(default_factory=tuple)
    labels: str | None = None

    def __post_init__(self):
        coins = tuple(check_unitary(c) for c in self.coins)
        if not coins:
            raise DomainError("explicit sequence must contain at least one coin")
        object.__setattr__(self, "coins", coins)

    @classmethod
    def from_labels(cls, labels: str) -> "ExplicitSequence":
        labels = "".join(str(labels).split())
        return cls(tuple(named_coin(ch) for ch in labels), labels=labels.upper())

    def __len__(self) -> int:
        return len(self.coins)


@dataclass(frozen=True)
class CrwEmulation:
    """Classical walk embedded in the coin: heads (prob ``p``) moves right.

    The coin is the identity or the spin flip depending on the walker's
    current definite spin.
    """

    p: float = 0.5

    def __post_init__(self):
        _check_probability(self.p, "p")


CoinPolicy = Union[Fixed, BinaryRandom, ContinuousRandom, PeriodicSmooth,
                   PeriodicAlternating, ExplicitSequence, CrwEmulation]


def _check_probability(p, name):
    if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {p!r}")


def _check_period(T):
    if isinstance(T, bool) or not isinstance(T, (int, np.integer)) or T < 1:
        raise DomainError(f"period T must be a positive integer, got {T!r}")


def _check_param(name, spec, upper, closed):
    def legal(v):
        return 0.0 <= v <= upper if closed else 0.0 <= v < upper

    if isinstance(spec, Uniform):
        if not spec.lo <= spec.hi:
            raise DomainError(f"{name}: uniform range needs lo <= hi, got [{spec.lo}, {spec.hi}]")
        if not (0.0 <= spec.lo and spec.hi <= upper):
            raise DomainError(f"{name}: uniform range [{spec.lo}, {spec.hi}] outside [0, {upper:g}]")
    elif not (isinstance(spec, (int, float)) and legal(spec)):
        raise DomainError(f"{name}: fixed value {spec!r} outside its legal interval")


def is_deterministic(policy: CoinPolicy) -> bool:
    if isinstance(policy, (Fixed, PeriodicSmooth, PeriodicAlternating, ExplicitSequence)):
        return True
    if isinstance(policy, ContinuousRandom):
        return not policy.random_params
    return False


def _periodic_smooth_theta(t, T):
    return 0.5 * math.pi * np.abs(np.sin(math.pi * np.asarray(t, dtype=np.float64) / T))


def coin_at(policy: CoinPolicy, t: int, rng: np.random.Generator | None = None,
            spin_hint: str | None = None) -> np.ndarray:
    """Coin applied at step ``t`` (t >= 1), drawing from ``rng`` if the policy is random.

    ``spin_hint`` (``"up"`` or ``"down"``) is required by ``CrwEmulation``.
    """
    if t < 1:
        raise DomainError(f"step index starts at 1, got {t}")
    if isinstance(policy, Fixed):
        return policy.coin.copy()
    if isinstance(policy, PeriodicSmooth):
        th = _periodic_smooth_theta(t, policy.T)
        return _coin_entries(0.5, th, th)
    if isinstance(policy, PeriodicAlternating):
        return named_coin("hadamard" if (t - 1) % policy.T == 0 else "fourier")
    if isinstance(policy, ExplicitSequence):
        if t > len(policy.coins):
            raise DomainError(f"explicit sequence has {len(policy.coins)} coins, step {t} requested")
        return policy.coins[t - 1].copy()
    if rng is None:
        raise DomainError(f"{type(policy).__name__} needs a random stream")
    if isinstance(policy, BinaryRandom):
        u = rng.random()
        return (policy.c1 if u < policy.p else policy.c2).copy()
    if isinstance(policy, ContinuousRandom):
        values = {}
        for name in ("q", "theta", "phi"):
            spec = getattr(policy, name)
            values[name] = spec.lo + (spec.hi - spec.lo) * rng.random() if isinstance(spec, Uniform) else spec
        return _coin_entries(values["q"], values["theta"], values["phi"])
    if isinstance(policy, CrwEmulation):
        if spin_hint not in ("up", "down"):
            raise ContractError("CrwEmulation needs the walker in a definite spin state", step=t)
        heads = rng.random() < policy.p
        return _crw_coin(heads, spin_hint == "up")
    raise DomainError(f"unknown policy type {type(policy).__name__}")


def _crw_coin(heads: bool, spin_up: bool) -> np.ndarray:
    # moving right means ending in spin up
    return named_coin("identity" if heads == spin_up else "sigma1")


def coin_sequence(policy: CoinPolicy, steps: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Coins for steps 1..``steps`` as a ``(steps, 2, 2)`` array.

    Consumes ``rng`` exactly as ``steps`` successive ``coin_at`` calls would.
    Not available for ``CrwEmulation``, whose coin depends on the walker.
    """
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")
    t = np.arange(1, steps + 1)
    if isinstance(policy, Fixed):
        return np.broadcast_to(policy.coin, (steps, 2, 2)).copy()
    if isinstance(policy, PeriodicSmooth):
        th = _periodic_smooth_theta(t, policy.T)
        return _coin_entries(np.full(steps, 0.5), th, th)
    if isinstance(policy, PeriodicAlternating):
        first = ((t - 1) % policy.T == 0)[:, None, None]
        return np.where(first, _NAMED["hadamard"], _NAMED["fourier"])
    if isinstance(policy, ExplicitSequence):
        if steps > len(policy.coins):
            raise DomainError(f"explicit sequence has {len(policy.coins)} coins, {steps} steps requested")
        return np.array(policy.coins[:steps])
    if rng is None:
        raise DomainError(f"{type(policy).__name__} needs a random stream")
    if isinstance(policy, BinaryRandom):
        u = rng.random(steps)
        return np.where((u < policy.p)[:, None, None], policy.c1, policy.c2)
    if isinstance(policy, ContinuousRandom):
        names = policy.random_params
        u = rng.random((steps, len(names))) if names else np.empty((steps, 0))
        values = {}
        for name in ("q", "theta", "phi"):
            spec = getattr(policy, name)
            if isinstance(spec, Uniform):
                values[name] = spec.lo + (spec.hi - spec.lo) * u[:, names.index(name)]
            else:
                values[name] = np.full(steps, float(spec))
        return _coin_entries(values["q"], values["theta"], values["phi"])
    if isinstance(policy, CrwEmulation):
        raise DomainError("CrwEmulation coins depend on the walker's spin; use crw_heads()")
    raise DomainError(f"unknown policy type {type(policy).__name__}")


def crw_heads(policy: CrwEmulation, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Heads flags for steps 1..``steps`` (same draws as successive ``coin_at`` calls)."""
    return rng.random(steps) < policy.p


# -- seeding ----------------------------------------------------------------


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    realization_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise DomainError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if int(self.realization_index) < 0:
            raise DomainError(f"realization_index must be >= 0, got {self.realization_index}")


def derive_stream(seed: SeedSpec) -> np.random.Generator:
    """Independent PCG64 stream for one realization.

    The pair (master_seed, realization_index) is hashed by numpy's
    SeedSequence, with the index as spawn key, which is the documented way to
    obtain statistically independent child streams.
    """
    ss = np.random.SeedSequence(int(seed.master_seed), spawn_key=(int(seed.realization_index),))
    return np.random.Generator(np.random.PCG64(ss))


def describe_policy(policy: CoinPolicy) -> dict:
    """JSON-friendly description, used in run metadata."""
    def coin_repr(c):
        for name, m in _NAMED.items():
            if np.array_equal(c, m):
                return name
        return [[[z.real, z.imag] for z in row] for row in np.asarray(c)]

    def spec_repr(s):
        return [s.lo, s.hi] if isinstance(s, Uniform) else s

    if isinstance(policy, Fixed):
        return {"kind": "fixed", "coin": coin_repr(policy.coin)}
    if isinstance(policy, BinaryRandom):
        return {"kind": "binary", "c1": coin_repr(policy.c1), "c2": coin_repr(policy.c2), "p": policy.p}
    if isinstance(policy, ContinuousRandom):
        return {"kind": "continuous", "q": spec_repr(policy.q), "theta": spec_repr(policy.theta),
                "phi": spec_repr(policy.phi)}
    if isinstance(policy, PeriodicSmooth):
        return {"kind": "periodic-smooth", "T": policy.T}
    if isinstance(policy, PeriodicAlternating):
        return {"kind": "periodic-alternating", "T": policy.T}
    if isinstance(policy, ExplicitSequence):
        if policy.labels is not None:
            return {"kind": "sequence", "sequence": policy.labels}
        return {"kind": "sequence", "coins": [coin_repr(c) for c in policy.coins]}
    if isinstance(policy, CrwEmulation):
        return {"kind": "crw-emulation", "p": policy.p}
    raise DomainError(f"unknown policy type {type(policy).__name__}")
