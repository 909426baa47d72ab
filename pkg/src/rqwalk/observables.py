"""Reduced spin state, entanglement entropy and position statistics.

The reduced spin state is carried by two numbers: ``alpha`` (total spin-up
weight) and ``gamma`` (the up-down coherence sum a(j) b*(j)), with
``beta = 1 - alpha``. The Bloch vector uses the normalization
rho = (1 + r . sigma) / 2, so |r| <= 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError
from .state import WalkerState

__all__ = [
    "ReducedDensity",
    "ObservableRecord",
    "reduce",
    "entropy",
    "entropy_values",
    "bloch",
    "trace_distance",
    "trace_distance_values",
    "moments",
]

PSD_TOL = 1e-12
CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class ReducedDensity:
    alpha: float
    gamma: complex

    def __post_init__(self):
        if not -PSD_TOL <= self.alpha <= 1 + PSD_TOL:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        det = self.alpha * (1.0 - self.alpha) - abs(self.gamma) ** 2
        if det < -PSD_TOL:
            raise DomainError(f"reduced density not positive semidefinite (det = {det:.3g})")

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha

    def matrix(self) -> np.ndarray:
        return np.array([[self.alpha, self.gamma],
                         [np.conj(self.gamma), 1.0 - self.alpha]], dtype=np.complex128)


@dataclass(frozen=True)
class ObservableRecord:
    """Per-step measurements; fields not requested for recording are None."""

    t: int
    S_E: float | None = None
    alpha: float | None = None
    gamma: complex | None = None
    bloch: tuple[float, float, float] | None = None
    mean_j: float | None = None
    variance: float | None = None
    trace_distance: float | None = None


def reduce(s: WalkerState) -> ReducedDensity:
    """Trace out position: alpha = sum |a|^2, gamma = sum a b*."""
    alpha = float(np.sum(s.up.real ** 2 + s.up.imag ** 2))
    gamma = complex(np.sum(s.up * np.conj(s.down)))
    return ReducedDensity(min(max(alpha, 0.0), 1.0), gamma)


def _xlog2x(x):
    safe = np.where(x > 0.0, x, 1.0)
    return np.where(x > 0.0, -x * np.log2(safe), 0.0)


def entropy_values(alpha, gamma) -> np.ndarray:
    """Vectorized von Neumann entropy (bits) of reduced states given by arrays."""
    alpha = np.asarray(alpha, dtype=np.float64)
    g2 = np.abs(np.asarray(gamma)) ** 2
    # eigenvalues 1/2 +- sqrt(1/4 - alpha(1 - alpha) + |gamma|^2); the radicand is (alpha - 1/2)^2 + |gamma|^2
    d = np.sqrt((alpha - 0.5) ** 2 + g2)
    lam_plus = 0.5 + d
    lam_minus = 0.5 - d
    if np.any(lam_minus < -CLAMP_TOL):
        worst = float(np.min(lam_minus))
        raise ContractError(f"reduced density has a negative eigenvalue {worst:.3g}")
    lam_plus = np.clip(lam_plus, 0.0, 1.0)
    lam_minus = np.clip(lam_minus, 0.0, 1.0)
    return np.clip(_xlog2x(lam_plus) + _xlog2x(lam_minus), 0.0, 1.0)


def entropy(rho: ReducedDensity) -> float:
    """Entanglement entropy S_E in bits: 0 for product states, 1 at maximum."""
    return float(entropy_values(rho.alpha, rho.gamma))


def bloch(rho: ReducedDensity) -> tuple[float, float, float]:
    """(r1, r2, r3) with r1 = 2 Re gamma, r2 = -2 Im gamma, r3 = 2 alpha - 1."""
    g = complex(rho.gamma)
    return (2.0 * g.real, -2.0 * g.imag, 2.0 * rho.alpha - 1.0)


def trace_distance(prev: ReducedDensity, curr: ReducedDensity) -> float:
    """Half the Euclidean distance between the two Bloch vectors."""
    dr = np.subtract(bloch(curr), bloch(prev))
    return float(0.5 * np.sqrt(np.dot(dr, dr)))


def trace_distance_values(alpha_prev, gamma_prev, alpha, gamma) -> np.ndarray:
    """Vectorized ``trace_distance`` on arrays of (alpha, gamma)."""
    dg = np.asarray(gamma) - np.asarray(gamma_prev)
    dr1 = 2.0 * dg.real
    dr2 = -2.0 * dg.imag
    dr3 = 2.0 * (np.asarray(alpha) - np.asarray(alpha_prev))
    return 0.5 * np.sqrt(dr1 * dr1 + dr2 * dr2 + dr3 * dr3)


def moments(s: WalkerState) -> tuple[float, float]:
    """Mean position and variance (sites^2) of P(j)."""
    p = np.abs(s.up) ** 2 + np.abs(s.down) ** 2
    j = s.sites.astype(np.float64)
    mean = float(np.sum(j * p))
    var = float(np.sum(j * j * p)) - mean * mean
    return mean, max(var, 0.0)
