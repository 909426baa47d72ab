"""Walker states: spin-up/spin-down amplitudes on a contiguous window of sites."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "WalkerState",
    "SpinVector",
    "SPIN_UP",
    "SPIN_DOWN",
    "XI1",
    "XI2",
    "spin_by_name",
    "localized",
    "two_site",
    "gaussian",
    "position_distribution",
]


@dataclass(eq=False)
class WalkerState:
    """Amplitudes ``up[k] = a(j_min + k, t)`` and ``down[k] = b(j_min + k, t)``."""

    j_min: int
    up: np.ndarray
    down: np.ndarray
    t: int = 0

    def __post_init__(self):
        self.up = np.ascontiguousarray(self.up, dtype=np.complex128)
        self.down = np.ascontiguousarray(self.down, dtype=np.complex128)
        if self.up.ndim != 1 or self.up.shape != self.down.shape or self.up.size < 1:
            raise DomainError("up and down must be 1-D arrays of equal, non-zero length")
        self.j_min = int(self.j_min)

    @property
    def width(self) -> int:
        return self.up.size

    @property
    def j_max(self) -> int:
        return self.j_min + self.width - 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.up) ** 2) + np.sum(np.abs(self.down) ** 2))

    def copy(self) -> "WalkerState":
        return WalkerState(self.j_min, self.up.copy(), self.down.copy(), self.t)

    def padded(self, j_lo: int, j_hi: int) -> "WalkerState":
        """Same state on the larger window [j_lo, j_hi]."""
        if j_lo > self.j_min or j_hi < self.j_max:
            raise DomainError(f"window [{j_lo}, {j_hi}] does not contain [{self.j_min}, {self.j_max}]")
        up = np.zeros(j_hi - j_lo + 1, dtype=np.complex128)
        down = np.zeros_like(up)
        k = self.j_min - j_lo
        up[k:k + self.width] = self.up
        down[k:k + self.width] = self.down
        return WalkerState(j_lo, up, down, self.t)

    def to_csv(self, path) -> None:
        """Debug dump, one row per site: j, Re a, Im a, Re b, Im b."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "re_a", "im_a", "re_b", "im_b"])
            for j, x, y in zip(self.sites, self.up, self.down):
                w.writerow([int(j), repr(x.real), repr(x.imag), repr(y.real), repr(y.imag)])


@dataclass(frozen=True)
class SpinVector:
    amp_up: complex
    amp_down: complex

    def __post_init__(self):
        n = abs(self.amp_up) ** 2 + abs(self.amp_down) ** 2
        if abs(n - 1.0) > 1e-12:
            raise DomainError(f"spin vector not normalized (|up|^2 + |down|^2 = {n!r})")

    @classmethod
    def from_angles(cls, alpha_s: float, beta_s: float) -> "SpinVector":
        """cos(alpha_s)|up> + e^{i beta_s} sin(alpha_s)|down>."""
        phase = complex(math.cos(beta_s), math.sin(beta_s))
        return cls(complex(math.cos(alpha_s)), phase * math.sin(alpha_s))


_R = 1.0 / math.sqrt(2.0)
SPIN_UP = SpinVector(1.0, 0.0)
SPIN_DOWN = SpinVector(0.0, 1.0)
XI1 = SpinVector(_R, 1j * _R)
XI2 = SpinVector(_R, _R)

_SPINS = {"up": SPIN_UP, "down": SPIN_DOWN, "xi1": XI1, "xi2": XI2}


def spin_by_name(name: str) -> SpinVector:
    try:
        return _SPINS[str(name).lower()]
    except KeyError:
        raise DomainError(f"unknown spin {name!r}; expected one of {sorted(_SPINS)}") from None


def localized(spin: SpinVector, j0: int = 0) -> WalkerState:
    return WalkerState(j0, np.array([spin.amp_up]), np.array([spin.amp_down]))


def two_site(alpha_s: float, beta_s: float, alpha_p: float, beta_p: float) -> WalkerState:
    """Product of the spin (alpha_s, beta_s) and cos(alpha_p)|-1> + e^{i beta_p} sin(alpha_p)|+1>."""
    spin = SpinVector.from_angles(alpha_s, beta_s)
    pos = np.array([math.cos(alpha_p), 0.0, complex(math.cos(beta_p), math.sin(beta_p)) * math.sin(alpha_p)])
    return WalkerState(-1, spin.amp_up * pos, spin.amp_down * pos)


def gaussian(spin: SpinVector, sigma: float, cutoff: int | None = None) -> WalkerState:
    """Spin times a discretized Gaussian: psi(j)^2 proportional to exp(-j^2 / (2 sigma^2)).

    The profile is truncated to ``|j| <= cutoff`` (default ``ceil(6 sigma)``)
    and renormalized after truncation.
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")
    if cutoff is None:
        cutoff = math.ceil(6 * sigma)
    if cutoff < math.ceil(6 * sigma):
        raise DomainError(f"cutoff {cutoff} below ceil(6 sigma) = {math.ceil(6 * sigma)}")
    j = np.arange(-cutoff, cutoff + 1, dtype=np.float64)
    psi = np.exp(-j * j / (4.0 * sigma * sigma))
    psi /= math.sqrt(math.fsum(psi * psi))
    return WalkerState(-cutoff, spin.amp_up * psi, spin.amp_down * psi)


def position_distribution(s: WalkerState) -> dict[int, float]:
    """P(j) = |a(j)|^2 + |b(j)|^2 for every site of the window."""
    p = np.abs(s.up) ** 2 + np.abs(s.down) ** 2
    return {int(j): float(x) for j, x in zip(s.sites, p)}
