"""Time evolution: the amplitude recurrence, trajectories and a dense-matrix oracle.

One step applies the coin to the spin at every site and then shifts spin up
one site right and spin down one site left:

    a(j, t) = c_uu a(j-1, t-1) + c_ud b(j-1, t-1)
    b(j, t) = c_du a(j+1, t-1) + c_dd b(j+1, t-1)

``BatchWalker`` advances many walkers that share a lattice window in lock
step. Its kernel visits each row sequentially, so a walker's numbers do not
depend on which other walkers share its batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .coins import (CoinPolicy, CrwEmulation, ExplicitSequence, SeedSpec, check_unitary, coin_at,
                    derive_stream)
from .errors import ContractError, DomainError
from .observables import ObservableRecord, entropy_values, trace_distance_values
from .state import WalkerState

__all__ = [
    "BatchWalker",
    "WalkConfig",
    "Trajectory",
    "RECORDABLE",
    "step",
    "run",
    "dense_oracle",
    "definite_spin",
]

RECORDABLE = ("S_E", "alpha", "gamma", "bloch", "moments", "trace_distance")
NORM_TOL = 1e-10
SPIN_TOL = 1e-12
ORACLE_MAX_STEPS = 10


@njit(cache=True)
def _step_kernel(a, b, na, nb, lo, hi, coins, origin, out):  # pragma: no cover - compiled
    m = a.shape[0]
    shared = coins.shape[0] == 1
    for r in range(m):
        k = 0 if shared else r
        cuu = coins[k, 0, 0]
        cud = coins[k, 0, 1]
        cdu = coins[k, 1, 0]
        cdd = coins[k, 1, 1]
        na[r, lo - 1] = 0.0
        na[r, lo] = 0.0
        nb[r, hi - 1] = 0.0
        nb[r, hi] = 0.0
        for c in range(lo + 1, hi + 1):
            na[r, c] = cuu * a[r, c - 1] + cud * b[r, c - 1]
        for c in range(lo - 1, hi - 1):
            nb[r, c] = cdu * a[r, c + 1] + cdd * b[r, c + 1]
        alpha = 0.0
        beta = 0.0
        g_re = 0.0
        g_im = 0.0
        s1 = 0.0
        s2 = 0.0
        for c in range(lo - 1, hi + 1):
            x = na[r, c]
            y = nb[r, c]
            pa = x.real * x.real + x.imag * x.imag
            pb = y.real * y.real + y.imag * y.imag
            alpha += pa
            beta += pb
            # a b*
            g_re += x.real * y.real + x.imag * y.imag
            g_im += x.imag * y.real - x.real * y.imag
            j = origin + c
            p = pa + pb
            s1 += j * p
            s2 += j * j * p
        out[r, 0] = alpha
        out[r, 1] = beta
        out[r, 2] = g_re
        out[r, 3] = g_im
        out[r, 4] = s1
        out[r, 5] = s2


class BatchWalker:
    """``m`` walkers on a common window, with room for ``capacity`` steps.

    After each ``advance`` the arrays ``alpha``, ``beta``, ``gamma``,
    ``mean_j`` and ``variance`` hold the per-walker observables of the new
    state. Buffers are allocated once; the window grows by one site per side
    per step inside them.
    """

    def __init__(self, up, down, j_min: int, capacity: int):
        up = np.atleast_2d(np.asarray(up, dtype=np.complex128))
        down = np.atleast_2d(np.asarray(down, dtype=np.complex128))
        if up.shape != down.shape:
            raise DomainError("up and down must have the same shape")
        if capacity < 0:
            raise DomainError("capacity must be non-negative")
        m, w = up.shape
        self.capacity = int(capacity)
        width = w + 2 * self.capacity + 2
        self._a = np.zeros((m, width), dtype=np.complex128)
        self._b = np.zeros_like(self._a)
        self._na = np.zeros_like(self._a)
        self._nb = np.zeros_like(self._a)
        self._lo = self.capacity + 1
        self._hi = self._lo + w
        self._a[:, self._lo:self._hi] = up
        self._b[:, self._lo:self._hi] = down
        self._origin = int(j_min) - self._lo
        self._out = np.zeros((m, 6))
        self.t = 0
        self.alpha = np.sum(up.real ** 2 + up.imag ** 2, axis=1)
        self.beta = np.sum(down.real ** 2 + down.imag ** 2, axis=1)
        self.gamma = np.sum(up * down.conj(), axis=1)
        p = up.real ** 2 + up.imag ** 2 + down.real ** 2 + down.imag ** 2
        j = np.arange(j_min, j_min + w, dtype=np.float64)
        self.mean_j = np.sum(p * j, axis=1)
        self.variance = np.maximum(np.sum(p * j * j, axis=1) - self.mean_j ** 2, 0.0)

    @property
    def size(self) -> int:
        return self._a.shape[0]

    @property
    def j_min(self) -> int:
        return self._origin + self._lo

    @property
    def up(self) -> np.ndarray:
        return self._a[:, self._lo:self._hi]

    @property
    def down(self) -> np.ndarray:
        return self._b[:, self._lo:self._hi]

    @property
    def norm(self) -> np.ndarray:
        return self.alpha + self.beta

    def advance(self, coins) -> None:
        """Apply one step; ``coins`` is one (2, 2) coin or one per walker, (m, 2, 2)."""
        if self.t >= self.capacity:
            raise DomainError(f"walker capacity of {self.capacity} steps exhausted")
        coins = np.asarray(coins, dtype=np.complex128)
        if coins.ndim == 2:
            coins = coins[None]
        if coins.shape[1:] != (2, 2) or coins.shape[0] not in (1, self.size):
            raise DomainError(f"coins must have shape (2, 2) or ({self.size}, 2, 2), got {coins.shape}")
        _step_kernel(self._a, self._b, self._na, self._nb, self._lo, self._hi,
                     np.ascontiguousarray(coins), float(self._origin), self._out)
        self._a, self._na = self._na, self._a
        self._b, self._nb = self._nb, self._b
        self._lo -= 1
        self._hi += 1
        self.t += 1
        out = self._out
        self.alpha = out[:, 0].copy()
        self.beta = out[:, 1].copy()
        self.gamma = out[:, 2] + 1j * out[:, 3]
        self.mean_j = out[:, 4].copy()
        self.variance = np.maximum(out[:, 5] - out[:, 4] ** 2, 0.0)

    def state(self, row: int = 0, t0: int = 0) -> WalkerState:
        return WalkerState(self.j_min, self.up[row].copy(), self.down[row].copy(), t0 + self.t)

    def distribution(self) -> np.ndarray:
        """P(j) per walker over the current window, shape (m, width)."""
        a, b = self.up, self.down
        return a.real ** 2 + a.imag ** 2 + b.real ** 2 + b.imag ** 2


def definite_spin(alpha: float, tol: float = SPIN_TOL) -> str | None:
    """'up' or 'down' when the spin-up weight is 1 or 0 within ``tol``, else None."""
    if alpha >= 1.0 - tol:
        return "up"
    if alpha <= tol:
        return "down"
    return None


def step(s: WalkerState, c) -> WalkerState:
    """One step of the walk under coin ``c``; the window grows by one site per side."""
    c = check_unitary(c)
    w = BatchWalker(s.up, s.down, s.j_min, 1)
    w.advance(c)
    return w.state(0, s.t)


@dataclass
class WalkConfig:
    initial: WalkerState
    policy: CoinPolicy
    steps: int
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(0, 0))
    record: tuple[str, ...] = RECORDABLE

    def __post_init__(self):
        if int(self.steps) < 1:
            raise DomainError(f"steps must be >= 1, got {self.steps}")
        if isinstance(self.policy, ExplicitSequence) and len(self.policy) < self.steps:
            raise DomainError(f"explicit sequence has {len(self.policy)} coins, {self.steps} steps requested")
        unknown = set(self.record) - set(RECORDABLE)
        if unknown:
            raise DomainError(f"unknown observables {sorted(unknown)}; choose from {RECORDABLE}")


@dataclass
class Trajectory:
    records: list[ObservableRecord]
    final: WalkerState

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def run(cfg: WalkConfig) -> Trajectory:
    """Apply ``coin_at`` then ``step`` for t = 1..n, recording observables after each step."""
    s0 = cfg.initial
    walker = BatchWalker(s0.up, s0.down, s0.j_min, cfg.steps)
    rng = derive_stream(cfg.seed)
    record = set(cfg.record)
    norm0 = float(walker.norm[0])
    alpha_prev, gamma_prev = walker.alpha[0], walker.gamma[0]
    records = []
    for t in range(1, cfg.steps + 1):
        hint = definite_spin(alpha_prev / norm0) if isinstance(cfg.policy, CrwEmulation) else None
        try:
            c = coin_at(cfg.policy, t, rng, spin_hint=hint)
        except ContractError as exc:
            raise exc.located(step=t) from None
        except DomainError as exc:
            raise DomainError(f"step {t}: {exc}") from None
        walker.advance(c)
        drift = abs(walker.norm[0] - norm0)
        if drift > NORM_TOL:
            raise ContractError(f"norm drifted by {drift:.3g}", step=t)
        alpha, gamma = float(walker.alpha[0]), complex(walker.gamma[0])
        rec = {"t": s0.t + t}
        if "S_E" in record:
            rec["S_E"] = float(entropy_values(alpha, gamma))
        if "alpha" in record:
            rec["alpha"] = alpha
        if "gamma" in record:
            rec["gamma"] = gamma
        if "bloch" in record:
            rec["bloch"] = (2.0 * gamma.real, -2.0 * gamma.imag, 2.0 * alpha - 1.0)
        if "moments" in record:
            rec["mean_j"] = float(walker.mean_j[0])
            rec["variance"] = float(walker.variance[0])
        if "trace_distance" in record:
            rec["trace_distance"] = float(trace_distance_values(alpha_prev, gamma_prev, alpha, gamma))
        records.append(ObservableRecord(**rec))
        alpha_prev, gamma_prev = alpha, gamma
    return Trajectory(records, walker.state(0, s0.t))


def _shift_matrix(width: int) -> np.ndarray:
    # basis index 2*k + spin over sites k = 0..width-1; spin up moves right
    dim = 2 * width
    s = np.zeros((dim, dim), dtype=np.complex128)
    for k in range(width):
        if k + 1 < width:
            s[2 * (k + 1), 2 * k] = 1.0
        if k - 1 >= 0:
            s[2 * (k - 1) + 1, 2 * k + 1] = 1.0
    return s


def dense_oracle(cfg: WalkConfig) -> WalkerState:
    """Reference evolution by explicit matrices S (1_P x C) on a truncated lattice.

    Only for small step counts; shares nothing with ``BatchWalker`` except the
    coin stream.
    """
    n = int(cfg.steps)
    if n > ORACLE_MAX_STEPS:
        raise DomainError(f"dense oracle limited to {ORACLE_MAX_STEPS} steps, got {n}")
    s0 = cfg.initial
    lo = s0.j_min - n
    width = s0.width + 2 * n
    psi = np.zeros(2 * width, dtype=np.complex128)
    psi[2 * n:2 * (n + s0.width):2] = s0.up
    psi[2 * n + 1:2 * (n + s0.width):2] = s0.down
    shift = _shift_matrix(width)
    eye = np.eye(width)
    rng = derive_stream(cfg.seed)
    for t in range(1, n + 1):
        hint = None
        if isinstance(cfg.policy, CrwEmulation):
            hint = definite_spin(float(np.vdot(psi[0::2], psi[0::2]).real))
        c = coin_at(cfg.policy, t, rng, spin_hint=hint)
        psi = shift @ (np.kron(eye, c) @ psi)
    return WalkerState(lo, psi[0::2].copy(), psi[1::2].copy(), s0.t + n)
