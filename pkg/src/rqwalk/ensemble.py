"""Initial-condition grids and ensemble runs with deterministic aggregation.

Members are (condition, realization) pairs. Realization ``r`` of the
condition with grid index ``i`` draws its coins from
``SeedSpec(master_seed, i * realizations_per_condition + r)``. Subsampled
grids keep the original indices, so a subsampled run reproduces the
corresponding members of the full run exactly.

Members are processed in fixed-size chunks whose partial sums are merged in
chunk order, so results do not depend on the number of worker processes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .coins import (CoinPolicy, CrwEmulation, SeedSpec, coin_sequence, crw_heads, derive_stream,
                    describe_policy, is_deterministic)
from .errors import ContractError, DomainError
from .evolution import NORM_TOL, SPIN_TOL, BatchWalker
from .observables import entropy_values, trace_distance_values
from .state import SpinVector, WalkerState, gaussian, localized, spin_by_name, two_site

__all__ = [
    "ConditionGrid",
    "EnsembleSpec",
    "EnsembleSummary",
    "build_grid",
    "run_ensemble",
    "asymptotic_range",
    "member_entropy",
    "CHUNK_SIZE",
    "write_csv",
]

CHUNK_SIZE = 128
ALPHA_MAX = math.pi
BETA_MAX = 2.0 * math.pi


def _axis(increment: float, end: float) -> np.ndarray:
    count = int(math.floor(end / increment + 1e-9)) + 1
    return np.arange(count) * increment


@dataclass(frozen=True, eq=False)
class ConditionGrid:
    """An ordered list of initial conditions.

    ``members`` holds one coordinate tuple per condition (named by
    ``columns``); ``indices`` are the positions in the unsubsampled grid.
    """

    kind: str
    params: dict
    columns: tuple[str, ...]
    members: tuple[tuple, ...]
    indices: tuple[int, ...]
    subsample_factor: int = 1
    _states: tuple | None = None

    def __len__(self) -> int:
        return len(self.members)

    def state(self, pos: int) -> WalkerState:
        """Initial state of the ``pos``-th member of this (possibly subsampled) grid."""
        if self._states is not None:
            return self._states[pos].copy()
        m = self.members[pos]
        if self.kind in ("two_site", "random_two_site"):
            return two_site(*m)
        if self.kind == "localized_spin":
            return localized(SpinVector.from_angles(m[0], m[1]), self.params.get("j0", 0))
        if self.kind == "gaussian_set":
            return gaussian(spin_by_name(m[1]), m[0], self.params.get("cutoff"))
        raise DomainError(f"grid kind {self.kind!r} cannot build states")

    def window(self) -> tuple[int, int]:
        """Smallest site window containing every member's initial state."""
        lo, hi = None, None
        for pos in range(len(self)):
            s = self.state(pos)
            lo = s.j_min if lo is None else min(lo, s.j_min)
            hi = s.j_max if hi is None else max(hi, s.j_max)
        return lo, hi

    def subsample(self, k: int) -> "ConditionGrid":
        """Every ``k``-th member, starting with the first."""
        if k < 1:
            raise DomainError(f"subsample factor must be >= 1, got {k}")
        states = self._states[::k] if self._states is not None else None
        return replace(self, members=self.members[::k], indices=self.indices[::k],
                       subsample_factor=self.subsample_factor * k, _states=states)

    def describe(self) -> dict:
        return {"kind": self.kind, "params": _jsonable(self.params), "size": len(self),
                "subsample_factor": self.subsample_factor}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items() if k != "states"}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def build_grid(kind: str, **params) -> ConditionGrid:
    """Build a grid of initial conditions.

    Kinds and parameters:

    - ``two_site``: ``increment``; members (alpha_s, beta_s, alpha_p, beta_p)
    - ``localized_spin``: ``increment``, optional ``j0``; members (alpha_s, beta_s)
    - ``gaussian_set``: ``sigmas``, ``spins`` (names), optional ``cutoff``
    - ``random_two_site``: ``count``, ``seed``; angles uniform on [0, pi] x [0, 2 pi]
    - ``explicit``: ``states`` (list of WalkerState)

    Regular grids start at all zeros and step by ``increment`` while
    alpha <= pi and beta <= 2 pi, in row-major order (last coordinate fastest).
    """
    if kind in ("two_site", "localized_spin"):
        inc = params.get("increment")
        if inc is None or not inc > 0:
            raise DomainError(f"{kind} grid needs a positive increment, got {inc!r}")
        a, b = _axis(inc, ALPHA_MAX), _axis(inc, BETA_MAX)
        if kind == "two_site":
            columns = ("alpha_s", "beta_s", "alpha_p", "beta_p")
            mesh = np.meshgrid(a, b, a, b, indexing="ij")
        else:
            columns = ("alpha_s", "beta_s")
            mesh = np.meshgrid(a, b, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        members = tuple(tuple(float(x) for x in row) for row in pts)
    elif kind == "gaussian_set":
        sigmas = list(params.get("sigmas", ()))
        spins = list(params.get("spins", ()))
        for s in spins:
            spin_by_name(s)
        for s in sigmas:
            if not s > 0:
                raise DomainError(f"gaussian sigma must be positive, got {s!r}")
        columns = ("sigma", "spin")
        members = tuple((float(s), str(sp)) for s in sigmas for sp in spins)
    elif kind == "random_two_site":
        count = int(params.get("count", 0))
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(params.get("seed", 0)))))
        u = rng.random((count, 4))
        pts = u * np.array([ALPHA_MAX, BETA_MAX, ALPHA_MAX, BETA_MAX])
        columns = ("alpha_s", "beta_s", "alpha_p", "beta_p")
        members = tuple(tuple(float(x) for x in row) for row in pts)
    elif kind == "explicit":
        states = tuple(params.get("states", ()))
        if not all(isinstance(s, WalkerState) for s in states):
            raise DomainError("explicit grid needs a list of WalkerState")
        columns = ("index",)
        members = tuple((i,) for i in range(len(states)))
        grid = ConditionGrid(kind, {"count": len(states)}, columns, members, tuple(range(len(members))),
                             _states=states)
        if not members:
            raise DomainError("empty grid")
        return grid
    else:
        raise DomainError(f"unknown grid kind {kind!r}")
    if not members:
        raise DomainError("empty grid")
    return ConditionGrid(kind, dict(params), columns, members, tuple(range(len(members))))


@dataclass(eq=False)
class EnsembleSpec:
    grid: ConditionGrid
    policy: CoinPolicy
    steps: int
    master_seed: int = 0
    realizations_per_condition: int = 1
    thresholds: tuple[float, ...] = (0.95, 0.97, 0.99)
    shared_sequence: bool = False
    keep_members: bool = False

    def __post_init__(self):
        if int(self.steps) < 1:
            raise DomainError(f"steps must be >= 1, got {self.steps}")
        if int(self.realizations_per_condition) < 1:
            raise DomainError("realizations_per_condition must be >= 1")
        self.thresholds = tuple(sorted(float(x) for x in self.thresholds))
        if any(not 0.0 < x < 1.0 for x in self.thresholds):
            raise DomainError(f"thresholds must lie in (0, 1), got {self.thresholds}")
        SeedSpec(self.master_seed)
        if self.shared_sequence and isinstance(self.policy, CrwEmulation):
            raise DomainError("CrwEmulation cannot share one coin sequence across walkers")

    @property
    def member_count(self) -> int:
        return len(self.grid) * self.realizations_per_condition

    def describe(self) -> dict:
        return {"policy": describe_policy(self.policy), "steps": self.steps, "master_seed": self.master_seed,
                "grid": self.grid.describe(), "realizations_per_condition": self.realizations_per_condition,
                "thresholds": list(self.thresholds), "shared_sequence": self.shared_sequence}


@dataclass(eq=False)
class EnsembleSummary:
    """Per-step ensemble statistics for t = 1..n plus the final mean distribution."""

    t: np.ndarray
    mean_S_E: np.ndarray
    min_S_E: np.ndarray
    max_S_E: np.ndarray
    mean_sqrt_variance: np.ndarray
    mean_trace_distance: np.ndarray
    fraction_above: dict[float, np.ndarray]
    final_j: np.ndarray
    final_mean_P: np.ndarray
    final_S_E: np.ndarray
    member_count: int
    member_S_E: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def columns(self) -> list[str]:
        return (["t", "mean_SE", "min_SE", "max_SE", "mean_disp", "mean_D"]
                + [f"frac_{thr:g}" for thr in self.fraction_above])

    def rows(self):
        fracs = list(self.fraction_above.values())
        for k, t in enumerate(self.t):
            yield [int(t), self.mean_S_E[k], self.min_S_E[k], self.max_S_E[k], self.mean_sqrt_variance[k],
                   self.mean_trace_distance[k]] + [f[k] for f in fracs]

    def to_csv(self, path, header: str | None = None) -> None:
        write_csv(path, self.columns(), self.rows(), header)

    def distribution_to_csv(self, path, header: str | None = None) -> None:
        write_csv(path, ["j", "mean_P"], zip(self.final_j.tolist(), self.final_mean_P), header)


def format_value(x):
    """Integers as-is, strings verbatim, floats with 17 significant digits."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, columns, rows, header=None):
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(x) for x in row])


# -- execution ----------------------------------------------------------------


@dataclass
class _Partial:
    sum_S: np.ndarray
    min_S: np.ndarray
    max_S: np.ndarray
    sum_disp: np.ndarray
    sum_D: np.ndarray
    counts: np.ndarray
    sum_P: np.ndarray
    final_S: np.ndarray
    member_S: np.ndarray | None


def _members(spec: EnsembleSpec) -> list[tuple[int, int, int]]:
    """(position in grid, grid index, realization) in canonical order."""
    R = spec.realizations_per_condition
    return [(pos, idx, r) for pos, idx in enumerate(spec.grid.indices) for r in range(R)]


def _chunks(spec: EnsembleSpec, members=None) -> list[list[tuple[int, int, int]]]:
    members = _members(spec) if members is None else members
    return [members[k:k + CHUNK_SIZE] for k in range(0, len(members), CHUNK_SIZE)]


def _run_chunk(spec: EnsembleSpec, chunk, window) -> _Partial:
    n = int(spec.steps)
    R = spec.realizations_per_condition
    lo, hi = window
    states = {}
    for pos, _, _ in chunk:
        if pos not in states:
            states[pos] = spec.grid.state(pos).padded(lo, hi)
    up = np.array([states[pos].up for pos, _, _ in chunk])
    down = np.array([states[pos].down for pos, _, _ in chunk])
    m = len(chunk)
    walker = BatchWalker(up, down, lo, n)
    norm0 = walker.norm.copy()

    policy = spec.policy
    crw = isinstance(policy, CrwEmulation)
    shared = None
    per_member = None
    heads = None
    if crw:
        heads = np.array([crw_heads(policy, n, derive_stream(SeedSpec(spec.master_seed, idx * R + r)))
                          for _, idx, r in chunk])
    elif is_deterministic(policy):
        shared = coin_sequence(policy, n)
    elif spec.shared_sequence:
        shared = coin_sequence(policy, n, derive_stream(SeedSpec(spec.master_seed, 0)))
    else:
        per_member = np.stack([coin_sequence(policy, n, derive_stream(SeedSpec(spec.master_seed, idx * R + r)))
                               for _, idx, r in chunk], axis=1)

    thresholds = np.array(spec.thresholds)
    part = _Partial(sum_S=np.zeros(n), min_S=np.zeros(n), max_S=np.zeros(n), sum_disp=np.zeros(n),
                    sum_D=np.zeros(n), counts=np.zeros((len(thresholds), n), dtype=np.int64),
                    sum_P=None, final_S=None,
                    member_S=np.zeros((m, n)) if spec.keep_members else None)
    identity = np.eye(2, dtype=np.complex128)
    flip = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    alpha_prev, gamma_prev = walker.alpha, walker.gamma
    for t in range(1, n + 1):
        if crw:
            a = alpha_prev / norm0
            up_ = a >= 1.0 - SPIN_TOL
            bad = ~(up_ | (a <= SPIN_TOL))
            if bad.any():
                row = int(np.argmax(bad))
                raise ContractError("CrwEmulation needs the walker in a definite spin state", step=t,
                                    condition=chunk[row][1], realization=chunk[row][2])
            coins = np.where((heads[:, t - 1] == up_)[:, None, None], identity, flip)
        elif shared is not None:
            coins = shared[t - 1]
        else:
            coins = per_member[t - 1]
        walker.advance(coins)
        drift = np.abs(walker.norm - norm0)
        if drift.max() > NORM_TOL:
            row = int(np.argmax(drift))
            raise ContractError(f"norm drifted by {drift[row]:.3g}", step=t, condition=chunk[row][1],
                                realization=chunk[row][2])
        S = entropy_values(walker.alpha, walker.gamma)
        D = trace_distance_values(alpha_prev, gamma_prev, walker.alpha, walker.gamma)
        k = t - 1
        part.sum_S[k] = np.sum(S)
        part.min_S[k] = np.min(S)
        part.max_S[k] = np.max(S)
        part.sum_disp[k] = np.sum(np.sqrt(walker.variance))
        part.sum_D[k] = np.sum(D)
        part.counts[:, k] = np.sum(S[None, :] > thresholds[:, None], axis=1)
        if part.member_S is not None:
            part.member_S[:, k] = S
        alpha_prev, gamma_prev = walker.alpha, walker.gamma
    part.final_S = S.copy()
    part.sum_P = np.sum(walker.distribution(), axis=0)
    return part


def _run_chunk_star(args):
    return _run_chunk(*args)


def run_ensemble(spec: EnsembleSpec, jobs: int = 1) -> EnsembleSummary:
    """Run every (condition, realization) member and aggregate per-step statistics.

    ``jobs > 1`` distributes chunks over worker processes; the output is
    identical for any ``jobs``.
    """
    window = spec.grid.window()
    chunks = _chunks(spec)
    tasks = [(spec, chunk, window) for chunk in chunks]
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_chunk_star, tasks))
    else:
        parts = [_run_chunk(*task) for task in tasks]

    n = int(spec.steps)
    M = spec.member_count
    sum_S = np.zeros(n)
    sum_disp = np.zeros(n)
    sum_D = np.zeros(n)
    counts = np.zeros((len(spec.thresholds), n), dtype=np.int64)
    sum_P = np.zeros(window[1] - window[0] + 1 + 2 * n)
    min_S = np.full(n, np.inf)
    max_S = np.full(n, -np.inf)
    for p in parts:
        sum_S += p.sum_S
        sum_disp += p.sum_disp
        sum_D += p.sum_D
        counts += p.counts
        sum_P += p.sum_P
        np.minimum(min_S, p.min_S, out=min_S)
        np.maximum(max_S, p.max_S, out=max_S)
    fraction = {thr: counts[k] / M for k, thr in enumerate(spec.thresholds)}
    member_S = np.concatenate([p.member_S for p in parts]) if spec.keep_members else None
    return EnsembleSummary(
        t=np.arange(1, n + 1),
        mean_S_E=np.clip(sum_S / M, 0.0, 1.0),
        min_S_E=min_S,
        max_S_E=max_S,
        mean_sqrt_variance=sum_disp / M,
        mean_trace_distance=sum_D / M,
        fraction_above=fraction,
        final_j=np.arange(window[0] - n, window[1] + n + 1),
        final_mean_P=sum_P / M,
        final_S_E=np.concatenate([p.final_S for p in parts]),
        member_count=M,
        member_S_E=member_S,
        metadata=spec.describe(),
    )


def member_entropy(spec: EnsembleSpec, condition_pos: int, realization: int = 0) -> np.ndarray:
    """Per-step S_E of one member, run on its own (spot audit of an ensemble)."""
    idx = spec.grid.indices[condition_pos]
    single = replace(spec, keep_members=True)
    part = _run_chunk(single, [(condition_pos, idx, realization)], spec.grid.window())
    return part.member_S[0]


def asymptotic_range(policy: CoinPolicy, grid: ConditionGrid, n: int) -> tuple[float, float]:
    """Smallest and largest S_E at step ``n`` over the grid, for a deterministic policy."""
    if not is_deterministic(policy):
        raise DomainError("asymptotic_range needs a deterministic coin policy")
    summary = run_ensemble(EnsembleSpec(grid, policy, n))
    return float(summary.final_S_E.min()), float(summary.final_S_E.max())
