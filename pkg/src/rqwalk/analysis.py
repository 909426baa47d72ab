"""Power-law fits for decaying or growing ensemble statistics."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import DomainError

__all__ = ["FitResult", "loglog_fit", "fixed_exponent_prefactor", "dispersion_exponent", "classify_regime"]

DEFAULT_T_MIN = 10


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    slope_ci_95: tuple[float, float]
    r_squared: float
    points_used: int
    t_min_used: int

    @property
    def prefactor(self) -> float:
        return float(np.exp(self.intercept))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["slope_ci_95"] = list(self.slope_ci_95)
        return d

    def summary(self) -> str:
        lo, hi = self.slope_ci_95
        return (f"slope {self.slope:.4f} (95% CI {lo:.4f}..{hi:.4f}), prefactor {self.prefactor:.4g}, "
                f"R^2 {self.r_squared:.4f}, {self.points_used} points from t >= {self.t_min_used}")


def _select(series, t_min, t_max):
    if isinstance(series, Mapping):
        t = np.fromiter(series.keys(), dtype=np.float64)
        y = np.fromiter(series.values(), dtype=np.float64)
    else:
        t, y = (np.asarray(v, dtype=np.float64) for v in series)
    if t.shape != y.shape:
        raise DomainError("t and y must have the same length")
    keep = t >= t_min
    if t_max is not None:
        keep &= t <= t_max
    t, y = t[keep], y[keep]
    if t.size < 3:
        raise DomainError(f"need at least 3 points with t >= {t_min}, got {t.size}")
    if np.any(t <= 0):
        raise DomainError("t must be positive for a log-log fit")
    if np.any(~(y > 0)):
        raise DomainError("all y values must be positive")
    order = np.argsort(t, kind="stable")
    return t[order], y[order]


def loglog_fit(series, t_min: int = DEFAULT_T_MIN, t_max: int | None = None) -> FitResult:
    """Least squares of ln y on ln t over ``t_min <= t <= t_max``.

    ``series`` is a mapping t -> y or a pair of arrays (t, y). The 95%
    interval uses the slope standard error and the t-distribution with
    N - 2 degrees of freedom.
    """
    t, y = _select(series, t_min, t_max)
    res = stats.linregress(np.log(t), np.log(y))
    half = stats.t.ppf(0.975, t.size - 2) * res.stderr
    return FitResult(
        slope=float(res.slope),
        intercept=float(res.intercept),
        slope_ci_95=(float(res.slope - half), float(res.slope + half)),
        r_squared=float(min(res.rvalue ** 2, 1.0)),
        points_used=int(t.size),
        t_min_used=int(t_min),
    )


def fixed_exponent_prefactor(series, exponent: float, t_min: int = DEFAULT_T_MIN,
                             t_max: int | None = None) -> tuple[float, tuple[float, float]]:
    """Least-squares ``a`` in y = a t^exponent, with its 95% interval.

    The model is linear in ``a``, so the solution is closed form:
    a = sum(x y) / sum(x^2) with x = t^exponent.
    """
    t, y = _select(series, t_min, t_max)
    x = t ** exponent
    sxx = float(np.dot(x, x))
    a = float(np.dot(x, y)) / sxx
    dof = t.size - 1
    resid = y - a * x
    se = float(np.sqrt(np.dot(resid, resid) / dof / sxx))
    half = float(stats.t.ppf(0.975, dof)) * se
    return a, (a - half, a + half)


def dispersion_exponent(series, t_min: int = DEFAULT_T_MIN, t_max: int | None = None) -> FitResult:
    """Growth exponent of the dispersion: about 1 for ballistic, 1/2 for diffusive spreading."""
    return loglog_fit(series, t_min, t_max)


def classify_regime(fit: FitResult | float) -> str:
    slope = fit.slope if isinstance(fit, FitResult) else float(fit)
    return "ballistic" if abs(slope - 1.0) < abs(slope - 0.5) else "diffusive"
