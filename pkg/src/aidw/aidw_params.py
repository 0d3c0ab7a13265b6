"""Adaptive power parameter: density statistic, fuzzy normalization, level mapping.

All functions accept scalars or numpy arrays; scalar input gives a float back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_types import MU_BREAKPOINTS, AidwParams
from .errors import DomainError, InvalidRegionError


@dataclass(frozen=True)
class AdaptiveAlpha:
    r_exp: float
    r_obs: float
    r_statistic: float
    mu_r: float
    alpha: float


def _out(a: np.ndarray):
    return float(a) if a.ndim == 0 else a


def expected_nn_distance(m: int, area: float) -> float:
    """Expected nearest-neighbor distance of ``m`` random points on ``area``."""
    if m < 1:
        raise ValueError(f"need at least one point, got {m}")
    if not (area > 0 and math.isfinite(area)):
        raise InvalidRegionError(f"area must be positive, got {area}")
    return 1.0 / (2.0 * math.sqrt(m / area))


def nn_statistic(r_obs, r_exp):
    """Ratio of observed to expected neighbor distance."""
    if not r_exp > 0:
        raise DomainError(f"expected distance must be positive, got {r_exp}")
    r_obs = np.asarray(r_obs, dtype=np.float64)
    if np.any(r_obs < 0):
        raise DomainError("observed distance must be non-negative")
    return _out(r_obs / r_exp)


def normalize_mu(r, r_min: float = 0.0, r_max: float = 2.0):
    """Cosine membership of the statistic, clamped to ``[0, 1]``.

    The cosine uses ``pi / r_max`` whatever ``r_min`` is, so for ``r_min != 0``
    the middle branch does not reach 1 at ``r_max`` and the function jumps there.
    """
    if not r_min < r_max:
        raise ValueError(f"need r_min < r_max, got {r_min}, {r_max}")
    r = np.asarray(r, dtype=np.float64)
    mid = 0.5 - 0.5 * np.cos((math.pi / r_max) * (r - r_min))
    mu = np.where(r <= r_min, 0.0, np.where(r >= r_max, 1.0, mid))
    return _out(np.clip(mu, 0.0, 1.0))


def alpha_from_mu(mu, levels):
    """Piecewise-linear map of ``mu`` onto the five alpha levels.

    Constant below 0.1 and above 0.9, linear between consecutive breakpoints
    0.1, 0.3, 0.5, 0.7, 0.9 where it takes the values alpha_1 .. alpha_5.
    Each segment is evaluated from its left breakpoint, so breakpoint values
    are exact and equal levels collapse to exactly that level.
    """
    a = tuple(float(v) for v in levels)
    if len(a) != 5:
        raise ValueError(f"need five alpha levels, got {len(a)}")
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(~((mu >= 0.0) & (mu <= 1.0))):
        raise DomainError("mu must lie in [0, 1]")
    b = MU_BREAKPOINTS

    def seg(i):
        lo, hi = a[i], a[i + 1]
        v = lo + (hi - lo) * (5.0 * (mu - b[i]))
        return np.clip(v, min(lo, hi), max(lo, hi))

    conds = [mu < b[0], mu < b[1], mu < b[2], mu < b[3], mu < b[4]]
    choices = [np.full_like(mu, a[0]), seg(0), seg(1), seg(2), seg(3)]
    return _out(np.select(conds, choices, default=a[4]))


def adaptive_alpha(knn, m: int, area: float, params: AidwParams) -> AdaptiveAlpha:
    """Full chain for one kNN result, keeping every intermediate."""
    r_exp = expected_nn_distance(m, area)
    r_obs = float(knn.average_distance)
    r = nn_statistic(r_obs, r_exp)
    mu = normalize_mu(r, params.r_min, params.r_max)
    return AdaptiveAlpha(r_exp, r_obs, r, mu, alpha_from_mu(mu, params.alpha_levels))


def adaptive_alphas(average_distances, m: int, area: float, params: AidwParams) -> np.ndarray:
    """Vectorized chain: per-query alpha from per-query mean kNN distance."""
    r_exp = expected_nn_distance(m, area)
    r = nn_statistic(np.asarray(average_distances, dtype=np.float64), r_exp)
    mu = normalize_mu(r, params.r_min, params.r_max)
    return np.atleast_1d(alpha_from_mu(mu, params.alpha_levels))
