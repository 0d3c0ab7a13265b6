"""Inverse-distance weighted prediction over all data points.

Weights are ``d**-alpha`` evaluated as ``exp(-alpha/2 * (ln d2 - ln d2_min))``:
dividing every weight by the nearest one leaves the weighted mean unchanged
and keeps all weights in ``(0, 1]``, so large exponents cannot overflow. For
alpha 2 and 4 the same normalized weight is ``d2_min / d2`` or its square.

Two traversals are provided. ``naive`` streams every data point for each
query. ``blocked`` walks a block of queries over the data in fixed-size tiles
copied into a small local buffer that stays in L1 cache. In strict mode both
accumulate each query's sums in data-index order and agree bit for bit; in
the default fast mode the inner sums are vectorized (lane-wise partial sums).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numba
import numpy as np

from . import parallel_executor
from ._jit import FAST, JIT, as_bits, fexp, flog, from_bits
from .aidw_params import adaptive_alphas
from .core_types import AidwParams, PointSet, compute_bbox
from .errors import ContractError, EmptyInputError

Variant = Literal["naive", "blocked"]

DEFAULT_TILE = 256
QUERY_BLOCK = 32
# Distances below this fraction of the bbox diagonal count as an exact hit.
SNAP_FRACTION = 1e-12
# Weight kinds: alpha 2 and 4 use d2_min / d2 and its square instead of log/exp.
GENERAL = 0


@dataclass(frozen=True, eq=False)
class InterpolationResult:
    predicted: np.ndarray
    alphas: np.ndarray

    def __len__(self) -> int:
        return int(self.predicted.size)


# --- per-range helpers (inlined into each kernel with the kernel's flags) ---


@numba.njit(inline="always", **JIT)
def _min_d2(x, y, dx, dy, lo, hi, dmin):
    # Squared distances are non-negative, so their bit patterns sort like the
    # values; an integer min vectorizes where a float min does not.
    b = as_bits(dmin)
    for j in range(lo, hi):
        ex = dx[j] - x
        ey = dy[j] - y
        b = min(b, as_bits(ex * ex + ey * ey))
    return from_bits(b)


@numba.njit(inline="always", **JIT)
def _acc_general(x, y, dx, dy, dz, lo, hi, h, lmin, sw, swz):
    for j in range(lo, hi):
        ex = dx[j] - x
        ey = dy[j] - y
        w = fexp(h * (flog(ex * ex + ey * ey) - lmin))
        sw += w
        swz += w * dz[j]
    return sw, swz


@numba.njit(inline="always", **JIT)
def _acc_power(x, y, dx, dy, dz, lo, hi, dmin, kind, sw, swz):
    # w = (d2_min / d2) ** (kind / 2) for kind 2 or 4, fixed for the whole loop
    for j in range(lo, hi):
        ex = dx[j] - x
        ey = dy[j] - y
        r = dmin / (ex * ex + ey * ey)
        w = r if kind == 2 else r * r
        sw += w
        swz += w * dz[j]
    return sw, swz


@numba.njit(inline="always", **JIT)
def _accumulate(x, y, dx, dy, dz, lo, hi, h, lmin, dmin, kind, sw, swz):
    if kind == GENERAL:
        return _acc_general(x, y, dx, dy, dz, lo, hi, h, lmin, sw, swz)
    if kind == 2:
        return _acc_power(x, y, dx, dy, dz, lo, hi, dmin, 2, sw, swz)
    return _acc_power(x, y, dx, dy, dz, lo, hi, dmin, 4, sw, swz)


@numba.njit(inline="always", **JIT)
def _first_hit(x, y, dx, dy, eps2):
    for j in range(dx.size):
        ex = dx[j] - x
        ey = dy[j] - y
        if ex * ex + ey * ey <= eps2:
            return j
    return -1


@numba.njit(inline="always", **JIT)
def _kind(h):
    a = -2.0 * h
    if a == 2.0 or a == 4.0:
        return int(a)
    return GENERAL


def _naive(qx, qy, dx, dy, dz, h, eps2, out, start, stop):
    m = dx.size
    for i in range(start, stop):
        x = qx[i]
        y = qy[i]
        dmin = _min_d2(x, y, dx, dy, 0, m, np.inf)
        if dmin <= eps2:
            out[i] = dz[_first_hit(x, y, dx, dy, eps2)]
            continue
        sw, swz = _accumulate(x, y, dx, dy, dz, 0, m, h[i], flog(dmin), dmin, _kind(h[i]), 0.0, 0.0)
        out[i] = swz / sw


def _blocked(qx, qy, dx, dy, dz, h, eps2, tile, out, start, stop):
    m = dx.size
    tx = np.empty(tile)
    ty = np.empty(tile)
    tz = np.empty(tile)
    dmin = np.empty(QUERY_BLOCK)
    lmin = np.empty(QUERY_BLOCK)
    sw = np.empty(QUERY_BLOCK)
    swz = np.empty(QUERY_BLOCK)
    for qb in range(start, stop, QUERY_BLOCK):
        nq = min(QUERY_BLOCK, stop - qb)
        for a in range(nq):
            dmin[a] = np.inf
            sw[a] = 0.0
            swz[a] = 0.0
        for t0 in range(0, m, tile):
            nt = min(tile, m - t0)
            for j in range(nt):
                tx[j] = dx[t0 + j]
                ty[j] = dy[t0 + j]
            for a in range(nq):
                dmin[a] = _min_d2(qx[qb + a], qy[qb + a], tx, ty, 0, nt, dmin[a])
        for a in range(nq):
            lmin[a] = flog(dmin[a]) if dmin[a] > eps2 else 0.0
        for t0 in range(0, m, tile):
            nt = min(tile, m - t0)
            for j in range(nt):
                tx[j] = dx[t0 + j]
                ty[j] = dy[t0 + j]
                tz[j] = dz[t0 + j]
            for a in range(nq):
                if dmin[a] > eps2:
                    i = qb + a
                    sw[a], swz[a] = _accumulate(
                        qx[i], qy[i], tx, ty, tz, 0, nt, h[i], lmin[a], dmin[a], _kind(h[i]), sw[a], swz[a]
                    )
        for a in range(nq):
            i = qb + a
            if dmin[a] <= eps2:
                out[i] = dz[_first_hit(qx[i], qy[i], dx, dy, eps2)]
            else:
                out[i] = swz[a] / sw[a]


# The on-disk cache key ignores fastmath flags, so only one build per function may use it.
_STRICT = dict(JIT, cache=False)

_KERNELS = {
    ("naive", False): numba.njit(fastmath=FAST, **JIT)(_naive),
    ("naive", True): numba.njit(**_STRICT)(_naive),
    ("blocked", False): numba.njit(fastmath=FAST, **JIT)(_blocked),
    ("blocked", True): numba.njit(**_STRICT)(_blocked),
}


def _snap_eps2(data: PointSet, queries: PointSet) -> float:
    eps = SNAP_FRACTION * compute_bbox(data, queries).diagonal
    return eps * eps


def predict_with_alphas(
    queries: PointSet,
    data: PointSet,
    alphas: np.ndarray,
    variant: Variant = "blocked",
    workers: int = 1,
    strict: bool = False,
    tile: int = DEFAULT_TILE,
) -> InterpolationResult:
    """Weighted mean over all data points with a per-query exponent."""
    if data.count == 0 or data.z is None:
        raise EmptyInputError("interpolation needs at least one data point with a value")
    alphas = np.ascontiguousarray(alphas, dtype=np.float64)
    if alphas.shape != (queries.count,):
        raise ContractError(f"{alphas.size} alphas for {queries.count} queries")
    if np.any(~(alphas > 0)) or not np.all(np.isfinite(alphas)):
        raise ValueError("alphas must be positive and finite")
    if tile < 1 or tile & (tile - 1):
        raise ValueError(f"tile must be a power of two, got {tile}")
    try:
        kernel = _KERNELS[(variant, bool(strict))]
    except KeyError:
        raise ValueError(f"unknown variant {variant!r}") from None
    n = queries.count
    out = np.empty(n)
    if n == 0:
        return InterpolationResult(out, alphas)
    h = -0.5 * alphas
    eps2 = _snap_eps2(data, queries)

    if variant == "naive":
        def body(start, stop):
            kernel(queries.x, queries.y, data.x, data.y, data.z, h, eps2, out, start, stop)
    else:
        def body(start, stop):
            kernel(queries.x, queries.y, data.x, data.y, data.z, h, eps2, tile, out, start, stop)

    parallel_executor.parallel_for_chunks(n, body, workers)
    return InterpolationResult(out, alphas)


def idw_predict(q, data: PointSet, alpha: float = 2.0) -> float:
    """Standard IDW prediction at one location."""
    res = idw_predict_all(PointSet([q.x], [q.y]), data, alpha, variant="naive")
    return float(res.predicted[0])


def idw_predict_all(
    queries: PointSet,
    data: PointSet,
    alpha: float = 2.0,
    variant: Variant = "blocked",
    workers: int = 1,
    strict: bool = False,
    tile: int = DEFAULT_TILE,
) -> InterpolationResult:
    """Standard IDW with one exponent for every query."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    alphas = np.full(queries.count, float(alpha))
    return predict_with_alphas(queries, data, alphas, variant, workers, strict, tile)


def aidw_predict_all(
    queries: PointSet,
    data: PointSet,
    knn,
    params: AidwParams,
    variant: Variant = "blocked",
    workers: int = 1,
    strict: bool = False,
    tile: int = DEFAULT_TILE,
) -> InterpolationResult:
    """Adaptive IDW: exponent per query from its mean kNN distance.

    ``knn`` is a :class:`~aidw.knn_search.KnnBatch` (or any sequence of
    results with ``average_distance``) aligned with ``queries``.
    """
    if len(knn) != queries.count:
        raise ContractError(f"{len(knn)} kNN results for {queries.count} queries")
    if data.count == 0:
        raise EmptyInputError("interpolation needs at least one data point")
    avg = getattr(knn, "average_distance", None)
    if not isinstance(avg, np.ndarray):
        avg = np.array([r.average_distance for r in knn], dtype=np.float64)
    area = params.area if params.area is not None else compute_bbox(data, queries).area
    alphas = adaptive_alphas(avg, data.count, area, params) if queries.count else np.empty(0)
    return predict_with_alphas(queries, data, alphas, variant, workers, strict, tile)
