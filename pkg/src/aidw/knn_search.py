"""Exact k-nearest-neighbor search: global brute force and grid-local search.

Both engines keep a k-slot buffer of squared distances sorted ascending. A
candidate closer than the current k-th entry replaces it and is swapped toward
the front until the buffer is sorted again. Square roots are taken only when
the mean neighbor distance is formed at the end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, NamedTuple

import numba
import numpy as np

from . import parallel_executor
from ._jit import JIT
from .core_types import PointSet
from .errors import ContractError, EmptyIndexError, EmptyInputError, InsufficientPointsError
from .grid_index import GridIndex, locate_cells

Engine = Literal["grid", "brute"]


@dataclass(frozen=True, eq=False)
class KnnResult:
    """Neighbors of one query; ``neighbor_ids`` index the data set.

    ``exhausted`` is set when fewer than the requested k points exist, in
    which case the result holds all of them.
    """

    distances_squared: np.ndarray
    average_distance: float
    neighbor_ids: np.ndarray
    exhausted: bool = False
    level: int = -1

    @property
    def k(self) -> int:
        return int(self.distances_squared.size)


class Expansion(NamedTuple):
    level: int
    exhausted: bool


@dataclass(frozen=True, eq=False)
class KnnBatch:
    """Results of a whole kNN stage, one row per query in input order."""

    distances_squared: np.ndarray
    neighbor_ids: np.ndarray
    average_distance: np.ndarray
    levels: np.ndarray
    exhausted: bool
    engine: str

    def __len__(self) -> int:
        return int(self.average_distance.size)

    def __getitem__(self, i: int) -> KnnResult:
        return KnnResult(
            self.distances_squared[i],
            float(self.average_distance[i]),
            self.neighbor_ids[i],
            self.exhausted,
            int(self.levels[i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


# --- kernels ----------------------------------------------------------------


@numba.njit(inline="always", **JIT)
def _insert(buf, ids, k, d2, j):
    # replace the k-th entry, then swap it toward the front (as a shift)
    t = k - 1
    while t > 0 and buf[t - 1] > d2:
        buf[t] = buf[t - 1]
        ids[t] = ids[t - 1]
        t -= 1
    buf[t] = d2
    ids[t] = j


@numba.njit(inline="always", **JIT)
def _mean_sqrt(buf, k):
    s = 0.0
    for t in range(k):
        s += np.sqrt(buf[t])
    return s / k


@numba.njit(**JIT)
def _brute_kernel(qx, qy, dx, dy, k, out_d2, out_ids, out_avg, start, stop):
    m = dx.size
    buf = np.empty(k)
    ids = np.empty(k, np.int64)
    for i in range(start, stop):
        x = qx[i]
        y = qy[i]
        # first k distances, sorted ascending
        for j in range(k):
            ex = dx[j] - x
            ey = dy[j] - y
            buf[j] = ex * ex + ey * ey
            ids[j] = j
            t = j
            while t > 0 and buf[t - 1] > buf[t]:
                buf[t - 1], buf[t] = buf[t], buf[t - 1]
                ids[t - 1], ids[t] = ids[t], ids[t - 1]
                t -= 1
        kth = buf[k - 1]
        for j in range(k, m):
            ex = dx[j] - x
            ey = dy[j] - y
            d2 = ex * ex + ey * ey
            if d2 < kth:
                _insert(buf, ids, k, d2, j)
                kth = buf[k - 1]
        for t in range(k):
            out_d2[i, t] = buf[t]
            out_ids[i, t] = ids[t]
        out_avg[i] = _mean_sqrt(buf, k)


@numba.njit(inline="always", **JIT)
def _ring_count(col, row, level, off, n_col, n_row):
    c0 = max(col - level, 0)
    c1 = min(col + level, n_col - 1)
    total = 0
    for r in range(max(row - level, 0), min(row + level, n_row - 1) + 1):
        base = r * n_col
        if r == row - level or r == row + level:
            total += off[base + c1 + 1] - off[base + c0]
        else:
            if col - level >= 0:
                total += off[base + col - level + 1] - off[base + col - level]
            if col + level < n_col:
                total += off[base + col + level + 1] - off[base + col + level]
    return total


@numba.njit(**JIT)
def _expansion_level(col, row, off, n_col, n_row, k):
    """Smallest sufficient level plus one, or the whole-grid level if exhausted."""
    lmax = max(col, n_col - 1 - col, row, n_row - 1 - row)
    level = 0
    found = _ring_count(col, row, 0, off, n_col, n_row)
    while found < k and level < lmax:
        level += 1
        found += _ring_count(col, row, level, off, n_col, n_row)
    if found < k:
        return lmax, True
    return level + 1, False


@numba.njit(inline="always", **JIT)
def _scan_span(lo, hi, x, y, sx, sy, sids, buf, ids, k):
    # a run of cells in one grid row is one contiguous slice of the sorted points
    kth = buf[k - 1]
    for p in range(lo, hi):
        ex = sx[p] - x
        ey = sy[p] - y
        d2 = ex * ex + ey * ey
        if d2 < kth:
            _insert(buf, ids, k, d2, sids[p])
            kth = buf[k - 1]


@numba.njit(inline="always", **JIT)
def _scan_ring(col, row, level, x, y, sx, sy, sids, off, n_col, n_row, buf, ids, k):
    c0 = max(col - level, 0)
    c1 = min(col + level, n_col - 1)
    for r in range(max(row - level, 0), min(row + level, n_row - 1) + 1):
        base = r * n_col
        if r == row - level or r == row + level:
            _scan_span(off[base + c0], off[base + c1 + 1], x, y, sx, sy, sids, buf, ids, k)
        else:
            if col - level >= 0:
                c = base + col - level
                _scan_span(off[c], off[c + 1], x, y, sx, sy, sids, buf, ids, k)
            if col + level < n_col:
                c = base + col + level
                _scan_span(off[c], off[c + 1], x, y, sx, sy, sids, buf, ids, k)


@numba.njit(**JIT)
def _clearance(x, y, col, row, level, min_x, min_y, w, n_col, n_row):
    """Distance from (x, y) to the nearest block edge that has cells beyond it."""
    c = np.inf
    if col - level > 0:
        c = min(c, x - (min_x + (col - level) * w))
    if col + level < n_col - 1:
        c = min(c, (min_x + (col + level + 1) * w) - x)
    if row - level > 0:
        c = min(c, y - (min_y + (row - level) * w))
    if row + level < n_row - 1:
        c = min(c, (min_y + (row + level + 1) * w) - y)
    return c


@numba.njit(**JIT)
def _grid_kernel(
    qx, qy, qcol, qrow, sx, sy, sids, off,
    min_x, min_y, w, n_col, n_row, margin, k, fixed_level, verify,
    out_d2, out_ids, out_avg, out_level, start, stop,
):
    buf = np.empty(k)
    ids = np.empty(k, np.int64)
    for i in range(start, stop):
        x = qx[i]
        y = qy[i]
        col = qcol[i]
        row = qrow[i]
        for t in range(k):
            buf[t] = np.inf
            ids[t] = -1
        if fixed_level >= 0:
            level = fixed_level
        else:
            level, _ = _expansion_level(col, row, off, n_col, n_row, k)
        c0 = max(col - level, 0)
        c1 = min(col + level, n_col - 1)
        for r in range(max(row - level, 0), min(row + level, n_row - 1) + 1):
            base = r * n_col
            _scan_span(off[base + c0], off[base + c1 + 1], x, y, sx, sy, sids, buf, ids, k)
        if verify:
            # The block is exact once the k-th distance is within its clearance;
            # otherwise a closer point may sit just beyond the block edge.
            lmax = max(col, n_col - 1 - col, row, n_row - 1 - row)
            while level < lmax:
                c = _clearance(x, y, col, row, level, min_x, min_y, w, n_col, n_row) - margin
                if c > 0.0 and buf[k - 1] <= c * c:
                    break
                level += 1
                _scan_ring(col, row, level, x, y, sx, sy, sids, off, n_col, n_row, buf, ids, k)
        for t in range(k):
            out_d2[i, t] = buf[t]
            out_ids[i, t] = ids[t]
        out_avg[i] = _mean_sqrt(buf, k)
        out_level[i] = level


# --- public API -------------------------------------------------------------


def _margin(index: GridIndex) -> float:
    c = index.config
    scale = max(abs(c.min_x), abs(c.min_y), abs(c.max_x), abs(c.max_y))
    return 1e-6 * c.cell_width + 16 * np.finfo(np.float64).eps * scale


def _check_index(index: GridIndex, data: PointSet) -> None:
    if index.point_count == 0:
        raise EmptyIndexError("grid index holds no data points")
    if index.point_count != data.count:
        raise ContractError(f"index built over {index.point_count} points, data has {data.count}")


def _alloc(n: int, k: int):
    return (
        np.empty((n, k), np.float64),
        np.empty((n, k), np.int64),
        np.empty(n, np.float64),
        np.full(n, -1, np.int64),
    )


def _run_grid(queries: PointSet, index: GridIndex, k: int, workers: int, fixed_level: int = -1, verify: bool = True):
    c = index.config
    qcol, qrow = locate_cells(queries.x, queries.y, c)
    n = queries.count
    d2, ids, avg, lev = _alloc(n, k)
    margin = _margin(index)

    def run(start, stop):
        _grid_kernel(
            queries.x, queries.y, qcol, qrow, index.sorted_x, index.sorted_y,
            index.sorted_point_ids, index.cell_offset,
            c.min_x, c.min_y, c.cell_width, c.n_col, c.n_row, margin, k,
            fixed_level, verify, d2, ids, avg, lev, start, stop,
        )

    parallel_executor.parallel_for_chunks(n, run, workers)
    return d2, ids, avg, lev


def _run_brute(queries: PointSet, data: PointSet, k: int, workers: int):
    n = queries.count
    d2, ids, avg, lev = _alloc(n, k)

    def run(start, stop):
        _brute_kernel(queries.x, queries.y, data.x, data.y, k, d2, ids, avg, start, stop)

    parallel_executor.parallel_for_chunks(n, run, workers)
    return d2, ids, avg, lev


def _single(q) -> PointSet:
    return PointSet([q.x], [q.y])


def brute_force_knn(q, data: PointSet, k: int) -> KnnResult:
    """Global search over every data point."""
    return knn_stage(_single(q), None, data, k, engine="brute")[0]


def determine_expansion_level(q, index: GridIndex, k: int) -> Expansion:
    """Level of cell expanding for ``q``: the first sufficient level plus one."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if index.point_count == 0:
        raise EmptyIndexError("grid index holds no data points")
    c = index.config
    col, row = locate_cells(q.x, q.y, c)
    level, exhausted = _expansion_level(int(col), int(row), index.cell_offset, c.n_col, c.n_row, k)
    return Expansion(int(level), bool(exhausted))


def grid_knn(q, index: GridIndex, data: PointSet, k: int) -> KnnResult:
    """Local search around the cell of ``q``; same neighbors as the global search."""
    return knn_stage(_single(q), index, data, k, engine="grid")[0]


def search_block(q, index: GridIndex, data: PointSet, k: int, level: int) -> KnnResult:
    """Candidates from a fixed block only, without the exactness check.

    Exposes what a search stopping at ``level`` would return.
    """
    _check_index(index, data)
    k_eff = min(k, data.count)
    d2, ids, avg, lev = _run_grid(_single(q), index, k_eff, 1, fixed_level=level, verify=False)
    keep = np.isfinite(d2[0])
    return KnnResult(d2[0][keep], float(np.sqrt(d2[0][keep]).mean()), ids[0][keep], False, int(lev[0]))


def knn_stage(
    queries: PointSet,
    index: GridIndex | None,
    data: PointSet,
    k: int,
    engine: Engine = "grid",
    workers: int = 1,
) -> KnnBatch:
    """kNN for every query; row ``i`` of the result belongs to query ``i``."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if data.count == 0:
        raise EmptyInputError("kNN needs at least one data point")
    n = queries.count
    if engine == "brute":
        if k > data.count:
            raise InsufficientPointsError(f"k={k} exceeds the {data.count} data points")
        if n == 0:
            return KnnBatch(*_alloc(0, k)[:3], np.empty(0, np.int64), False, engine)
        d2, ids, avg, lev = _run_brute(queries, data, k, workers)
        return KnnBatch(d2, ids, avg, lev, False, engine)
    if engine != "grid":
        raise ValueError(f"unknown kNN engine {engine!r}")
    if index is None:
        raise ContractError("the grid engine needs a GridIndex")
    _check_index(index, data)
    exhausted = k > data.count
    k_eff = min(k, data.count)
    if n == 0:
        return KnnBatch(*_alloc(0, k_eff)[:3], np.empty(0, np.int64), exhausted, engine)
    d2, ids, avg, lev = _run_grid(queries, index, k_eff, workers)
    return KnnBatch(d2, ids, avg, lev, exhausted, engine)
