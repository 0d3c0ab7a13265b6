"""Even planar grid and the CSR-style per-cell layout of the data points.

Points are sorted by global cell id; each cell then needs only two integers,
the number of its points and the offset of its first (head) point in the
sorted order. Counts come from a reduction over each run of equal keys and the
heads from the first position of each run, the CPU counterpart of a segmented
reduce / segmented scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aidw_params import expected_nn_distance
from .core_types import BoundingBox, PointSet
from .errors import EmptyInputError, GridIndexError, InvalidRegionError, OutOfDomainError

DEFAULT_CELL_FACTOR = 4.0
EMPTY_HEAD = -1
# Fraction of a cell a point may fall outside the covered region and still clamp.
CLAMP_TOLERANCE = 1e-9


@dataclass(frozen=True)
class GridConfig:
    cell_width: float
    n_col: int
    n_row: int
    min_x: float
    min_y: float

    def __post_init__(self):
        if not (self.cell_width > 0 and math.isfinite(self.cell_width)):
            raise InvalidRegionError(f"cell width must be positive, got {self.cell_width}")
        if self.n_col < 1 or self.n_row < 1:
            raise InvalidRegionError(f"grid needs at least one cell, got {self.n_col}x{self.n_row}")

    @classmethod
    def covering(cls, bbox: BoundingBox, cell_width: float) -> "GridConfig":
        """Grid anchored at the box minimum; one padding column/row as in
        ``nCol = (maxX - minX + cellWidth) / cellWidth``."""
        if not cell_width > 0:
            raise InvalidRegionError(f"cell width must be positive, got {cell_width}")
        n_col = int((bbox.max_x - bbox.min_x + cell_width) / cell_width)
        n_row = int((bbox.max_y - bbox.min_y + cell_width) / cell_width)
        return cls(float(cell_width), max(n_col, 1), max(n_row, 1), bbox.min_x, bbox.min_y)

    @property
    def n_cells(self) -> int:
        return self.n_col * self.n_row

    @property
    def max_x(self) -> float:
        return self.min_x + self.n_col * self.cell_width

    @property
    def max_y(self) -> float:
        return self.min_y + self.n_row * self.cell_width


def choose_cell_width(data: PointSet, bbox: BoundingBox, factor: float = DEFAULT_CELL_FACTOR) -> float:
    """``factor`` times the expected nearest-neighbor distance of ``data`` in ``bbox``."""
    if data.count == 0:
        raise EmptyInputError("cell width needs at least one data point")
    if not bbox.area > 0:
        raise InvalidRegionError(f"cell width needs a box of positive area, got {bbox}")
    if not factor > 0:
        raise ValueError(f"factor must be positive, got {factor}")
    return factor * expected_nn_distance(data.count, bbox.area)


def make_grid(data: PointSet, bbox: BoundingBox, factor: float = DEFAULT_CELL_FACTOR) -> GridConfig:
    return GridConfig.covering(bbox, choose_cell_width(data, bbox, factor))


def locate_cells(x, y, config: GridConfig) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`locate_cell`; raises on the first out-of-domain point."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    fc = (x - config.min_x) / config.cell_width
    fr = (y - config.min_y) / config.cell_width
    bad = (
        (fc < -CLAMP_TOLERANCE)
        | (fc > config.n_col + CLAMP_TOLERANCE)
        | (fr < -CLAMP_TOLERANCE)
        | (fr > config.n_row + CLAMP_TOLERANCE)
        | ~np.isfinite(fc)
        | ~np.isfinite(fr)
    )
    if bad.any():
        i = int(np.flatnonzero(bad.reshape(-1))[0])
        raise OutOfDomainError(
            f"point {i} ({x.reshape(-1)[i]}, {y.reshape(-1)[i]}) lies outside the grid"
        )
    col = np.clip(np.floor(fc), 0, config.n_col - 1).astype(np.int64)
    row = np.clip(np.floor(fr), 0, config.n_row - 1).astype(np.int64)
    return col, row


def locate_cell(x: float, y: float, config: GridConfig) -> tuple[int, int]:
    """Column and row of the cell holding ``(x, y)``, clamped to the grid."""
    col, row = locate_cells(x, y, config)
    return int(col), int(row)


def linearize(col: int, row: int, config: GridConfig) -> int:
    if not (0 <= col < config.n_col and 0 <= row < config.n_row):
        raise GridIndexError(f"cell ({col}, {row}) outside {config.n_col}x{config.n_row} grid")
    return row * config.n_col + col


def delinearize(cell: int, config: GridConfig) -> tuple[int, int]:
    if not 0 <= cell < config.n_cells:
        raise GridIndexError(f"cell id {cell} outside [0, {config.n_cells})")
    row, col = divmod(cell, config.n_col)
    return col, row


@dataclass(frozen=True, eq=False)
class GridIndex:
    """Data points grouped by cell.

    ``sorted_x``/``sorted_y`` hold the coordinates in ``sorted_point_ids``
    order so that each cell is a contiguous slice for the search kernels.
    ``cell_head`` is :data:`EMPTY_HEAD` for cells with no points.
    ``cell_offset`` (length ``n_cells + 1``) is the running total of the
    counts, so cells ``a..b`` of one row span ``cell_offset[a]:cell_offset[b+1]``.
    """

    config: GridConfig
    sorted_point_ids: np.ndarray
    cell_count: np.ndarray
    cell_head: np.ndarray
    point_cell: np.ndarray
    sorted_x: np.ndarray
    sorted_y: np.ndarray
    cell_offset: np.ndarray

    @property
    def point_count(self) -> int:
        return int(self.sorted_point_ids.size)

    def cell_points(self, cell: int) -> np.ndarray:
        """Original indices of the points in ``cell`` (ascending)."""
        n = int(self.cell_count[cell])
        if n == 0:
            return self.sorted_point_ids[:0]
        h = int(self.cell_head[cell])
        return self.sorted_point_ids[h : h + n]

    def block_count(self, col: int, row: int, level: int) -> int:
        """Points in the (2*level+1)^2 block around ``(col, row)``, clipped."""
        c = self.config
        c0, c1 = max(col - level, 0), min(col + level, c.n_col - 1)
        r0, r1 = max(row - level, 0), min(row + level, c.n_row - 1)
        counts = self.cell_count.reshape(c.n_row, c.n_col)
        return int(counts[r0 : r1 + 1, c0 : c1 + 1].sum())

    def dump_rows(self):
        """``(cellId, count, head)`` triples for debugging."""
        for cell in range(self.config.n_cells):
            yield cell, int(self.cell_count[cell]), int(self.cell_head[cell])


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def build_index(data: PointSet, config: GridConfig) -> GridIndex:
    """Group the data points by cell (stable within a cell)."""
    col, row = locate_cells(data.x, data.y, config)
    cell_id = row * config.n_col + col
    order = np.argsort(cell_id, kind="stable")
    keys = cell_id[order]

    # Runs of equal keys in the sorted order are the per-cell segments.
    m = keys.size
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]]) if m else np.empty(0, np.int64)
    seg_keys = keys[starts]
    seg_counts = np.diff(np.r_[starts, m])

    cell_count = np.zeros(config.n_cells, dtype=np.int64)
    cell_head = np.full(config.n_cells, EMPTY_HEAD, dtype=np.int64)
    cell_count[seg_keys] = seg_counts
    cell_head[seg_keys] = starts

    return GridIndex(
        config=config,
        sorted_point_ids=_readonly(order.astype(np.int64)),
        cell_count=_readonly(cell_count),
        cell_head=_readonly(cell_head),
        point_cell=_readonly(cell_id.astype(np.int64)),
        sorted_x=_readonly(np.ascontiguousarray(data.x[order])),
        sorted_y=_readonly(np.ascontiguousarray(data.y[order])),
        cell_offset=_readonly(np.r_[0, np.cumsum(cell_count)].astype(np.int64)),
    )


def write_index_dump(path, index: GridIndex) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("cellId,count,head\n")
        for cell, n, h in index.dump_rows():
            fh.write(f"{cell},{n},{h}\n")
