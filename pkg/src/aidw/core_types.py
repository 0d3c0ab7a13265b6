"""Domain types, point containers, synthetic data and the CSV point format."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from os import PathLike
from typing import Iterator, Sequence

import numpy as np

from .errors import EmptyInputError, InvalidRegionError, PointFileError

# Coefficients (a, b, c) of the planar field z = a*x + b*y + c.
PLANE_COEFFS = (1.0, 2.0, 1.0)


@dataclass(frozen=True)
class DataPoint:
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class QueryPoint:
    x: float
    y: float


class ValueRule(str, Enum):
    """How synthetic sample values are assigned to generated points."""

    UNIFORM = "uniform"
    PLANAR = "planar"
    RADIAL = "radial"


def _frozen(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValueError(f"non-finite {name} at index {bad}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class PointSet:
    """Structure-of-arrays point container.

    ``z`` is ``None`` for query sets. The arrays are copied on construction and
    marked read-only, so a ``PointSet`` can be shared freely between threads.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray | None = None

    def __post_init__(self):
        x = _frozen(self.x, "x")
        y = _frozen(self.y, "y")
        if x.shape != y.shape:
            raise ValueError(f"x and y lengths differ ({x.size} vs {y.size})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.z is not None:
            z = _frozen(self.z, "z")
            if z.shape != x.shape:
                raise ValueError(f"z length {z.size} differs from x length {x.size}")
            object.__setattr__(self, "z", z)

    @classmethod
    def from_points(cls, points: Sequence[DataPoint | QueryPoint]) -> "PointSet":
        xs = [p.x for p in points]
        ys = [p.y for p in points]
        if points and all(isinstance(p, DataPoint) for p in points):
            return cls(xs, ys, [p.z for p in points])
        return cls(xs, ys)

    @property
    def count(self) -> int:
        return int(self.x.size)

    @property
    def has_values(self) -> bool:
        return self.z is not None

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, i: int) -> DataPoint | QueryPoint:
        if self.z is None:
            return QueryPoint(float(self.x[i]), float(self.y[i]))
        return DataPoint(float(self.x[i]), float(self.y[i]), float(self.z[i]))

    def __iter__(self) -> Iterator[DataPoint | QueryPoint]:
        for i in range(self.count):
            yield self[i]

    def as_queries(self) -> "PointSet":
        """Drop the values, keeping only positions."""
        return PointSet(self.x, self.y)

    def translated(self, dx: float, dy: float) -> "PointSet":
        return PointSet(self.x + dx, self.y + dy, self.z)


@dataclass(frozen=True)
class BoundingBox:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if not (self.min_x <= self.max_x and self.min_y <= self.max_y):
            raise InvalidRegionError(f"inverted bounding box {self}")

    @classmethod
    def unit(cls) -> "BoundingBox":
        return cls(0.0, 0.0, 1.0, 1.0)

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.min_x + self.max_x), 0.5 * (self.min_y + self.max_y))

    @property
    def is_degenerate(self) -> bool:
        return not (self.width > 0.0 and self.height > 0.0)

    def contains(self, x, y) -> np.ndarray | bool:
        x = np.asarray(x)
        y = np.asarray(y)
        inside = (x >= self.min_x) & (x <= self.max_x) & (y >= self.min_y) & (y <= self.max_y)
        return bool(inside) if inside.ndim == 0 else inside


MU_BREAKPOINTS = (0.1, 0.3, 0.5, 0.7, 0.9)
DEFAULT_ALPHA_LEVELS = (0.5, 1.0, 2.0, 3.0, 4.0)


@dataclass(frozen=True)
class AidwParams:
    """Tunables of the adaptive power parameter.

    ``area=None`` means the area is taken from the bounding box of all points.
    """

    k: int = 15
    r_min: float = 0.0
    r_max: float = 2.0
    alpha_levels: tuple[float, float, float, float, float] = DEFAULT_ALPHA_LEVELS
    area: float | None = None

    def __post_init__(self):
        levels = tuple(float(a) for a in self.alpha_levels)
        object.__setattr__(self, "alpha_levels", levels)
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if not self.r_min < self.r_max:
            raise ValueError(f"need r_min < r_max, got {self.r_min}, {self.r_max}")
        if len(levels) != 5 or not all(a > 0 and math.isfinite(a) for a in levels):
            raise ValueError(f"need five positive alpha levels, got {levels}")
        if self.area is not None and not self.area > 0:
            raise InvalidRegionError(f"area must be positive, got {self.area}")

    @property
    def mu_breakpoints(self) -> tuple[float, ...]:
        return MU_BREAKPOINTS


def compute_bbox(data: PointSet | None, queries: PointSet | None = None) -> BoundingBox:
    """Tight axis-aligned box over the union of ``data`` and ``queries``."""
    xs = [s.x for s in (data, queries) if s is not None and s.count]
    ys = [s.y for s in (data, queries) if s is not None and s.count]
    if not xs:
        raise EmptyInputError("cannot compute a bounding box of zero points")
    return BoundingBox(
        float(min(a.min() for a in xs)),
        float(min(a.min() for a in ys)),
        float(max(a.max() for a in xs)),
        float(max(a.max() for a in ys)),
    )


def field_values(x: np.ndarray, y: np.ndarray, rule: ValueRule | str, bbox: BoundingBox) -> np.ndarray:
    """Analytic value field used by the ``planar`` and ``radial`` rules."""
    rule = ValueRule(rule)
    if rule is ValueRule.PLANAR:
        a, b, c = PLANE_COEFFS
        return a * x + b * y + c
    if rule is ValueRule.RADIAL:
        cx, cy = bbox.center
        return np.hypot(x - cx, y - cy)
    raise ValueError("the uniform rule has no analytic field")


def generate_random_points(
    count: int,
    bbox: BoundingBox = BoundingBox(0.0, 0.0, 1.0, 1.0),
    seed: int = 0,
    value_rule: ValueRule | str = ValueRule.UNIFORM,
) -> PointSet:
    """Uniformly distributed points with synthetic values.

    Draws come from numpy's PCG64 bit generator seeded with ``seed``, in the
    order: all x, all y, then (uniform rule only) all z on ``[0, 1)``.
    """
    if count < 1:
        raise EmptyInputError(f"count must be >= 1, got {count}")
    if bbox.is_degenerate:
        raise InvalidRegionError(f"cannot generate points in degenerate box {bbox}")
    rule = ValueRule(value_rule)
    rng = np.random.Generator(np.random.PCG64(seed))
    x = np.minimum(bbox.min_x + bbox.width * rng.random(count), bbox.max_x)
    y = np.minimum(bbox.min_y + bbox.height * rng.random(count), bbox.max_y)
    if rule is ValueRule.UNIFORM:
        z = rng.random(count)
    else:
        z = field_values(x, y, rule, bbox)
    return PointSet(x, y, z)


def parse_size(text: str) -> int:
    """Parse ``"10K"`` style sizes where K is exactly 1024."""
    t = text.strip()
    if t[-1:] in ("K", "k"):
        return int(t[:-1]) * 1024
    return int(t)


def format_size(count: int) -> str:
    return f"{count // 1024}K" if count % 1024 == 0 and count else str(count)


# --- CSV point files -------------------------------------------------------

DATA_HEADER = ("x", "y", "z")
QUERY_HEADER = ("x", "y")


def read_points(path: str | PathLike, with_values: bool | None = None) -> PointSet:
    """Read a point file; the header decides data (``x,y,z``) vs query (``x,y``).

    ``with_values`` forces the expected kind when given.
    """
    path = str(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(h.strip() for h in next(reader))
        except StopIteration:
            raise PointFileError("empty file", path, 1) from None
        if header == DATA_HEADER:
            has_z = True
        elif header == QUERY_HEADER:
            has_z = False
        else:
            raise PointFileError(f"unexpected header {','.join(header)!r}", path, 1)
        if with_values is not None and with_values != has_z:
            want = ",".join(DATA_HEADER if with_values else QUERY_HEADER)
            raise PointFileError(f"expected header {want!r}", path, 1)
        ncol = len(header)
        cols: list[list[float]] = [[] for _ in range(ncol)]
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != ncol:
                raise PointFileError(f"expected {ncol} fields, got {len(row)}", path, lineno)
            for c, field in enumerate(row):
                try:
                    v = float(field)
                except ValueError:
                    raise PointFileError(f"not a number: {field!r}", path, lineno) from None
                if not math.isfinite(v):
                    raise PointFileError(f"non-finite value {field!r}", path, lineno)
                cols[c].append(v)
    return PointSet(*cols)


def write_points(path: str | PathLike, points: PointSet) -> None:
    header = DATA_HEADER if points.has_values else QUERY_HEADER
    cols = [points.x, points.y] + ([points.z] if points.has_values else [])
    write_columns(path, header, cols)


def write_columns(path: str | PathLike, header: Sequence[str], cols: Sequence[np.ndarray]) -> None:
    """Write equal-length float columns as CSV with round-trip precision."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        if len(cols[0]):
            np.savetxt(fh, np.column_stack(cols), fmt="%.17g", delimiter=",")
