"""Pipeline orchestration, benchmark ladder, and report / raster files.

A run is ``index -> kNN -> alpha -> weighted mean``. The kNN stage time
includes building the grid index (the brute engine has no index). Reports
echo the full configuration and the package version.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from os import PathLike
from typing import Any, Literal, Sequence

import numpy as np

from . import __version__
from .core_types import (
    DEFAULT_ALPHA_LEVELS,
    AidwParams,
    BoundingBox,
    PointSet,
    compute_bbox,
    format_size,
    generate_random_points,
    write_columns,
)
from .grid_index import DEFAULT_CELL_FACTOR, build_index, make_grid
from .interpolation import InterpolationResult, aidw_predict_all, idw_predict_all
from .knn_search import KnnBatch, knn_stage
from .parallel_executor import StageTimings, resolve_workers, time_stage

log = logging.getLogger(__name__)

Mode = Literal["idw", "aidw"]

NON_REPRODUCIBLE = (
    "Absolute stage times and speedups over a serial CPU baseline measured on "
    "GPU hardware are not reproduced here; only ratios and trends between "
    "engines and variants on the same machine are reported."
)


@dataclass(frozen=True)
class RunConfig:
    mode: Mode = "aidw"
    knn_engine: str = "grid"
    variant: str = "blocked"
    k: int = 15
    alpha_levels: tuple[float, ...] = DEFAULT_ALPHA_LEVELS
    alpha: float = 2.0
    r_min: float = 0.0
    r_max: float = 2.0
    area: float | None = None
    cell_factor: float = DEFAULT_CELL_FACTOR
    workers: int = 1
    seed: int = 0
    m: int | None = None
    n: int | None = None
    value_rule: str = "uniform"
    strict: bool = False
    data_path: str | None = None
    queries_path: str | None = None
    out_path: str | None = None
    report_path: str | None = None

    def __post_init__(self):
        if self.mode not in ("idw", "aidw"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.knn_engine not in ("grid", "brute"):
            raise ValueError(f"unknown kNN engine {self.knn_engine!r}")
        if self.variant not in ("naive", "blocked"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.cell_factor > 0:
            raise ValueError(f"cell factor must be positive, got {self.cell_factor}")
        object.__setattr__(self, "alpha_levels", tuple(float(a) for a in self.alpha_levels))
        self.params()  # validates k, levels and radii

    def params(self) -> AidwParams:
        return AidwParams(self.k, self.r_min, self.r_max, self.alpha_levels, self.area)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["alpha_levels"] = list(self.alpha_levels)
        return d


@dataclass(frozen=True, eq=False)
class PipelineRun:
    config: RunConfig
    queries: PointSet
    result: InterpolationResult
    knn: KnnBatch | None
    timings: StageTimings


def working_region(bbox: BoundingBox) -> BoundingBox:
    """``bbox`` with any zero-extent axis widened so grid and area are defined.

    A flat axis takes the other axis' extent (or 1 if both are flat), centred
    on the original coordinate.
    """
    if not bbox.is_degenerate:
        return bbox
    span = max(bbox.width, bbox.height) or 1.0
    hx = 0.5 * (span if bbox.width == 0 else 0.0)
    hy = 0.5 * (span if bbox.height == 0 else 0.0)
    return BoundingBox(bbox.min_x - hx, bbox.min_y - hy, bbox.max_x + hx, bbox.max_y + hy)


def _knn(data: PointSet, queries: PointSet, bbox: BoundingBox, cfg: RunConfig, workers: int) -> KnnBatch:
    if cfg.knn_engine == "brute":
        return knn_stage(queries, None, data, cfg.k, "brute", workers)
    index = build_index(data, make_grid(data, bbox, cfg.cell_factor))
    return knn_stage(queries, index, data, cfg.k, "grid", workers)


def run_pipeline(data: PointSet, queries: PointSet, cfg: RunConfig, ingest_ms: float = 0.0) -> PipelineRun:
    """Run one configuration end to end and time both stages."""
    workers = resolve_workers(cfg.workers)
    t0 = time.perf_counter()
    bbox = working_region(compute_bbox(data, queries))
    if cfg.mode == "idw":
        knn, knn_ms = None, 0.0
        result, interp_ms = time_stage(
            "interp",
            lambda: idw_predict_all(queries, data, cfg.alpha, cfg.variant, workers, cfg.strict),
        )
    else:
        knn, knn_ms = time_stage("knn", lambda: _knn(data, queries, bbox, cfg, workers))
        params = cfg.params()
        if params.area is None:
            params = replace(params, area=bbox.area)
        result, interp_ms = time_stage(
            "interp",
            lambda: aidw_predict_all(queries, data, knn, params, cfg.variant, workers, cfg.strict),
        )
    total_ms = (time.perf_counter() - t0) * 1e3
    timings = StageTimings(knn_ms, interp_ms, total_ms, workers, data.count, queries.count, cfg.k, ingest_ms)
    return PipelineRun(cfg, queries, result, knn, timings)


def write_results(path: str | PathLike, run: PipelineRun) -> None:
    q = run.queries
    write_columns(path, ("x", "y", "alpha", "z_pred"), [q.x, q.y, run.result.alphas, run.result.predicted])


def run_report(run: PipelineRun, extra: dict[str, Any] | None = None) -> dict[str, Any]:
    rep = {
        "version": __version__,
        "config": run.config.to_dict(),
        "timings": run.timings.to_dict(),
        "note": NON_REPRODUCIBLE,
    }
    if extra:
        rep.update(extra)
    return rep


def write_json(path: str | PathLike, obj: dict[str, Any]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


# --- benchmark ladder -------------------------------------------------------

BENCH_COLUMNS = (
    "size", "m", "n", "k", "workers",
    "knn_grid_ms", "knn_brute_ms", "knn_ratio",
    "interp_naive_ms", "interp_blocked_ms", "blocked_speedup",
    "total_grid_ms", "total_brute_ms", "pipeline_speedup",
    "knn_pct", "interp_pct", "outputs_identical",
)


@dataclass
class BenchReport:
    config: dict[str, Any]
    rows: list[dict[str, Any]] = field(default_factory=list)
    failures: list[dict[str, Any]] = field(default_factory=list)
    version: str = __version__
    note: str = NON_REPRODUCIBLE
    machine: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def row(self, m: int) -> dict[str, Any]:
        for r in self.rows:
            if r["m"] == m:
                return r
        raise KeyError(m)


def bench_size(m: int, n: int, template: RunConfig, variants: Sequence[str] = ("naive", "blocked")) -> dict[str, Any]:
    """Grid and brute pipelines at one size, plus the other interpolation variant."""
    data = generate_random_points(m, seed=template.seed, value_rule=template.value_rule)
    queries = generate_random_points(n, seed=template.seed + 1).as_queries()
    base = replace(template, mode="aidw", m=m, n=n)

    grid = run_pipeline(data, queries, replace(base, knn_engine="grid"))
    brute = run_pipeline(data, queries, replace(base, knn_engine="brute"))
    identical = bool(
        np.array_equal(grid.knn.distances_squared, brute.knn.distances_squared)
        and np.array_equal(grid.result.predicted, brute.result.predicted)
    )

    interp = {base.variant: grid.timings.interp_ms}
    for v in variants:
        if v not in interp:
            params = base.params()
            _, interp[v] = time_stage(
                v,
                lambda: aidw_predict_all(queries, data, grid.knn, params, v, grid.timings.worker_count, base.strict),
            )
    naive_ms = interp.get("naive", math.nan)
    blocked_ms = interp.get("blocked", math.nan)
    g, b = grid.timings, brute.timings
    pct = g.percentages()
    return {
        "size": format_size(m),
        "m": m,
        "n": n,
        "k": base.k,
        "workers": g.worker_count,
        "knn_grid_ms": g.knn_ms,
        "knn_brute_ms": b.knn_ms,
        "knn_ratio": g.knn_ms / b.knn_ms,
        "interp_naive_ms": naive_ms,
        "interp_blocked_ms": blocked_ms,
        "blocked_speedup": naive_ms / blocked_ms,
        "total_grid_ms": g.total_ms,
        "total_brute_ms": b.total_ms,
        "pipeline_speedup": b.total_ms / g.total_ms,
        "knn_pct": pct["knn_pct"],
        "interp_pct": pct["interp_pct"],
        "outputs_identical": identical,
    }


def warm_up(template: RunConfig, variants: Sequence[str] = ("naive", "blocked")) -> None:
    """Compile (or load) every kernel a ladder touches so no row pays for it."""
    bench_size(64, 64, replace(template, k=min(template.k, 64)), variants)


def run_bench(sizes: Sequence[int], template: RunConfig, variants: Sequence[str] = ("naive", "blocked")) -> BenchReport:
    """Equal-size ladder; a failing size is recorded and the rest continue."""
    if not sizes:
        raise ValueError("the size ladder is empty")
    warm_up(template, variants)
    report = BenchReport(
        config=template.to_dict(),
        machine={"python": platform.python_version(), "cpus": resolve_workers("max")},
    )
    for s in sizes:
        try:
            row = bench_size(s, s, template, variants)
        except Exception as exc:  # keep going with the other sizes
            log.exception("size %s failed", s)
            report.failures.append({"m": s, "n": s, "error": f"{type(exc).__name__}: {exc}"})
            continue
        log.info("size %s: grid %.1f ms, brute %.1f ms", row["size"], row["total_grid_ms"], row["total_brute_ms"])
        report.rows.append(row)
    return report


def write_bench_csv(path: str | PathLike, report: BenchReport) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in report.rows:
            w.writerow({c: r[c] for c in BENCH_COLUMNS})


# --- raster -----------------------------------------------------------------

NODATA = -9999.0


@dataclass(frozen=True)
class Lattice:
    nx: int
    ny: int
    x0: float  # lower-left corner
    y0: float
    dx: float
    dy: float

    @classmethod
    def over(cls, bbox: BoundingBox, nx: int, ny: int) -> "Lattice":
        """Cell-centred lattice; a zero-extent axis gets unit cells centred on it."""
        if nx < 1 or ny < 1:
            raise ValueError(f"raster needs nx, ny >= 1, got {nx}x{ny}")
        dx = bbox.width / nx if bbox.width > 0 else 1.0
        dy = bbox.height / ny if bbox.height > 0 else 1.0
        x0 = bbox.min_x if bbox.width > 0 else bbox.min_x - 0.5 * dx * nx
        y0 = bbox.min_y if bbox.height > 0 else bbox.min_y - 0.5 * dy * ny
        return cls(nx, ny, x0, y0, dx, dy)

    def points(self) -> PointSet:
        """Queries in raster order: top row first, west to east."""
        xs = self.x0 + (np.arange(self.nx) + 0.5) * self.dx
        ys = self.y0 + (np.arange(self.ny)[::-1] + 0.5) * self.dy
        gx, gy = np.meshgrid(xs, ys)
        return PointSet(gx.ravel(), gy.ravel())


def write_ascii_grid(path: str | PathLike, lattice: Lattice, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=np.float64).reshape(lattice.ny, lattice.nx)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"ncols {lattice.nx}\nnrows {lattice.ny}\n")
        fh.write(f"xllcorner {lattice.x0!r}\nyllcorner {lattice.y0!r}\n")
        if lattice.dx == lattice.dy:
            fh.write(f"cellsize {lattice.dx!r}\n")
        else:
            fh.write(f"dx {lattice.dx!r}\ndy {lattice.dy!r}\n")
        fh.write(f"NODATA_value {NODATA:g}\n")
        np.savetxt(fh, np.where(np.isfinite(values), values, NODATA), fmt="%.17g", delimiter=" ")


def read_ascii_grid(path: str | PathLike) -> tuple[dict[str, float], np.ndarray]:
    header: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines) and lines[i] and not _is_number(lines[i].split()[0]):
        key, val = lines[i].split()
        header[key.lower()] = float(val)
        i += 1
    nx, ny = int(header["ncols"]), int(header["nrows"])
    values = np.loadtxt(lines[i:], ndmin=2) if ny else np.empty((0, nx))
    if values.shape != (ny, nx):
        raise ValueError(f"raster body is {values.shape}, header says {(ny, nx)}")
    return header, values


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def raster(data: PointSet, cfg: RunConfig, nx: int, ny: int, bbox: BoundingBox | None = None) -> tuple[Lattice, PipelineRun]:
    lattice = Lattice.over(bbox if bbox is not None else compute_bbox(data), nx, ny)
    return lattice, run_pipeline(data, lattice.points(), cfg)
