"""Command-line front end: ``aidw generate | interpolate | bench | raster``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from typing import Sequence

from . import __version__
from .bench import (
    RunConfig,
    raster,
    run_bench,
    run_pipeline,
    run_report,
    write_ascii_grid,
    write_bench_csv,
    write_json,
    write_results,
)
from .core_types import (
    BoundingBox,
    PointSet,
    ValueRule,
    generate_random_points,
    parse_size,
    read_points,
    write_points,
)
from .errors import AidwError
from .grid_index import DEFAULT_CELL_FACTOR
from .parallel_executor import time_stage

log = logging.getLogger("aidw")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _levels(text: str) -> tuple[float, ...]:
    v = _floats(text)
    if len(v) != 5:
        raise argparse.ArgumentTypeError(f"need five alpha levels, got {len(v)}")
    return v


def _bbox(text: str) -> BoundingBox:
    v = _floats(text)
    if len(v) != 4:
        raise argparse.ArgumentTypeError("bbox is min_x,min_y,max_x,max_y")
    return BoundingBox(*v)


def _size(text: str) -> int:
    try:
        return parse_size(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _sizes(text: str) -> list[int]:
    return [_size(t) for t in text.split(",") if t.strip()]


def _workers(text: str):
    return text if text in ("max", "auto") else int(text)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline")
    g.add_argument("--mode", choices=("idw", "aidw"), default="aidw")
    g.add_argument("--knn", dest="knn_engine", choices=("grid", "brute"), default="grid")
    g.add_argument("--variant", choices=("naive", "blocked"), default="blocked")
    g.add_argument("--k", type=int, default=15)
    g.add_argument("--alpha-levels", type=_levels, default=None, metavar="A1,A2,A3,A4,A5")
    g.add_argument("--alpha", type=float, default=2.0, help="exponent for --mode idw")
    g.add_argument("--rmin", dest="r_min", type=float, default=0.0)
    g.add_argument("--rmax", dest="r_max", type=float, default=2.0)
    g.add_argument("--area", type=float, default=None, help="study area (default: bbox of data and queries)")
    g.add_argument("--cell-factor", type=float, default=DEFAULT_CELL_FACTOR)
    g.add_argument("--workers", type=_workers, default=1, help="thread count or 'max'")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--strict", action="store_true", help="pin accumulation order (no vectorized sums)")
    g.add_argument("--value-rule", choices=[r.value for r in ValueRule], default="uniform")


def _config(args: argparse.Namespace, **extra) -> RunConfig:
    kw = dict(
        mode=args.mode,
        knn_engine=args.knn_engine,
        variant=args.variant,
        k=args.k,
        alpha=args.alpha,
        r_min=args.r_min,
        r_max=args.r_max,
        area=args.area,
        cell_factor=args.cell_factor,
        workers=args.workers,
        seed=args.seed,
        strict=args.strict,
        value_rule=args.value_rule,
    )
    if args.alpha_levels is not None:
        kw["alpha_levels"] = args.alpha_levels
    kw.update(extra)
    return RunConfig(**kw)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aidw", description="Adaptive IDW interpolation with grid kNN.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write random points as CSV")
    g.add_argument("--count", type=_size, required=True, help="e.g. 10240 or 10K")
    g.add_argument("--bbox", type=_bbox, default=BoundingBox.unit())
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--value-rule", choices=[r.value for r in ValueRule], default="uniform")
    g.add_argument("--no-values", action="store_true", help="write x,y only (query file)")
    g.add_argument("--out", required=True)

    i = sub.add_parser("interpolate", help="predict at query points")
    i.add_argument("--data", help="CSV with x,y,z (default: generated)")
    i.add_argument("--queries", help="CSV with x,y (default: generated)")
    i.add_argument("--sizes", type=_sizes, default=None, help="m[,n] for generated inputs, e.g. 10K")
    i.add_argument("--out", help="results CSV x,y,alpha,z_pred")
    i.add_argument("--report", help="JSON report")
    _add_run_flags(i)

    b = sub.add_parser("bench", help="grid vs brute and naive vs blocked over a size ladder")
    b.add_argument("--sizes", type=_sizes, default=_sizes("10K,50K,100K"))
    b.add_argument("--out", help="CSV table")
    b.add_argument("--report", help="JSON report")
    _add_run_flags(b)

    r = sub.add_parser("raster", help="interpolate onto a regular lattice (ESRI ASCII grid)")
    r.add_argument("--data", help="CSV with x,y,z (default: generated)")
    r.add_argument("--sizes", type=_sizes, default=None, help="m for generated data")
    r.add_argument("--nx", type=int, required=True)
    r.add_argument("--ny", type=int, required=True)
    r.add_argument("--bbox", type=_bbox, default=None, help="lattice extent (default: data bbox)")
    r.add_argument("--out", required=True)
    r.add_argument("--report", help="JSON report")
    _add_run_flags(r)
    return p


def _inputs(args: argparse.Namespace, need_queries: bool) -> tuple[PointSet, PointSet | None, float]:
    sizes = args.sizes or []
    m = sizes[0] if sizes else 10 * 1024
    n = sizes[1] if len(sizes) > 1 else m

    def load():
        if args.data:
            data = read_points(args.data, with_values=True)
        else:
            data = generate_random_points(m, seed=args.seed, value_rule=args.value_rule)
        if not need_queries:
            return data, None
        if getattr(args, "queries", None):
            queries = read_points(args.queries, with_values=False)
        else:
            queries = generate_random_points(n, seed=args.seed + 1).as_queries()
        return data, queries

    (data, queries), ms = time_stage("ingest", load)
    return data, queries, ms


def cmd_generate(args: argparse.Namespace) -> int:
    pts = generate_random_points(args.count, args.bbox, args.seed, args.value_rule)
    write_points(args.out, pts.as_queries() if args.no_values else pts)
    return 0


def cmd_interpolate(args: argparse.Namespace) -> int:
    data, queries, ingest_ms = _inputs(args, need_queries=True)
    cfg = _config(
        args, m=data.count, n=queries.count, data_path=args.data, queries_path=args.queries,
        out_path=args.out, report_path=args.report,
    )
    run = run_pipeline(data, queries, cfg, ingest_ms)
    if args.out:
        write_results(args.out, run)
    rep = run_report(run)
    if args.report:
        write_json(args.report, rep)
    print(json.dumps(rep["timings"], indent=2))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _config(args, report_path=args.report, out_path=args.out)
    report = run_bench(args.sizes, cfg)
    if args.out:
        write_bench_csv(args.out, report)
    if args.report:
        write_json(args.report, report.to_dict())
    cols = ("size", "knn_grid_ms", "knn_brute_ms", "knn_ratio", "total_grid_ms",
            "total_brute_ms", "pipeline_speedup", "knn_pct", "outputs_identical")
    print("  ".join(f"{c:>14}" for c in cols))
    for row in report.rows:
        print("  ".join(f"{row[c]:>14.4g}" if isinstance(row[c], float) else f"{row[c]!s:>14}" for c in cols))
    for f in report.failures:
        print(f"size {f['m']} failed: {f['error']}", file=sys.stderr)
    return 1 if report.failures else 0


def cmd_raster(args: argparse.Namespace) -> int:
    data, _, ingest_ms = _inputs(args, need_queries=False)
    cfg = _config(args, m=data.count, data_path=args.data, out_path=args.out, report_path=args.report)
    lattice, run = raster(data, cfg, args.nx, args.ny, args.bbox)
    write_ascii_grid(args.out, lattice, run.result.predicted)
    if args.report:
        write_json(args.report, run_report(replace(run, timings=replace(run.timings, ingest_ms=ingest_ms))))
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "interpolate": cmd_interpolate,
    "bench": cmd_bench,
    "raster": cmd_raster,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (AidwError, OSError) as exc:
        print(f"aidw {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
