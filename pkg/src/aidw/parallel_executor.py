"""Per-query parallel map with fixed output placement, plus stage timing.

Work is split into contiguous index ranges handed to a thread pool. The
numeric kernels release the GIL, so threads run them concurrently; each range
writes only its own output slots, so results never depend on scheduling.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Callable, TypeVar

from .errors import StageError

log = logging.getLogger(__name__)

T = TypeVar("T")

# Ranges per worker; a few per worker smooths out uneven per-query cost.
CHUNKS_PER_WORKER = 4


def max_workers() -> int:
    return os.cpu_count() or 1


def resolve_workers(workers: int | str | None) -> int:
    if workers in (None, 0, "max", "auto"):
        return max_workers()
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def chunk_ranges(n: int, parts: int) -> list[tuple[int, int]]:
    """Split ``range(n)`` into at most ``parts`` contiguous, near-equal ranges."""
    if n <= 0:
        return []
    parts = max(1, min(parts, n))
    base, extra = divmod(n, parts)
    out = []
    start = 0
    for p in range(parts):
        stop = start + base + (1 if p < extra else 0)
        out.append((start, stop))
        start = stop
    return out


def parallel_for_chunks(n: int, body: Callable[[int, int], Any], workers: int = 1) -> None:
    """Call ``body(start, stop)`` over contiguous ranges covering ``range(n)``."""
    workers = resolve_workers(workers)
    if n <= 0:
        return
    if workers == 1:
        body(0, n)
        return
    ranges = chunk_ranges(n, workers * CHUNKS_PER_WORKER)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(body, a, b) for a, b in ranges]
        errors = []
        for (a, _), fut in zip(ranges, futures):
            exc = fut.exception()
            if exc is not None:
                errors.append((a, exc))
    if errors:
        raise errors[0][1]


def parallel_map_indexed(n: int, op: Callable[[int], T], workers: int = 1) -> list[T]:
    """``[op(0), ..., op(n-1)]`` evaluated on ``workers`` threads.

    The first failing index (lowest, not first in time) is reported as a
    :class:`StageError`.
    """
    out: list[Any] = [None] * max(n, 0)

    def body(start: int, stop: int) -> None:
        for i in range(start, stop):
            try:
                out[i] = op(i)
            except Exception as exc:
                raise StageError(i, exc) from exc

    workers = resolve_workers(workers)
    if workers == 1 or n <= 1:
        body(0, n)
        return out
    ranges = chunk_ranges(n, workers * CHUNKS_PER_WORKER)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(body, a, b) for a, b in ranges]
        failures = [f.exception() for f in futures]
    failures = [e for e in failures if e is not None]
    if failures:
        raise min(failures, key=lambda e: getattr(e, "index", n))
    return out


def time_stage(label: str, thunk: Callable[[], T]) -> tuple[T, float]:
    """Run ``thunk`` once; return its result and the elapsed monotonic milliseconds."""
    t0 = time.perf_counter()
    result = thunk()
    ms = (time.perf_counter() - t0) * 1e3
    log.debug("stage %s: %.3f ms", label, ms)
    return result, ms


@dataclass
class StageTimings:
    """Wall-clock split of one pipeline run.

    ``setup_ms`` is the part of ``total_ms`` outside the two stages (bounding
    box, parameter checks); ``ingest_ms`` (file parsing) is reported apart and
    is not part of ``total_ms``.
    """

    knn_ms: float
    interp_ms: float
    total_ms: float
    worker_count: int
    m: int
    n: int
    k: int
    ingest_ms: float = 0.0

    @property
    def setup_ms(self) -> float:
        return max(self.total_ms - self.knn_ms - self.interp_ms, 0.0)

    def percentages(self) -> dict[str, float]:
        """Share of the two stages in their sum (sums to 100)."""
        staged = self.knn_ms + self.interp_ms
        if staged <= 0:
            return {"knn_pct": 0.0, "interp_pct": 0.0}
        knn = 100.0 * self.knn_ms / staged
        return {"knn_pct": knn, "interp_pct": 100.0 - knn}

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["setup_ms"] = self.setup_ms
        d.update(self.percentages())
        return d
