"""BEV voxel pooling engines and their benchmark harness.

Pooling sums the feature rows of all points that fall into the same cell of
a ground-plane grid.  Three engines produce the same grid:

* ``sequential``: one pass over points in input order; the reference oracle.
* ``prefix_sum``: points are stably sorted by linearized cell id, a
  per-channel inclusive running sum is taken over the sorted rows, and each
  cell's total is recovered by subtracting the running sum at the previous
  segment boundary from the one at its own last row.
* ``scatter_add``: points are split into ``workers`` contiguous chunks, each
  chunk accumulates into its own private partial grid, and the partial grids
  are merged in worker order at the end.  Inputs are shared read-only and the
  partial grids are never shared between chunks, so for a fixed worker count
  the result is deterministic; with one worker it reproduces the sequential
  oracle bit for bit.

All engines accumulate in float64 regardless of the feature dtype and agree
with the oracle within 1e-5 relative per cell with a 1e-6 absolute floor.
Points outside the grid extents or the z band are dropped and counted; the
count does not depend on the engine.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit, prange

from .errors import BenchmarkError, ConfigurationError
from .grids import TAG_BEV_FEATURE, FeatureGrid
from .lift import FrustumPoints

ENGINE_SEQUENTIAL = "sequential"
ENGINE_PREFIX_SUM = "prefix_sum"
ENGINE_SCATTER_ADD = "scatter_add"
POOLING_ENGINES = (ENGINE_SEQUENTIAL, ENGINE_PREFIX_SUM, ENGINE_SCATTER_ADD)

EQUIV_RTOL = 1e-5
EQUIV_ATOL = 1e-6


@dataclass(frozen=True)
class BevGridSpec:
    """Ground-plane grid extents, cell size, and the vertical band kept."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    cell_size: float
    z_min: float
    z_max: float

    def __post_init__(self):
        if not (self.cell_size > 0.0):
            raise ConfigurationError(f"pooling: cell size must be positive, got {self.cell_size!r}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ConfigurationError("pooling: grid extents must be nonempty")
        if not (self.z_max > self.z_min):
            raise ConfigurationError("pooling: z band must be nonempty")
        for lo, hi, axis in ((self.x_min, self.x_max, "x"), (self.y_min, self.y_max, "y")):
            cells = (hi - lo) / self.cell_size
            if abs(cells - round(cells)) > 1e-9:
                raise ConfigurationError(
                    f"pooling: {axis} extent {hi - lo!r} is not a whole number of cells of {self.cell_size!r}"
                )

    @property
    def rows(self) -> int:
        return round((self.y_max - self.y_min) / self.cell_size)

    @property
    def cols(self) -> int:
        return round((self.x_max - self.x_min) / self.cell_size)


DEFAULT_BEV = BevGridSpec(-51.2, 51.2, -51.2, 51.2, 0.8, -5.0, 3.0)


@dataclass(frozen=True)
class PooledBev:
    """A pooled feature grid plus the engine tag and dropped-point count."""

    grid: FeatureGrid
    engine: str
    dropped_count: int


def cell_id(coord, spec: BevGridSpec) -> Optional[tuple[int, int]]:
    """Grid cell ``(row, col)`` of one ego-frame point, or None if dropped.

    Cells are half-open on every axis: ``row = floor((y - y_min) / cell)``
    and ``col = floor((x - x_min) / cell)``, valid only when the point lies
    strictly inside ``[min, max)`` horizontally and within the z band.
    """
    x, y, z = (float(coord[0]), float(coord[1]), float(coord[2]))
    if not (spec.x_min <= x < spec.x_max and spec.y_min <= y < spec.y_max):
        return None
    if not (spec.z_min <= z < spec.z_max):
        return None
    col = int(np.floor((x - spec.x_min) / spec.cell_size))
    row = int(np.floor((y - spec.y_min) / spec.cell_size))
    if not (0 <= row < spec.rows and 0 <= col < spec.cols):
        return None
    return row, col


def linearized_cell_ids(coords: np.ndarray, spec: BevGridSpec) -> np.ndarray:
    """Vectorized ``row * cols + col`` per point, with -1 for dropped points."""
    pts = np.asarray(coords, dtype=np.float64)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    col = np.floor((x - spec.x_min) / spec.cell_size)
    row = np.floor((y - spec.y_min) / spec.cell_size)
    ok = (
        (x >= spec.x_min)
        & (x < spec.x_max)
        & (y >= spec.y_min)
        & (y < spec.y_max)
        & (z >= spec.z_min)
        & (z < spec.z_max)
        & (col >= 0)
        & (col < spec.cols)
        & (row >= 0)
        & (row < spec.rows)
    )
    ids = (row * spec.cols + col).astype(np.int64)
    return np.where(ok, ids, np.int64(-1))


def _gather(points) -> tuple[np.ndarray, np.ndarray, int]:
    """Concatenate one or more FrustumPoints into (coords, features, channels)."""
    if isinstance(points, FrustumPoints):
        points = [points]
    else:
        points = list(points)
    if not points:
        raise ConfigurationError("pooling: at least one FrustumPoints input is required")
    channels = points[0].channels
    for i, p in enumerate(points):
        if not isinstance(p, FrustumPoints):
            raise ConfigurationError(f"pooling: input {i} is not FrustumPoints")
        if p.channels != channels:
            raise ConfigurationError(
                f"pooling: input {i} has {p.channels} channels, expected {channels}"
            )
    if len(points) == 1:
        return points[0].coords, points[0].features, channels
    coords = np.concatenate([p.coords for p in points], axis=0)
    feats = np.concatenate([np.asarray(p.features, dtype=np.float64) for p in points], axis=0)
    return coords, feats, channels


@njit(cache=True)
def _accumulate_serial(ids, feats, n_cells, n_channels):
    grid = np.zeros((n_cells, n_channels), dtype=np.float64)
    dropped = 0
    for i in range(ids.shape[0]):
        c = ids[i]
        if c < 0:
            dropped += 1
            continue
        for k in range(n_channels):
            grid[c, k] += feats[i, k]
    return grid, dropped


@njit(parallel=True, cache=True)
def _accumulate_chunked(ids, feats, n_cells, n_channels, workers):
    # One private partial grid per worker; chunks are contiguous slices of the
    # input so within-chunk order matches input order.
    partials = np.zeros((workers, n_cells, n_channels), dtype=np.float64)
    drops = np.zeros(workers, dtype=np.int64)
    n = ids.shape[0]
    for w in prange(workers):
        lo = w * n // workers
        hi = (w + 1) * n // workers
        for i in range(lo, hi):
            c = ids[i]
            if c < 0:
                drops[w] += 1
            else:
                for k in range(n_channels):
                    partials[w, c, k] += feats[i, k]
    return partials, drops


def _as_pooled(flat_grid: np.ndarray, spec: BevGridSpec, engine: str, dropped: int) -> PooledBev:
    data = flat_grid.T.reshape(flat_grid.shape[1], spec.rows, spec.cols)
    return PooledBev(FeatureGrid(data, TAG_BEV_FEATURE), engine, int(dropped))


def pool_sequential(points, spec: BevGridSpec) -> PooledBev:
    """Reference engine: accumulate every point in input order."""
    coords, feats, channels = _gather(points)
    ids = linearized_cell_ids(coords, spec)
    grid, dropped = _accumulate_serial(ids, feats, spec.rows * spec.cols, channels)
    return _as_pooled(grid, spec, ENGINE_SEQUENTIAL, dropped)


def pool_prefix_sum(points, spec: BevGridSpec) -> PooledBev:
    """Sort-then-scan engine: stable sort by cell, running sum, boundary subtraction."""
    coords, feats, channels = _gather(points)
    ids = linearized_cell_ids(coords, spec)
    valid = ids >= 0
    dropped = int(ids.shape[0] - np.count_nonzero(valid))
    grid = np.zeros((spec.rows * spec.cols, channels), dtype=np.float64)
    if dropped < ids.shape[0]:
        ids_v = ids[valid]
        feats_v = np.asarray(feats[valid], dtype=np.float64)
        order = np.argsort(ids_v, kind="stable")
        ids_s = ids_v[order]
        cum = np.cumsum(feats_v[order], axis=0)
        boundaries = np.nonzero(np.diff(ids_s))[0]
        ends = np.concatenate([boundaries, [ids_s.shape[0] - 1]])
        totals = cum[ends].copy()
        totals[1:] -= cum[ends[:-1]]
        grid[ids_s[ends]] = totals
    return _as_pooled(grid, spec, ENGINE_PREFIX_SUM, dropped)


def pool_scatter_add(points, spec: BevGridSpec, workers: int = 1) -> PooledBev:
    """Chunked engine: private per-worker partial grids merged in worker order."""
    if workers < 1:
        raise ConfigurationError(f"pooling: workers must be at least 1, got {workers}")
    coords, feats, channels = _gather(points)
    ids = linearized_cell_ids(coords, spec)
    partials, drops = _accumulate_chunked(ids, feats, spec.rows * spec.cols, channels, workers)
    grid = partials.sum(axis=0)
    engine = f"{ENGINE_SCATTER_ADD}(workers={workers}, private-partials)"
    return _as_pooled(grid, spec, engine, int(drops.sum()))


def pool(points, spec: BevGridSpec, engine: str, workers: int = 1) -> PooledBev:
    """Dispatch to one of POOLING_ENGINES by name."""
    if engine == ENGINE_SEQUENTIAL:
        return pool_sequential(points, spec)
    if engine == ENGINE_PREFIX_SUM:
        return pool_prefix_sum(points, spec)
    if engine == ENGINE_SCATTER_ADD:
        return pool_scatter_add(points, spec, workers=workers)
    raise ConfigurationError(f"pooling: unknown engine {engine!r}, expected one of {POOLING_ENGINES}")


def _grid_data(value) -> np.ndarray:
    if isinstance(value, PooledBev):
        return value.grid.data
    if isinstance(value, FeatureGrid):
        return value.data
    return np.asarray(value, dtype=np.float64)


def max_pool_discrepancy(candidate, reference, rtol: float = EQUIV_RTOL, atol: float = EQUIV_ATOL) -> float:
    """Max over cells of ``|a - b| / (atol + rtol |b|)``; at most 1.0 means equivalent."""
    a = _grid_data(candidate)
    b = _grid_data(reference)
    if a.shape != b.shape:
        raise ConfigurationError(f"pooling: cannot compare grids of shapes {a.shape} and {b.shape}")
    return float(np.max(np.abs(a - b) / (atol + rtol * np.abs(b)), initial=0.0))


def assert_pooled_close(candidate, reference, rtol: float = EQUIV_RTOL, atol: float = EQUIV_ATOL, context: str = "") -> None:
    """Raise BenchmarkError with a located diagnostic if grids disagree."""
    a = _grid_data(candidate)
    b = _grid_data(reference)
    if a.shape != b.shape:
        raise ConfigurationError(f"pooling: cannot compare grids of shapes {a.shape} and {b.shape}")
    err = np.abs(a - b) / (atol + rtol * np.abs(b))
    worst = float(err.max(initial=0.0))
    if worst > 1.0:
        ch, row, col = np.unravel_index(int(err.argmax()), err.shape)
        where = f" during {context}" if context else ""
        raise BenchmarkError(
            f"pooling: engines disagree{where} at channel {ch} cell ({row}, {col}): "
            f"{a[ch, row, col]!r} vs {b[ch, row, col]!r} "
            f"(normalized error {worst:.3e}, rtol {rtol:g}, atol {atol:g})"
        )


@dataclass(frozen=True)
class BenchmarkRow:
    """One timed engine run over one instance."""

    engine: str
    points: int
    channels: int
    rows: int
    cols: int
    workers: int
    median_ns: int
    throughput_pps: float


def make_benchmark_instance(
    num_points: int,
    channels: int,
    spec: BevGridSpec = DEFAULT_BEV,
    seed: int = 0,
) -> FrustumPoints:
    """Deterministic random instance; coordinates overshoot the extents a little
    so a few percent of points exercise the drop path."""
    if num_points < 1 or channels < 1:
        raise ConfigurationError(
            f"pooling: benchmark instance needs positive sizes, got points={num_points} channels={channels}"
        )
    rng = np.random.default_rng(seed)
    margin = 2.0 * spec.cell_size
    coords = np.column_stack(
        [
            rng.uniform(spec.x_min - margin, spec.x_max + margin, num_points),
            rng.uniform(spec.y_min - margin, spec.y_max + margin, num_points),
            rng.uniform(spec.z_min - 0.5, spec.z_max + 0.5, num_points),
        ]
    )
    feats = rng.standard_normal((num_points, channels)).astype(np.float32)
    return FrustumPoints(coords, feats, provenance="benchmark")


def benchmark_pooling(
    num_points: int,
    channels: int,
    spec: BevGridSpec = DEFAULT_BEV,
    seed: int = 0,
    engines: Sequence[str] = POOLING_ENGINES,
    repeats: int = 5,
    workers: int = 1,
) -> list[BenchmarkRow]:
    """Time each engine on one shared random instance.

    Every engine is run once untimed as warmup, checked against the
    sequential oracle (both values and dropped counts), then timed
    ``repeats`` times; the rows report the median.  Any disagreement aborts
    the benchmark with a diagnostic rather than producing misleading numbers.
    """
    if repeats < 3:
        raise ConfigurationError(f"pooling: benchmark needs at least 3 repeats, got {repeats}")
    for engine in engines:
        if engine not in POOLING_ENGINES:
            raise ConfigurationError(
                f"pooling: unknown engine {engine!r}, expected one of {POOLING_ENGINES}"
            )
    instance = make_benchmark_instance(num_points, channels, spec, seed)
    reference = pool_sequential(instance, spec)
    rows = []
    for engine in engines:
        effective_workers = workers if engine == ENGINE_SCATTER_ADD else 1
        warm = pool(instance, spec, engine, workers=effective_workers)
        rtol = 1e-7 if effective_workers == 1 else EQUIV_RTOL
        assert_pooled_close(warm, reference, rtol=rtol, context=f"benchmark warmup of {engine}")
        if warm.dropped_count != reference.dropped_count:
            raise BenchmarkError(
                f"pooling: {engine} dropped {warm.dropped_count} points, oracle dropped "
                f"{reference.dropped_count}"
            )
        times = []
        for _ in range(repeats):
            start = time.perf_counter_ns()
            pool(instance, spec, engine, workers=effective_workers)
            times.append(time.perf_counter_ns() - start)
        median_ns = int(statistics.median(times))
        rows.append(
            BenchmarkRow(
                engine=engine,
                points=num_points,
                channels=channels,
                rows=spec.rows,
                cols=spec.cols,
                workers=effective_workers,
                median_ns=median_ns,
                throughput_pps=num_points / (median_ns / 1e9),
            )
        )
    return rows
