import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bevlift import (
    BenchmarkError,
    BevGridSpec,
    ConfigurationError,
    DEFAULT_BEV,
    FrustumPoints,
    POOLING_ENGINES,
    benchmark_pooling,
    assert_pooled_close,
    cell_id,
    linearized_cell_ids,
    make_benchmark_instance,
    max_pool_discrepancy,
    pool,
    pool_prefix_sum,
    pool_scatter_add,
    pool_sequential,
)

SMALL = BevGridSpec(-8.0, 8.0, -8.0, 8.0, 1.0, -2.0, 2.0)


def dict_pool(points: FrustumPoints, spec: BevGridSpec):
    """Reference: per-cell Python accumulation in input order."""
    grid = {}
    dropped = 0
    for coord, feat in zip(points.coords, points.features):
        cell = cell_id(coord, spec)
        if cell is None:
            dropped += 1
            continue
        if cell not in grid:
            grid[cell] = np.zeros(points.channels)
        grid[cell] += feat.astype(np.float64)
    dense = np.zeros((points.channels, spec.rows, spec.cols))
    for (row, col), total in grid.items():
        dense[:, row, col] = total
    return dense, dropped


def random_points(rng, n, channels, spec=SMALL, margin=2.0, dtype=np.float64):
    coords = np.column_stack(
        [
            rng.uniform(spec.x_min - margin, spec.x_max + margin, n),
            rng.uniform(spec.y_min - margin, spec.y_max + margin, n),
            rng.uniform(spec.z_min - 1.0, spec.z_max + 1.0, n),
        ]
    )
    feats = rng.standard_normal((n, channels)).astype(dtype)
    return FrustumPoints(coords, feats, provenance="test")


def test_cell_id_origin_lands_at_grid_center():
    assert cell_id((0.0, 0.0, 0.0), DEFAULT_BEV) == (64, 64)


def test_cell_id_half_open_edges():
    assert cell_id((DEFAULT_BEV.x_min, 0.0, 0.0), DEFAULT_BEV) == (64, 0)
    assert cell_id((DEFAULT_BEV.x_max, 0.0, 0.0), DEFAULT_BEV) is None
    assert cell_id((0.0, DEFAULT_BEV.y_max, 0.0), DEFAULT_BEV) is None
    assert cell_id((0.0, 0.0, DEFAULT_BEV.z_max), DEFAULT_BEV) is None
    assert cell_id((0.0, 0.0, DEFAULT_BEV.z_min), DEFAULT_BEV) == (64, 64)


def test_cell_id_z_band_cull():
    assert cell_id((0.0, 0.0, -6.0), DEFAULT_BEV) is None
    assert cell_id((0.0, 0.0, 3.5), DEFAULT_BEV) is None


def test_linearized_ids_match_scalar():
    rng = np.random.default_rng(0)
    pts = random_points(rng, 500, 1)
    ids = linearized_cell_ids(pts.coords, SMALL)
    for i, coord in enumerate(pts.coords):
        cell = cell_id(coord, SMALL)
        if cell is None:
            assert ids[i] == -1
        else:
            assert ids[i] == cell[0] * SMALL.cols + cell[1]


def test_two_points_one_cell_sum():
    pts = FrustumPoints(
        np.array([[0.5, 0.5, 0.0], [0.7, 0.3, 0.0]]),
        np.array([[1.0, 2.0], [3.0, 4.0]]),
    )
    pooled = pool_sequential(pts, SMALL)
    assert pooled.dropped_count == 0
    assert pooled.grid.data[:, 8, 8].tolist() == [4.0, 6.0]
    assert pooled.grid.data.sum() == 10.0


def test_all_points_outside_grid():
    pts = FrustumPoints(np.full((5, 3), 100.0), np.ones((5, 2)))
    for engine in POOLING_ENGINES:
        pooled = pool(pts, SMALL, engine, workers=2)
        assert pooled.dropped_count == 5
        assert pooled.grid.data.sum() == 0.0


def test_empty_input_gives_zero_grid():
    pts = FrustumPoints(np.zeros((0, 3)), np.zeros((0, 3)))
    for engine in POOLING_ENGINES:
        pooled = pool(pts, SMALL, engine, workers=4)
        assert pooled.grid.data.shape == (3, SMALL.rows, SMALL.cols)
        assert pooled.grid.data.sum() == 0.0
        assert pooled.dropped_count == 0


def test_sequential_matches_dict_reference():
    rng = np.random.default_rng(21)
    pts = random_points(rng, 2000, 4)
    pooled = pool_sequential(pts, SMALL)
    expected, dropped = dict_pool(pts, SMALL)
    assert pooled.dropped_count == dropped
    assert np.max(np.abs(pooled.grid.data - expected)) < 1e-9


def test_prefix_sum_single_cell_is_bitwise():
    # all points in one cell: the running sum reduces to plain accumulation
    rng = np.random.default_rng(22)
    coords = np.tile([[0.5, 0.5, 0.0]], (100, 1))
    feats = rng.standard_normal((100, 3))
    pts = FrustumPoints(coords, feats)
    a = pool_sequential(pts, SMALL)
    b = pool_prefix_sum(pts, SMALL)
    assert np.array_equal(a.grid.data, b.grid.data)


def test_prefix_sum_matches_sequential():
    rng = np.random.default_rng(23)
    pts = random_points(rng, 20_000, 8)
    a = pool_sequential(pts, SMALL)
    b = pool_prefix_sum(pts, SMALL)
    assert b.dropped_count == a.dropped_count
    assert max_pool_discrepancy(b, a) <= 1.0


def test_scatter_single_worker_is_bitwise():
    rng = np.random.default_rng(24)
    pts = random_points(rng, 10_000, 4, dtype=np.float32)
    a = pool_sequential(pts, SMALL)
    b = pool_scatter_add(pts, SMALL, workers=1)
    assert np.array_equal(a.grid.data, b.grid.data)
    assert b.dropped_count == a.dropped_count
    assert "workers=1" in b.engine


def test_scatter_multi_worker_matches_dict_reference():
    rng = np.random.default_rng(25)
    pts = random_points(rng, 5000, 3)
    expected, dropped = dict_pool(pts, SMALL)
    for workers in (2, 3, 8):
        pooled = pool_scatter_add(pts, SMALL, workers=workers)
        assert pooled.dropped_count == dropped
        assert max_pool_discrepancy(pooled.grid.data, expected) <= 1.0


def test_engines_agree_under_cancellation():
    # one cell receives alternating +1/-1 rows; totals stay near zero where
    # naive float reassociation would show its worst
    rng = np.random.default_rng(26)
    n = 10_000
    coords = np.tile([[0.5, 0.5, 0.0]], (n, 1))
    feats = np.empty((n, 2))
    feats[0::2] = 1.0
    feats[1::2] = -1.0
    big = rng.uniform(1e6, 1e7, (n, 2))
    feats = feats * big  # big alternating values, exact zero total is gone
    pts = FrustumPoints(coords, feats)
    reference = pool_sequential(pts, SMALL)
    for engine in ("prefix_sum", "scatter_add"):
        pooled = pool(pts, SMALL, engine, workers=4)
        assert max_pool_discrepancy(pooled, reference, rtol=1e-4, atol=1e-4) <= 1.0


def test_dropped_count_is_engine_independent():
    rng = np.random.default_rng(27)
    pts = random_points(rng, 3000, 2)
    counts = {pool(pts, SMALL, engine, workers=3).dropped_count for engine in POOLING_ENGINES}
    assert len(counts) == 1


def test_linearity_power_of_two_scaling_is_exact():
    rng = np.random.default_rng(28)
    pts = random_points(rng, 2000, 3)
    doubled = FrustumPoints(pts.coords, pts.features * 2.0)
    for engine in POOLING_ENGINES:
        once = pool(pts, SMALL, engine, workers=2)
        twice = pool(doubled, SMALL, engine, workers=2)
        assert np.array_equal(twice.grid.data, 2.0 * once.grid.data)


def test_permutation_invariance_within_tolerance():
    rng = np.random.default_rng(29)
    pts = random_points(rng, 5000, 4)
    perm = rng.permutation(pts.count)
    shuffled = FrustumPoints(pts.coords[perm], pts.features[perm])
    a = pool_sequential(pts, SMALL)
    b = pool_sequential(shuffled, SMALL)
    assert max_pool_discrepancy(b, a) <= 1.0


def test_multi_view_concatenation_order():
    a = FrustumPoints(np.array([[0.5, 0.5, 0.0]]), np.array([[1.0]]))
    b = FrustumPoints(np.array([[0.5, 0.5, 0.0]]), np.array([[2.0]]))
    pooled = pool_sequential([a, b], SMALL)
    assert pooled.grid.data[0, 8, 8] == 3.0


def test_pool_rejects_channel_mismatch():
    a = FrustumPoints(np.zeros((1, 3)), np.zeros((1, 2)))
    b = FrustumPoints(np.zeros((1, 3)), np.zeros((1, 3)))
    with pytest.raises(ConfigurationError, match="channels"):
        pool_sequential([a, b], SMALL)


def test_pool_rejects_unknown_engine():
    pts = FrustumPoints(np.zeros((1, 3)), np.zeros((1, 2)))
    with pytest.raises(ConfigurationError, match="engine"):
        pool(pts, SMALL, "quicksort")


def test_pool_rejects_empty_input_list():
    with pytest.raises(ConfigurationError, match="at least one"):
        pool_sequential([], SMALL)


def test_grid_spec_rejects_fractional_cells():
    with pytest.raises(ConfigurationError, match="whole number"):
        BevGridSpec(-1.0, 1.0, -1.0, 1.0, 0.3, -1.0, 1.0)


def test_assert_pooled_close_locates_mismatch():
    base = np.zeros((2, 4, 4))
    other = base.copy()
    other[1, 2, 3] = 5.0
    with pytest.raises(BenchmarkError, match=r"channel 1 cell \(2, 3\)"):
        assert_pooled_close(other, base)


def test_benchmark_smoke():
    rows = benchmark_pooling(num_points=5000, channels=4, spec=SMALL, seed=7, repeats=3)
    assert [r.engine for r in rows] == list(POOLING_ENGINES)
    for row in rows:
        assert row.points == 5000
        assert row.median_ns > 0
        assert row.throughput_pps > 0.0
        assert row.rows == SMALL.rows and row.cols == SMALL.cols


def test_benchmark_instance_is_deterministic():
    a = make_benchmark_instance(1000, 3, SMALL, seed=5)
    b = make_benchmark_instance(1000, 3, SMALL, seed=5)
    assert np.array_equal(a.coords, b.coords)
    assert np.array_equal(a.features, b.features)


def test_benchmark_rejects_too_few_repeats():
    with pytest.raises(ConfigurationError, match="repeats"):
        benchmark_pooling(num_points=10, channels=1, spec=SMALL, repeats=2)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), workers=st.integers(1, 8))
def test_engine_equivalence_property(seed, workers):
    rng = np.random.default_rng(seed)
    pts = random_points(rng, 500, 2)
    reference = pool_sequential(pts, SMALL)
    assert max_pool_discrepancy(pool_prefix_sum(pts, SMALL), reference) <= 1.0
    assert max_pool_discrepancy(pool_scatter_add(pts, SMALL, workers=workers), reference) <= 1.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_total_mass_conservation(seed):
    # grid totals equal the channel sums of retained points
    rng = np.random.default_rng(seed)
    pts = random_points(rng, 300, 3)
    ids = linearized_cell_ids(pts.coords, SMALL)
    kept = ids >= 0
    expected = pts.features[kept].sum(axis=0)
    pooled = pool_sequential(pts, SMALL)
    total = pooled.grid.data.sum(axis=(1, 2))
    assert np.max(np.abs(total - expected)) < 1e-8
