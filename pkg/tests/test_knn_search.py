import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aidw import BoundingBox, GridConfig, PointSet, QueryPoint, brute_force_knn, build_index
from aidw import compute_bbox, determine_expansion_level, locate_cell, generate_random_points, grid_knn, knn_stage, make_grid
from aidw.errors import EmptyIndexError, InsufficientPointsError
from aidw.knn_search import search_block


def full_sort_oracle(q, data, k):
    d2 = (data.x - q.x) ** 2 + (data.y - q.y) ** 2
    return np.sort(d2)[:k]


def test_coincident_query_k1():
    d = PointSet([0.0, 1.0], [0.0, 1.0], [0.0, 0.0])
    r = brute_force_knn(QueryPoint(1.0, 1.0), d, 1)
    assert r.distances_squared.tolist() == [0.0] and r.average_distance == 0.0


def test_pythagorean_example():
    d = PointSet([0, 3, 0], [0, 0, 4], [0, 0, 0])
    r = brute_force_knn(QueryPoint(0, 0), d, 2)
    assert r.distances_squared.tolist() == [0.0, 9.0]
    assert r.average_distance == 1.5
    assert r.neighbor_ids.tolist() == [0, 1]


def test_brute_matches_full_sort():
    d = generate_random_points(500, seed=11)
    q = QueryPoint(0.3, 0.6)
    r = brute_force_knn(q, d, 10)
    np.testing.assert_allclose(r.distances_squared, full_sort_oracle(q, d, 10), rtol=1e-15)


def test_brute_rejects_large_k():
    with pytest.raises(InsufficientPointsError):
        brute_force_knn(QueryPoint(0, 0), PointSet([0], [0], [0]), 2)


def _grid(d, q=None, factor=4.0):
    return build_index(d, make_grid(d, compute_bbox(d, q), factor))


def test_level_for_k1_in_occupied_cell():
    d = generate_random_points(1000, seed=3)
    idx = _grid(d)
    lvl = determine_expansion_level(d[0], idx, 1)
    assert lvl.level == 1 and not lvl.exhausted


def test_level_exhausted():
    d = generate_random_points(20, seed=3)
    idx = _grid(d)
    lvl = determine_expansion_level(QueryPoint(0.5, 0.5), idx, 50)
    assert lvl.exhausted
    c = idx.config
    assert idx.block_count(*locate_cell(0.5, 0.5, c), lvl.level) == 20


def test_level_sufficiency_against_cell_counts():
    d = generate_random_points(1000, seed=5)
    idx = _grid(d)
    c = idx.config
    rng = np.random.default_rng(0)
    for x, y in rng.random((50, 2)):
        col, row = locate_cell(x, y, c)
        lvl = determine_expansion_level(QueryPoint(x, y), idx, 15).level
        assert idx.block_count(col, row, lvl) >= 15
        assert idx.block_count(col, row, lvl - 1) >= 15
        if lvl >= 2:
            assert idx.block_count(col, row, lvl - 2) < 15


def test_empty_index():
    idx = build_index(PointSet([], [], []), GridConfig(1.0, 1, 1, 0, 0))
    with pytest.raises(EmptyIndexError):
        determine_expansion_level(QueryPoint(0.5, 0.5), idx, 1)


def test_single_cell_grid_is_brute_force():
    d = generate_random_points(300, seed=6)
    idx = build_index(d, GridConfig(1.0, 1, 1, 0.0, 0.0))
    for i in range(10):
        q = QueryPoint(i / 10, 1 - i / 10)
        g, b = grid_knn(q, idx, d, 7), brute_force_knn(q, d, 7)
        assert np.array_equal(g.distances_squared, b.distances_squared)
        assert g.average_distance == b.average_distance


def _edge_neighbor():
    # Query near the right edge of the middle cell; its own cell holds one far
    # point, the cell to the right holds a much closer one.
    data = PointSet([1.05, 2.05, 0.5, 2.5], [1.5, 1.5, 2.5, 0.5], [0, 1, 2, 3])
    idx = build_index(data, GridConfig(1.0, 3, 3, 0.0, 0.0))
    return data, idx, QueryPoint(1.95, 1.5)


def test_fixed_block_misses_the_outside_point():
    data, idx, q = _edge_neighbor()
    inside = search_block(q, idx, data, 1, level=0)
    assert inside.neighbor_ids.tolist() == [0]


def test_grid_finds_outside_point():
    data, idx, q = _edge_neighbor()
    assert determine_expansion_level(q, idx, 1).level == 1
    r = grid_knn(q, idx, data, 1)
    assert r.neighbor_ids.tolist() == [1]


def test_extra_level_alone_can_miss_a_corner_neighbor():
    # With the query in a cell corner, the nearest point can lie two rings out
    # even though the level-0 block is non-empty; the clearance check catches it.
    data = PointSet([2.99, 0.95], [2.99, 2.01], [0, 1])
    idx = build_index(data, GridConfig(1.0, 5, 5, 0.0, 0.0))
    q = QueryPoint(2.01, 2.01)
    assert determine_expansion_level(q, idx, 1).level == 1
    assert search_block(q, idx, data, 1, level=1).neighbor_ids.tolist() == [0]
    r = grid_knn(q, idx, data, 1)
    assert r.neighbor_ids.tolist() == [1]
    assert r.distances_squared[0] == brute_force_knn(q, data, 1).distances_squared[0]


@pytest.mark.parametrize("k", [1, 5, 15])
def test_grid_equals_brute_random(k):
    d = generate_random_points(2000, seed=k)
    q = generate_random_points(200, seed=100 + k).as_queries()
    idx = _grid(d, q)
    g = knn_stage(q, idx, d, k, "grid")
    b = knn_stage(q, None, d, k, "brute")
    assert np.array_equal(g.distances_squared, b.distances_squared)
    np.testing.assert_allclose(g.average_distance, b.average_distance, rtol=1e-12, atol=0)


@settings(max_examples=80, deadline=None)
@given(
    m=st.integers(1, 600),
    n=st.integers(1, 60),
    k=st.integers(1, 40),
    factor=st.sampled_from([0.5, 1.0, 2.0, 4.0, 8.0]),
    seed=st.integers(0, 2**31),
    lattice=st.booleans(),
)
def test_grid_oracle_property(m, n, k, factor, seed, lattice):
    k = min(k, m)
    rng = np.random.default_rng(seed)
    pts = rng.random((m + n, 2))
    if lattice:
        # coarse coordinates create exact ties and points on cell edges
        pts = np.round(pts * 8) / 8
    d = PointSet(pts[:m, 0], pts[:m, 1], np.zeros(m))
    q = PointSet(pts[m:, 0], pts[m:, 1])
    box = compute_bbox(d, q)
    if box.area == 0:
        box = BoundingBox(box.min_x, box.min_y, box.min_x + 1, box.min_y + 1)
    idx = build_index(d, make_grid(d, box, factor))
    g = knn_stage(q, idx, d, k, "grid")
    b = knn_stage(q, None, d, k, "brute")
    assert np.array_equal(g.distances_squared, b.distances_squared)
    assert np.all(np.diff(g.distances_squared, axis=1) >= 0)
    np.testing.assert_allclose(g.average_distance, b.average_distance, rtol=1e-12, atol=0)


def test_grid_exhaustion_returns_all_points():
    d = generate_random_points(5, seed=1)
    idx = _grid(d)
    r = knn_stage(PointSet([0.5], [0.5]), idx, d, 9, "grid")
    assert r.exhausted and r.distances_squared.shape == (1, 5)
    np.testing.assert_array_equal(r.distances_squared[0], full_sort_oracle(QueryPoint(0.5, 0.5), d, 5))


def test_empty_query_set():
    d = generate_random_points(10, seed=1)
    assert len(knn_stage(PointSet([], []), _grid(d), d, 3)) == 0
    assert len(knn_stage(PointSet([], []), None, d, 3, "brute")) == 0


def test_stage_order_and_engine_check():
    d = generate_random_points(400, seed=2)
    q = generate_random_points(50, seed=3).as_queries()
    batch = knn_stage(q, _grid(d, q), d, 4)
    for i in (0, 17, 49):
        assert np.array_equal(batch[i].distances_squared, brute_force_knn(q[i], d, 4).distances_squared)
    with pytest.raises(ValueError):
        knn_stage(q, None, d, 4, "kdtree")
