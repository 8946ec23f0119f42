import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetexplore.planner import (
    NoPathError,
    Path,
    RRTParams,
    Tour,
    brute_force_tour,
    path_length,
    rrt_path,
    segment_free,
    shortcut,
    tsp_tour,
)
from hetexplore.world import OccupancyGrid, generate_map, path_lengths


def test_path_length_units():
    p = Path([(0, 0), (3, 4), (3, 10)], resolution=0.1)
    assert p.length == pytest.approx(1.1)
    assert path_length(Path([(2, 2)])) == 0.0
    assert (Path([(0, 0)]) + Path([(0, 5)])).length == pytest.approx(0.5)


def test_direct_and_trivial_paths():
    g = OccupancyGrid(np.zeros((10, 10)))
    assert rrt_path(g, (1, 1), (1, 1)).waypoints == [(1, 1)]
    assert rrt_path(g, (1, 1), (8, 6)).waypoints == [(1, 1), (8, 6)]


def test_rrt_errors():
    g = generate_map("open", (20, 20))
    with pytest.raises(NoPathError):
        rrt_path(g, (1, 1), (0, 0))
    with pytest.raises(NoPathError):
        rrt_path(g, (1, 1), (25, 3))
    boxed = np.zeros((20, 20))
    boxed[:, 10] = 100.0
    with pytest.raises(NoPathError):
        rrt_path(OccupancyGrid(boxed), (5, 2), (5, 15), RRTParams(max_iters=300))


def _check_collision_free(grid, path):
    free = grid.values < 50
    pts = path.waypoints
    for a, b in zip(pts, pts[1:]):
        assert segment_free(free, a, b)


@pytest.mark.parametrize("seed", range(5))
def test_rrt_on_rooms(seed):
    g = generate_map("rooms", seed=seed)
    free = np.argwhere(g.values == 0)
    rng = np.random.default_rng(seed)
    a, b = (tuple(int(v) for v in free[k]) for k in rng.choice(len(free), 2, replace=False))
    path = rrt_path(g, a, b, RRTParams(seed=seed))
    assert path.waypoints[0] == a and path.waypoints[-1] == b
    _check_collision_free(g, path)
    # never shorter than the 8-connected grid geodesic allows by more than its
    # diagonal slack (any-angle paths beat grid paths by at most ~8%)
    assert path.length >= path_lengths(g, a)[b] / 1.09
    assert rrt_path(g, a, b, RRTParams(seed=seed)).waypoints == path.waypoints


def test_shortcut_keeps_endpoints():
    free = np.ones((5, 5), bool)
    pts = [(0, 0), (1, 1), (2, 2), (3, 3)]
    assert shortcut(free, pts) == [(0, 0), (3, 3)]


def test_tour_matches_brute_force_on_small_inputs():
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(30):
        pts = [tuple(map(float, p)) for p in rng.random((6, 2)) * 10]
        got = tsp_tour((0.0, 0.0), pts)
        best = brute_force_tour((0.0, 0.0), pts)
        assert sorted(got.order) == sorted(pts)
        assert got.length() >= best.length() - 1e-9
        ratios.append(got.length() / best.length())
    # 2-opt is a local optimum: within 10% of the exhaustive tour, 2% on average
    assert max(ratios) <= 1.10
    assert np.mean(ratios) <= 1.02


@settings(max_examples=40)
@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=1, max_size=9, unique=True))
def test_two_opt_never_worse_than_greedy(targets):
    from hetexplore.planner import _distance_matrix, _euclid, nearest_neighbor_order, two_opt
    pts = [(0, 0)] + targets
    D = _distance_matrix(pts, _euclid)
    nn = nearest_neighbor_order(D)
    opt = two_opt(D, nn)
    cost = lambda o: sum(D[a, b] for a, b in zip(o, o[1:]))
    assert opt[0] == 0 and sorted(opt) == list(range(len(pts)))
    assert cost(opt) <= cost(nn) + 1e-9


def test_tour_requires_targets():
    with pytest.raises(ValueError):
        tsp_tour((0, 0), [])
    assert Tour((0, 0), [(3, 4)]).length() == 5.0
