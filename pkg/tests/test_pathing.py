import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commexplore.gridworld import OccupancyGrid, Pose
from commexplore.pathing import (
    SQRT2,
    GraphField,
    Mask,
    astar,
    astar_cells,
    distance_field,
    signal_path_distance,
)

from conftest import random_grid
from oracles import ucs


def ucs_oracle(mask, start, goal):
    return ucs(mask, start, goal)


def check_path(mask, res, path):
    cells = path.cells
    for a, b in zip(cells, cells[1:]):
        dr, dc = b[0] - a[0], b[1] - a[1]
        assert max(abs(dr), abs(dc)) == 1
        if dr and dc:
            assert mask[a[0] + dr, a[1]] and mask[a[0], a[1] + dc]
    assert all(mask[c] for c in cells)
    nd = sum(1 for a, b in zip(cells, cells[1:]) if a[0] != b[0] and a[1] != b[1])
    assert (path.n_cardinal, path.n_diagonal) == (len(cells) - 1 - nd, nd)
    assert path.length_m == (path.n_cardinal + path.n_diagonal * SQRT2) * res


def test_astar_matches_ucs_oracle_1000_grids():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        g = random_grid(rng, (30, 30), p_block=float(rng.uniform(0.05, 0.4)))
        free = np.argwhere(g.traversable)
        s = tuple(free[rng.integers(len(free))])
        t = tuple(free[rng.integers(len(free))])
        got = astar_cells(g.traversable, s, t, 0.25)
        want = ucs_oracle(g.traversable, s, t)
        if want is None:
            assert got is None
            continue
        assert (got.n_cardinal, got.n_diagonal) == want
        assert got.length_m == (want[0] + want[1] * SQRT2) * 0.25
        assert got.cells[0] == s and got.cells[-1] == t
        check_path(g.traversable, 0.25, got)


def test_distance_field_and_graph_field_agree_with_astar():
    rng = np.random.default_rng(5)
    for _ in range(40):
        g = random_grid(rng, (25, 25), p_block=0.3)
        free = np.argwhere(g.traversable)
        s = tuple(free[rng.integers(len(free))])
        exact = distance_field(g.traversable, s, 0.5)
        gf = GraphField(g.traversable, s, 0.5)
        np.testing.assert_allclose(gf.distance, exact, rtol=1e-12)
        for t in free[rng.integers(len(free), size=10)]:
            t = tuple(t)
            p = astar_cells(g.traversable, s, t, 0.5)
            if p is None:
                assert math.isinf(exact[t])
                assert gf.path_to(t) is None
            else:
                assert exact[t] == p.length_m
                cells = gf.path_to(t)
                assert cells[0] == s and cells[-1] == t
                steps = [math.hypot(a[0] - b[0], a[1] - b[1]) for a, b in zip(cells, cells[1:])]
                assert sum(steps) * 0.5 == pytest.approx(p.length_m, rel=1e-12)


def corridor(n=10):
    trav = np.zeros((3, n + 2), dtype=bool)
    trav[1, 1:-1] = True
    return OccupancyGrid(trav, trav.copy(), 0.25)


def test_straight_and_diagonal_examples():
    p = astar_cells(corridor().traversable, (1, 1), (1, 5), 0.25)
    assert p.length_m == 1.0
    open_ = np.ones((6, 6), dtype=bool)
    d = astar_cells(open_, (0, 0), (3, 3), 0.25)
    assert d.length_m == pytest.approx(3 * SQRT2 * 0.25) and d.n_diagonal == 3


def test_no_corner_cutting():
    m = np.array([[1, 0], [0, 1]], dtype=bool)
    assert astar_cells(m, (0, 0), (1, 1), 1.0) is None


def test_astar_errors_and_unreachable():
    m = np.zeros((5, 5), dtype=bool)
    m[1, 1] = m[3, 3] = True
    with pytest.raises(ValueError):
        astar_cells(m, (0, 0), (1, 1), 1.0)
    with pytest.raises(ValueError):
        astar_cells(m, (1, 1), (9, 9), 1.0)
    assert astar_cells(m, (1, 1), (3, 3), 1.0) is None
    assert astar_cells(m, (1, 1), (2, 2), 1.0) is None


def test_signal_distance_examples(envs):
    env = envs["window"]
    g = env.grid
    a = Pose(8.625, 2.375)
    b = env.events[0].pose
    sig = signal_path_distance(g, a, b)
    trav = astar(g, Mask.TRAVERSAL, a, b).length_m
    assert sig == pytest.approx(a.distance_to(b), abs=0.36)
    assert trav > 3 * sig
    assert signal_path_distance(g, a, a) == 0.0
    m = np.zeros((5, 9), dtype=bool)
    m[1:4, 1:3] = m[1:4, 6:8] = True
    sealed = OccupancyGrid(m, m.copy(), 1.0)
    assert signal_path_distance(sealed, Pose(1.5, 1.5), Pose(6.5, 1.5)) == math.inf


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_path_properties(seed):
    rng = np.random.default_rng(seed)
    g = random_grid(rng, (16, 16), p_block=0.3, p_window=0.4)
    free = np.argwhere(g.traversable)
    s, t = (tuple(free[i]) for i in rng.integers(len(free), size=2))
    pa, pb = (Pose(c[1] + 0.5, c[0] + 0.5) for c in (s, t))
    fwd = astar(g, "traversal", pa, pb)
    if fwd is None:
        return
    back = astar(g, "traversal", pb, pa)
    assert back.length_m == fwd.length_m
    assert fwd.length_m >= pa.distance_to(pb) - 1e-9
    assert signal_path_distance(g, pa, pb) <= fwd.length_m
