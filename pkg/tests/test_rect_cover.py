from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from plansyntax.errors import ConfigError
from plansyntax.rect_cover import Rect, cover_mask, greedy_cover, largest_rect

grids = arrays(
    dtype=bool,
    shape=st.tuples(st.integers(1, 7), st.integers(1, 7)),
    elements=st.booleans(),
)


def brute_force_best(grid):
    """Minimum (-area, y0, x0, -w) over every all-true rectangle."""
    h, w = grid.shape
    best = None
    for y0, x0 in product(range(h), range(w)):
        for y1, x1 in product(range(y0 + 1, h + 1), range(x0 + 1, w + 1)):
            if grid[y0:y1, x0:x1].all():
                key = (-(y1 - y0) * (x1 - x0), y0, x0, -(x1 - x0))
                if best is None or key < best:
                    best = key
    if best is None:
        return None
    neg_area, y0, x0, neg_w = best
    return Rect(x0, y0, -neg_w, -neg_area // -neg_w)


def test_rect_geometry():
    r = Rect(2, 3, 4, 5)
    assert (r.area, r.x1, r.y1) == (20, 6, 8)
    g = np.zeros((10, 10), dtype=bool)
    g[r.slices()] = True
    assert g.sum() == 20
    assert g[3, 2] and g[7, 5] and not g[8, 5]


def test_gap_is_chebyshev():
    a = Rect(0, 0, 2, 2)
    assert a.gap(Rect(2, 0, 2, 2)) == 0  # edge contact
    assert a.gap(Rect(3, 0, 2, 2)) == 1
    assert a.gap(Rect(4, 5, 1, 1)) == 3
    assert a.gap(a) == 0


def test_tie_break_prefers_top_left():
    g = np.zeros((4, 9), dtype=bool)
    g[0:2, 0:2] = True
    g[2:4, 5:7] = True
    assert largest_rect(g) == Rect(0, 0, 2, 2)


def test_tie_break_prefers_wider():
    g = np.zeros((4, 4), dtype=bool)
    g[0, :] = True
    g[:, 0] = True
    # 1 x 4 row and 4 x 1 column tie; both start at (0, 0)
    assert largest_rect(g) == Rect(0, 0, 4, 1)


def test_offset_crop():
    g = np.zeros((12, 12), dtype=bool)
    g[5:9, 3:10] = True
    assert largest_rect(g) == Rect(3, 5, 7, 4)


def test_min_area_validation():
    with pytest.raises(ConfigError):
        greedy_cover(np.ones((3, 3), dtype=bool), 0)


def test_cover_below_threshold():
    assert greedy_cover(np.ones((5, 9), dtype=bool), 50) == []
    assert greedy_cover(np.ones((5, 10), dtype=bool), 50) == [Rect(0, 0, 10, 5)]


def test_cover_of_plus_shape():
    g = np.zeros((30, 30), dtype=bool)
    g[10:20, :] = True
    g[:, 10:20] = True
    rects = greedy_cover(g, 50)
    # both bars cover 300 pixels; the vertical one starts on a higher row
    assert rects[0] == Rect(10, 0, 10, 30)
    assert sorted(rects[1:]) == [Rect(0, 10, 10, 10), Rect(20, 10, 10, 10)]
    assert cover_mask(rects, g.shape).sum() == g.sum()


@settings(max_examples=200, deadline=None)
@given(grids)
def test_largest_rect_matches_brute_force(grid):
    assert largest_rect(grid) == brute_force_best(grid)


@settings(max_examples=150, deadline=None)
@given(grids, st.integers(1, 6))
def test_greedy_cover_properties(grid, min_area):
    rects = greedy_cover(grid, min_area)
    seen = np.zeros(grid.shape, dtype=int)
    for r in rects:
        assert r.area >= min_area
        assert grid[r.slices()].all()
        seen[r.slices()] += 1
    assert seen.max(initial=0) <= 1
    areas = [r.area for r in rects]
    assert areas == sorted(areas, reverse=True)
    residual = grid & ~cover_mask(rects, grid.shape)
    rest = brute_force_best(residual)
    assert rest is None or rest.area < min_area


def test_cover_benchmark(benchmark):
    rng = np.random.default_rng(0)
    g = np.ones((64, 64), dtype=bool)
    for _ in range(12):
        y, x = rng.integers(0, 60, size=2)
        g[y : y + 4, x : x + 4] = False
    rects = benchmark(greedy_cover, g, 50)
    assert rects
