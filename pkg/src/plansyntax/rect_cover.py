"""
rect_cover.py

This code splits the walkable core of a room into axis-aligned rectangles, the spatial atoms of the rectangle-space graph.

The input is a binary grid (True = walkable). The output is a list of disjoint rectangles found by a greedy covering loop: take the largest all-true rectangle of what is left, clear its pixels, repeat. The loop stops when the largest remaining rectangle is smaller than a minimum area threshold, so slivers along jagged boundaries never become graph nodes.

The inner primitive, largest_rect, uses the histogram-stack method. Each row is treated as the base of a histogram of consecutive true pixels above it; a pair of monotonic stacks gives, for every column, how far its bar can stretch left and right. That takes O(rows * cols) per call instead of enumerating every rectangle.

Ties between equal-area rectangles are broken by smaller top row, then smaller left column, then larger width, so the decomposition is fully deterministic.
"""

import logging
from dataclasses import dataclass
from itertools import takewhile
from typing import Generator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError

_logger = logging.getLogger(__name__)

DEFAULT_MIN_RECT_AREA = 50


@dataclass(frozen=True, order=True)
class Rect:
    """Axis-aligned rectangle; (x0, y0) is the inclusive top-left pixel."""

    x0: int
    y0: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def x1(self) -> int:
        """Exclusive right edge."""
        return self.x0 + self.w

    @property
    def y1(self) -> int:
        """Exclusive bottom edge."""
        return self.y0 + self.h

    def slices(self) -> Tuple[slice, slice]:
        return slice(self.y0, self.y1), slice(self.x0, self.x1)

    def gap(self, other: "Rect") -> int:
        """
        Chebyshev gap between two rectangles, 0 when they touch or overlap.

        Examples:
            >>> Rect(0, 0, 2, 2).gap(Rect(2, 0, 2, 2))
            0
            >>> Rect(0, 0, 2, 2).gap(Rect(5, 3, 1, 1))
            3
        """
        dx = max(0, other.x0 - self.x1, self.x0 - other.x1)
        dy = max(0, other.y0 - self.y1, self.y0 - other.y1)
        return max(dx, dy)


def _spans(hs: Sequence[int]) -> Tuple[List[int], List[int]]:
    """Left (inclusive) and right (exclusive) reach of every histogram bar."""
    n = len(hs)
    left = [0] * n
    right = [n] * n
    stack: List[int] = []
    for c, h in enumerate(hs):
        while stack and hs[stack[-1]] >= h:
            stack.pop()
        left[c] = stack[-1] + 1 if stack else 0
        stack.append(c)
    stack = []
    for c in range(n - 1, -1, -1):
        h = hs[c]
        while stack and hs[stack[-1]] >= h:
            stack.pop()
        right[c] = stack[-1] if stack else n
        stack.append(c)
    return left, right


def largest_rect(grid: np.ndarray) -> Optional[Rect]:
    """
    The function `largest_rect` finds a maximum-area all-true rectangle.

    :param grid: binary grid, True marks a usable pixel
    :type grid: np.ndarray
    :return: the rectangle, or None when the grid has no true pixel

    Examples:
        >>> import numpy as np
        >>> largest_rect(np.ones((3, 5), dtype=bool))
        Rect(x0=0, y0=0, w=5, h=3)
        >>> largest_rect(np.zeros((2, 2), dtype=bool)) is None
        True
    """
    g = np.asarray(grid, dtype=bool)
    if g.ndim != 2 or not g.any():
        return None
    rows = np.flatnonzero(g.any(axis=1))
    cols = np.flatnonzero(g.any(axis=0))
    r_off, c_off = int(rows[0]), int(cols[0])
    sub = g[r_off : rows[-1] + 1, c_off : cols[-1] + 1]

    heights = np.zeros(sub.shape[1], dtype=np.int64)
    best_key: Optional[Tuple[int, int, int, int]] = None
    for r in range(sub.shape[0]):
        heights = np.where(sub[r], heights + 1, 0)
        hs = heights.tolist()
        left, right = _spans(hs)
        for c, h in enumerate(hs):
            if h == 0:
                continue
            w = right[c] - left[c]
            key = (-h * w, r - h + 1, left[c], -w)
            if best_key is None or key < best_key:
                best_key = key
    assert best_key is not None
    neg_area, y0, x0, neg_w = best_key
    w = -neg_w
    return Rect(x0=c_off + x0, y0=r_off + y0, w=w, h=-neg_area // w)


def iter_largest_rects(grid: np.ndarray) -> Generator[Rect, None, None]:
    """Yield the largest rectangle of the residual grid, clearing it each round."""
    residual = np.array(grid, dtype=bool, copy=True)
    while True:
        rect = largest_rect(residual)
        if rect is None:
            return
        residual[rect.slices()] = False
        yield rect


def greedy_cover(grid: np.ndarray, min_area: int = DEFAULT_MIN_RECT_AREA) -> List[Rect]:
    """
    The function `greedy_cover` decomposes a binary grid into disjoint maximal rectangles.

    :param grid: walkable core of a room
    :type grid: np.ndarray
    :param min_area: smallest rectangle area (pixels^2) worth keeping
    :type min_area: int
    :return: rectangles in extraction order (non-increasing area)

    Examples:
        >>> import numpy as np
        >>> g = np.zeros((10, 10), dtype=bool)
        >>> g[0:5, :] = True
        >>> g[:, 0:5] = True
        >>> greedy_cover(g, 1)
        [Rect(x0=0, y0=0, w=10, h=5), Rect(x0=0, y0=5, w=5, h=5)]
        >>> greedy_cover(np.ones((6, 6), dtype=bool), 50)
        []
    """
    if min_area < 1:
        raise ConfigError(f"min_area must be >= 1, got {min_area}")
    rects = list(takewhile(lambda r: r.area >= min_area, iter_largest_rects(grid)))
    _logger.debug("greedy cover kept %d rectangles", len(rects))
    return rects


def cover_mask(rects: Sequence[Rect], shape: Tuple[int, int]) -> np.ndarray:
    """Union of rectangles as a boolean grid."""
    out = np.zeros(shape, dtype=bool)
    for rect in rects:
        out[rect.slices()] = True
    return out
