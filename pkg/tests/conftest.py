"""
Shared fixtures for plansyntax.

Layouts are drawn by hand with `make_layout`: room boxes get their semantic type and an instance id, interior pixels left between rooms become interior wall, door boxes become interior doors, and everything outside the interior is external.

Read more about conftest.py under:
- https://docs.pytest.org/en/stable/fixture.html
"""

from pathlib import Path
from typing import Sequence, Tuple

import numpy as np
import pytest

from plansyntax.mask_io import ChannelCodeTable, LayoutMask
from plansyntax.toy_generator import LayoutConfig, PolicyConfig, init_policy, synthesize_program

TESTCASES = Path(__file__).parent.parent / "testcases"

Box = Tuple[int, int, int, int]  # y0, y1, x0, x1


def make_layout(
    shape: Tuple[int, int],
    interior: Box,
    rooms: Sequence[Tuple[int, Box]],
    doors: Sequence[Box] = (),
) -> LayoutMask:
    codes = ChannelCodeTable.default()
    boundary = np.zeros(shape, dtype=np.uint8)
    semantic = np.full(shape, codes.semantic_code("external"), dtype=np.uint8)
    instance = np.zeros(shape, dtype=np.uint8)
    inside = np.zeros(shape, dtype=bool)
    y0, y1, x0, x1 = interior
    inside[y0:y1, x0:x1] = True
    semantic[inside] = codes.semantic_code("interior_wall")
    boundary[inside] = codes.boundary_code("interior_wall")
    for iid, (room_type, (ry0, ry1, rx0, rx1)) in enumerate(rooms, start=1):
        instance[ry0:ry1, rx0:rx1] = iid
        semantic[ry0:ry1, rx0:rx1] = room_type
        boundary[ry0:ry1, rx0:rx1] = codes.boundary_code("none")
    for dy0, dy1, dx0, dx1 in doors:
        boundary[dy0:dy1, dx0:dx1] = codes.boundary_code("interior_door")
        semantic[dy0:dy1, dx0:dx1] = codes.semantic_code("interior_door")
    ch_interior = np.where(inside, codes.interior_code, codes.exterior_code)
    return LayoutMask.from_channels(boundary, semantic, instance, ch_interior, codes=codes)


@pytest.fixture
def three_rooms() -> LayoutMask:
    """Bedroom | Living | Bathroom in a row, 20 x 20 each, doors on both walls."""
    return make_layout(
        (24, 66),
        (2, 22, 2, 64),
        [(1, (2, 22, 2, 22)), (0, (2, 22, 23, 43)), (3, (2, 22, 44, 64))],
        doors=[(10, 13, 22, 23), (10, 13, 43, 44)],
    )


@pytest.fixture
def split_rooms() -> LayoutMask:
    """Like `three_rooms` but the Bathroom has no door."""
    return make_layout(
        (24, 66),
        (2, 22, 2, 64),
        [(1, (2, 22, 2, 22)), (0, (2, 22, 23, 43)), (3, (2, 22, 44, 64))],
        doors=[(10, 13, 22, 23)],
    )


@pytest.fixture
def layout_config() -> LayoutConfig:
    return LayoutConfig()


@pytest.fixture
def synthesized(layout_config):
    """Five synthesized (condition, x0) plans with 5 rooms each."""
    rng = np.random.default_rng(3)
    return [synthesize_program(5, rng, layout_config) for _ in range(5)]


@pytest.fixture
def tiny_policy():
    """2-dim, 1-condition policy over a 50-step schedule."""
    config = PolicyConfig(dim=2, cond_dim=1, emb_dim=2, num_timesteps=50)
    return init_policy(config, seed=0)


@pytest.fixture
def testcases() -> Path:
    return TESTCASES
