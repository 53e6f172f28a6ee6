from itertools import combinations

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_layout
from plansyntax.errors import ConfigError, EmptyPlanError
from plansyntax.mask_io import DerivedMasks, LayoutMask, RoomCore, derive_masks, room_cores
from plansyntax.rect_cover import Rect
from plansyntax.syntax_graph import GraphParams, RectGraph, build_graph, door_adjacency


def dumbbell() -> LayoutMask:
    """One room: two 10 x 10 blocks joined by a 2 x 3 corridor."""
    inst = np.zeros((10, 23), dtype=np.uint8)
    inst[0:10, 0:10] = 1
    inst[0:10, 13:23] = 1
    inst[4:6, 10:13] = 1
    sem = np.where(inst > 0, 1, 13)
    return LayoutMask.from_channels(np.zeros(inst.shape), sem, inst, 255 * inst)


def test_params_validation():
    with pytest.raises(ConfigError):
        GraphParams(touch_dist=-1)
    with pytest.raises(ConfigError):
        GraphParams(door_reach=0)
    with pytest.raises(ConfigError):
        GraphParams(min_rect_area=0)


def test_three_rooms_graph(three_rooms):
    g = build_graph(three_rooms, derive_masks(three_rooms))
    assert nx.is_frozen(g)
    assert g.number_of_nodes() == 3
    assert g.rooms() == [1, 2, 3]
    assert g.rect(0) == Rect(2, 2, 20, 20)
    assert g.rect_node(1).room_type == 0
    assert g.edge_counts() == {"within_room": 0, "bridge": 0, "cross_room": 2}
    assert g.edges_of_kind("cross_room") == [(0, 1), (1, 2)]
    assert g.graph["door_pairs"] == [[1, 2], [2, 3]]
    assert g.graph["dropped_doors"] == 0


def test_missing_door_leaves_room_isolated(split_rooms):
    g = build_graph(split_rooms, derive_masks(split_rooms))
    assert g.edges_of_kind("cross_room") == [(0, 1)]
    assert nx.number_connected_components(g) == 2


def test_bridge_joins_room_pieces():
    m = dumbbell()
    g = build_graph(m, derive_masks(m))
    assert g.number_of_nodes() == 2
    assert g.edge_counts()["bridge"] == 1
    g3 = build_graph(m, derive_masks(m), GraphParams(touch_dist=3))
    assert g3.edge_counts() == {"within_room": 1, "bridge": 0, "cross_room": 0}


def test_door_inside_one_room_is_dropped():
    m = make_layout(
        (24, 66),
        (2, 22, 2, 64),
        [(1, (2, 22, 2, 22)), (0, (2, 22, 23, 43)), (3, (2, 22, 44, 64))],
        doors=[(10, 13, 22, 23), (10, 13, 43, 44), (5, 6, 5, 8)],
    )
    g = build_graph(m, derive_masks(m))
    assert g.graph["dropped_doors"] == 1
    assert g.edge_counts()["cross_room"] == 2


def test_door_component_links_all_rooms_it_reaches():
    cores = []
    for iid, (y0, y1, x0, x1) in enumerate([(0, 4, 0, 4), (0, 4, 6, 10), (6, 10, 0, 10)], start=1):
        core = np.zeros((10, 10), dtype=bool)
        core[y0:y1, x0:x1] = True
        cores.append(RoomCore(instance_id=iid, room_type=1, core=core))
    door = np.zeros((10, 10), dtype=bool)
    door[5, 5] = True
    d = DerivedMasks(np.ones((10, 10), dtype=bool), np.zeros((10, 10), dtype=bool), door)
    adj = door_adjacency(d, cores, reach=2)
    assert adj.pairs == frozenset({(1, 2), (1, 3), (2, 3)})
    assert adj.components == 1 and adj.dropped == 0
    assert set(adj.provenance.values()) == {1}
    assert door_adjacency(d, cores, reach=1).pairs == frozenset()


def test_empty_plan(three_rooms):
    with pytest.raises(EmptyPlanError):
        build_graph(three_rooms, derive_masks(three_rooms), GraphParams(min_rect_area=1000))


def test_json_dump(three_rooms):
    d = derive_masks(three_rooms)
    g = build_graph(three_rooms, d, cores=room_cores(three_rooms, d))
    g2 = RectGraph.from_json(g.to_json())
    assert sorted(g2.nodes(data=True)) == sorted(g.nodes(data=True))
    assert g2.edges_of_kind("cross_room") == g.edges_of_kind("cross_room")
    assert g2.graph["door_pairs"] == g.graph["door_pairs"]


def flood_door_pairs(door, owner, reach):
    """Door pairs by plain 4-connected flood fill and a Chebyshev scan."""
    height, width = door.shape
    seen = np.zeros_like(door)
    pairs, comps, dropped = set(), 0, 0
    for y in range(height):
        for x in range(width):
            if not door[y, x] or seen[y, x]:
                continue
            comps += 1
            stack, pixels = [(y, x)], []
            seen[y, x] = True
            while stack:
                cy, cx = stack.pop()
                pixels.append((cy, cx))
                for ay, ax in ((cy - 1, cx), (cy + 1, cx), (cy, cx - 1), (cy, cx + 1)):
                    if 0 <= ay < height and 0 <= ax < width and door[ay, ax] and not seen[ay, ax]:
                        seen[ay, ax] = True
                        stack.append((ay, ax))
            rooms = {
                int(owner[ry, rx])
                for ry in range(height)
                for rx in range(width)
                if owner[ry, rx]
                and any(max(abs(ry - py), abs(rx - px)) <= reach for py, px in pixels)
            }
            if len(rooms) < 2:
                dropped += 1
            pairs.update(combinations(sorted(rooms), 2) if len(rooms) >= 2 else ())
    return pairs, comps, dropped


@st.composite
def door_grids(draw):
    height = draw(st.integers(3, 9))
    width = draw(st.integers(3, 9))
    cells = height * width
    door = draw(st.lists(st.booleans(), min_size=cells, max_size=cells))
    owner = draw(st.lists(st.integers(0, 4), min_size=cells, max_size=cells))
    door = np.array(door, dtype=bool).reshape(height, width)
    owner = np.where(door, 0, np.array(owner).reshape(height, width))
    return door, owner


@settings(max_examples=200, deadline=None)
@given(door_grids(), st.integers(1, 3))
def test_door_adjacency_matches_flood_fill(grids, reach):
    door, owner = grids
    cores = [RoomCore(i, 1, owner == i) for i in range(1, 5)]
    d = DerivedMasks(interior=owner > 0, wall=np.zeros_like(door), door=door)
    adj = door_adjacency(d, cores, reach=reach)
    pairs, comps, dropped = flood_door_pairs(door, owner, reach)
    assert set(adj.pairs) == pairs
    assert adj.components == comps
    assert adj.dropped == dropped
