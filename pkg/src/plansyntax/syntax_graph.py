"""
syntax_graph.py

This code builds the rectangle-space graph of a floor plan, the structure on which all integration metrics are computed.

Every node is one rectangle of a room's walkable core (see rect_cover). Nodes inherit the room-instance id and semantic type of the room they come from. Edges carry no metric weight; each one is tagged with how it was made:

- within_room: two rectangles of the same room touch or lie within ``touch_dist`` pixels (Chebyshev gap).
- bridge: a room whose rectangles still fall apart into several pieces is stitched together by repeatedly joining the nearest rectangle pair between two pieces, until the room is connected.
- cross_room: for every pair of rooms linked by a door, the nearest rectangle pair of the two rooms is joined. Doors are the only way between rooms.

Door links come from door_adjacency: each 4-connected component of door pixels is grown by ``door_reach`` pixels and every room core it reaches is collected; all pairs among those rooms are linked. Components that reach fewer than two rooms are dropped and counted.

The graph is an ``nx.Graph`` subclass, frozen once built, and can be dumped to node-link JSON for inspection.
"""

import json
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from networkx.readwrite import json_graph
from networkx.utils import UnionFind
from scipy import ndimage

from .errors import ConfigError, EmptyPlanError
from .mask_io import DerivedMasks, LayoutMask, RoomCore, room_cores
from .rect_cover import DEFAULT_MIN_RECT_AREA, Rect, greedy_cover

_logger = logging.getLogger(__name__)

EDGE_KINDS = ("within_room", "bridge", "cross_room")
FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class GraphParams:
    touch_dist: int = 2
    door_reach: int = 2
    min_rect_area: int = DEFAULT_MIN_RECT_AREA

    def __post_init__(self) -> None:
        if self.touch_dist < 0:
            raise ConfigError(f"touch_dist must be >= 0, got {self.touch_dist}")
        if self.door_reach < 1:
            raise ConfigError(f"door_reach must be >= 1, got {self.door_reach}")
        if self.min_rect_area < 1:
            raise ConfigError(f"min_rect_area must be >= 1, got {self.min_rect_area}")


@dataclass(frozen=True)
class RectNode:
    node_id: int
    rect: Rect
    instance_id: int
    room_type: int


@dataclass(frozen=True)
class DoorAdjacency:
    pairs: FrozenSet[Tuple[int, int]]
    provenance: Mapping[Tuple[int, int], int] = field(default_factory=dict)
    components: int = 0
    dropped: int = 0


# The `RectGraph` class is a subclass of `nx.Graph` whose nodes are rectangles and whose
# edges are tagged with the way they were created.
class RectGraph(nx.Graph):
    def add_rect(self, node_id: int, rect: Rect, instance_id: int, room_type: int) -> None:
        self.add_node(
            node_id,
            x0=rect.x0,
            y0=rect.y0,
            w=rect.w,
            h=rect.h,
            instance_id=instance_id,
            room_type=room_type,
        )

    def rect(self, node_id: int) -> Rect:
        attrs = self.nodes[node_id]
        return Rect(attrs["x0"], attrs["y0"], attrs["w"], attrs["h"])

    def rect_node(self, node_id: int) -> RectNode:
        attrs = self.nodes[node_id]
        return RectNode(
            node_id=node_id,
            rect=self.rect(node_id),
            instance_id=attrs["instance_id"],
            room_type=attrs["room_type"],
        )

    def rooms(self) -> List[int]:
        return sorted({a["instance_id"] for _, a in self.nodes(data=True)})

    def room_nodes(self, instance_id: int) -> List[int]:
        return sorted(
            n for n, a in self.nodes(data=True) if a["instance_id"] == instance_id
        )

    def edges_of_kind(self, kind: str) -> List[Tuple[int, int]]:
        return sorted((u, v) if u < v else (v, u) for u, v, k in self.edges(data="kind") if k == kind)

    def edge_counts(self) -> Dict[str, int]:
        counts = {kind: 0 for kind in EDGE_KINDS}
        for _, _, kind in self.edges(data="kind"):
            counts[kind] += 1
        return counts

    def to_json(self) -> str:
        """Node-link JSON dump (nodes, tagged edges, graph attributes)."""
        try:
            data = json_graph.node_link_data(self, edges="links")
        except TypeError:  # networkx < 3.4
            data = json_graph.node_link_data(self)
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RectGraph":
        data = json.loads(text)
        try:
            g = json_graph.node_link_graph(data, edges="links")
        except TypeError:  # networkx < 3.4
            g = json_graph.node_link_graph(data)
        out = cls()
        out.graph.update(g.graph)
        out.add_nodes_from(g.nodes(data=True))
        out.add_edges_from(g.edges(data=True))
        return out


def door_adjacency(
    d: DerivedMasks, cores: Sequence[RoomCore], reach: int = 2
) -> DoorAdjacency:
    """
    The function `door_adjacency` links room instances through interior-door components.

    :param d: derived masks of the plan
    :type d: DerivedMasks
    :param cores: walkable room cores
    :type cores: Sequence[RoomCore]
    :param reach: Chebyshev distance (pixels) a door component reaches into a core
    :type reach: int
    :return: door-linked room pairs with the component id that produced each pair
    """
    if reach < 1:
        raise ConfigError(f"door reach must be >= 1, got {reach}")
    owner = np.zeros(d.door.shape, dtype=np.int64)
    for core in cores:
        owner[core.core] = core.instance_id

    labels, n_comp = ndimage.label(d.door, structure=FOUR_CONNECTED)
    square = np.ones((2 * reach + 1, 2 * reach + 1), dtype=bool)
    provenance: Dict[Tuple[int, int], int] = {}
    dropped = 0
    height, width = d.door.shape
    for comp, box in enumerate(ndimage.find_objects(labels), start=1):
        rows, cols = box
        y0, y1 = max(0, rows.start - reach), min(height, rows.stop + reach)
        x0, x1 = max(0, cols.start - reach), min(width, cols.stop + reach)
        local = labels[y0:y1, x0:x1] == comp
        near = ndimage.binary_dilation(local, structure=square)
        rooms = sorted(set(np.unique(owner[y0:y1, x0:x1][near]).tolist()) - {0})
        if len(rooms) < 2:
            dropped += 1
            continue
        for pair in combinations(rooms, 2):
            provenance.setdefault(pair, comp)

    if dropped:
        _logger.debug("dropped %d door components reaching fewer than two rooms", dropped)
    return DoorAdjacency(
        pairs=frozenset(provenance),
        provenance=provenance,
        components=int(n_comp),
        dropped=dropped,
    )


def _nearest_pair(
    g: RectGraph, group_a: Sequence[int], group_b: Sequence[int]
) -> Tuple[int, int, int]:
    """Smallest (gap, u, v) over u in group_a, v in group_b, with u < v."""
    best: Optional[Tuple[int, int, int]] = None
    for u in group_a:
        ru = g.rect(u)
        for v in group_b:
            key = (ru.gap(g.rect(v)), min(u, v), max(u, v))
            if best is None or key < best:
                best = key
    assert best is not None
    return best


def _connect_room(g: RectGraph, members: List[int], touch_dist: int) -> int:
    uf = UnionFind(members)
    for u, v in combinations(members, 2):
        if g.rect(u).gap(g.rect(v)) <= touch_dist:
            g.add_edge(u, v, kind="within_room")
            uf.union(u, v)
    bridges = 0
    while True:
        groups = sorted(sorted(s) for s in uf.to_sets())
        if len(groups) < 2:
            return bridges
        best: Optional[Tuple[int, int, int]] = None
        for ga, gb in combinations(groups, 2):
            key = _nearest_pair(g, ga, gb)
            if best is None or key < best:
                best = key
        assert best is not None
        _, u, v = best
        g.add_edge(u, v, kind="bridge")
        uf.union(u, v)
        bridges += 1


def build_graph(
    m: LayoutMask,
    d: DerivedMasks,
    params: Optional[GraphParams] = None,
    cores: Optional[Sequence[RoomCore]] = None,
) -> RectGraph:
    """
    The function `build_graph` builds the frozen rectangle-space graph of a plan.

    :param m: the layout
    :type m: LayoutMask
    :param d: derived masks of the layout
    :type d: DerivedMasks
    :param params: graph construction parameters
    :type params: Optional[GraphParams]
    :param cores: precomputed room cores, derived from ``m`` and ``d`` when omitted
    :type cores: Optional[Sequence[RoomCore]]
    :return: the graph; ``graph["door_adjacency"]`` keeps the door-linked pairs
    :raises EmptyPlanError: no rectangle survives the decomposition
    """
    params = params or GraphParams()
    if cores is None:
        cores = room_cores(m, d)

    g = RectGraph()
    node_id = 0
    for core in cores:
        for rect in greedy_cover(core.core, params.min_rect_area):
            g.add_rect(node_id, rect, core.instance_id, core.room_type)
            node_id += 1
    if g.number_of_nodes() == 0:
        raise EmptyPlanError("no rectangle survived the decomposition")

    bridges = 0
    for iid in g.rooms():
        bridges += _connect_room(g, g.room_nodes(iid), params.touch_dist)

    adjacency = door_adjacency(d, cores, params.door_reach)
    missing = []
    for a, b in sorted(adjacency.pairs):
        nodes_a, nodes_b = g.room_nodes(a), g.room_nodes(b)
        if not nodes_a or not nodes_b:
            missing.append((a, b))
            continue
        _, u, v = _nearest_pair(g, nodes_a, nodes_b)
        g.add_edge(u, v, kind="cross_room")

    g.graph["door_pairs"] = [list(p) for p in sorted(adjacency.pairs)]
    g.graph["dropped_doors"] = adjacency.dropped
    g.graph["door_pairs_without_rects"] = [list(p) for p in missing]
    _logger.debug(
        "graph: %d nodes, %d bridges, %d door pairs",
        g.number_of_nodes(),
        bridges,
        len(adjacency.pairs),
    )
    return nx.freeze(g)
