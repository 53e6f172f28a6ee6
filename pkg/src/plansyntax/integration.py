"""
integration.py

Depth-based integration on the rectangle-space graph.

For every node the total depth (sum of hop distances to all other nodes) is obtained by a breadth-first search from that node. Two scores are derived from it:

- hh: mean depth MD = TD / (k - 1), relative asymmetry RA = 2 (MD - 1) / (k - 2), RA normalized by the diamond value D_k of a k-node graph, then inverted. RA of a node adjacent to everything is 0; it is clamped to a small epsilon before inversion.
- closeness: (k - 1) / TD.

Node scores are averaged per room instance and over the whole plan. A disconnected graph is either rejected (strict) or reduced to its largest component with the plan flagged.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Tuple

import networkx as nx
import numpy as np

from .errors import DisconnectedError, EmptyPlanError, TooFewNodesError

_logger = logging.getLogger(__name__)

METHODS = ("hh", "closeness")
EPS_RA = 1e-6


@dataclass(frozen=True)
class DepthTable:
    nodes: Tuple[int, ...]
    td: Tuple[int, ...]
    flags: FrozenSet[str] = frozenset()

    @property
    def k(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class NodeScores:
    method: str
    scores: Mapping[int, float]
    flags: FrozenSet[str] = frozenset()

    def values(self) -> List[float]:
        return [self.scores[n] for n in sorted(self.scores)]


@dataclass(frozen=True)
class RoomScores:
    means: Mapping[int, float]
    members: Mapping[int, Tuple[int, ...]]
    room_types: Mapping[int, int]
    flags: FrozenSet[str] = field(default_factory=frozenset)


def all_pairs_depth(g: nx.Graph, strict: bool = False) -> DepthTable:
    """
    The function `all_pairs_depth` computes the total depth of every node by unit-weight BFS.

    :param g: the rectangle-space graph
    :type g: nx.Graph
    :param strict: raise on a disconnected graph instead of keeping the largest component
    :type strict: bool
    :return: node ids (sorted) and their total depths

    Examples:
        >>> import networkx as nx
        >>> all_pairs_depth(nx.path_graph(4)).td
        (6, 4, 4, 6)
    """
    if g.number_of_nodes() == 0:
        raise EmptyPlanError("graph has no nodes")
    flags = set()
    components = [sorted(c) for c in nx.connected_components(g)]
    if len(components) > 1:
        if strict:
            raise DisconnectedError(f"graph has {len(components)} components")
        # largest first, ties to the component holding the smallest node id
        components.sort(key=lambda c: (-len(c), c[0]))
        _logger.debug(
            "disconnected graph: keeping %d of %d nodes",
            len(components[0]),
            g.number_of_nodes(),
        )
        flags.add("disconnected")
        g = g.subgraph(components[0])

    nodes = tuple(sorted(g.nodes))
    td = tuple(
        sum(nx.single_source_shortest_path_length(g, n).values()) for n in nodes
    )
    return DepthTable(nodes=nodes, td=td, flags=frozenset(flags))


def diamond_value(k: int) -> float:
    """
    Relative asymmetry of the root of a k-node diamond-shaped graph.

    Examples:
        >>> round(diamond_value(4), 12)
        0.333333333333
    """
    if k < 3:
        raise TooFewNodesError(f"diamond value needs k >= 3, got {k}")
    return 2.0 * (k * (math.log2((k + 2) / 3.0) - 1.0) + 1.0) / ((k - 1) * (k - 2))


def relative_asymmetry(dt: DepthTable) -> Dict[int, float]:
    k = dt.k
    if k < 3:
        raise TooFewNodesError(f"hh integration needs k >= 3, got {k}")
    return {
        n: 2.0 * (td / (k - 1) - 1.0) / (k - 2) for n, td in zip(dt.nodes, dt.td)
    }


def node_integration(
    dt: DepthTable, method: str = "hh", raw_ra: bool = False, eps_ra: float = EPS_RA
) -> NodeScores:
    """
    The function `node_integration` turns total depths into node scores.

    :param dt: total depths
    :type dt: DepthTable
    :param method: "hh" or "closeness"
    :type method: str
    :param raw_ra: hh only, skip the D_k normalization (RRA = RA)
    :type raw_ra: bool
    :param eps_ra: lower clamp of RRA before inversion
    :type eps_ra: float
    :return: one positive score per node

    Examples:
        >>> import networkx as nx
        >>> ns = node_integration(all_pairs_depth(nx.path_graph(4)), raw_ra=True)
        >>> [round(s, 12) for s in ns.values()]
        [1.0, 3.0, 3.0, 1.0]
    """
    if method == "hh":
        ra = relative_asymmetry(dt)
        d_k = 1.0 if raw_ra else diamond_value(dt.k)
        scores = {n: 1.0 / max(r / d_k, eps_ra) for n, r in ra.items()}
    elif method == "closeness":
        if dt.k < 2:
            raise TooFewNodesError(f"closeness needs k >= 2, got {dt.k}")
        scores = {n: (dt.k - 1) / td for n, td in zip(dt.nodes, dt.td)}
    else:
        raise ValueError(f"unknown integration method {method!r}")
    return NodeScores(method=method, scores=scores, flags=dt.flags)


def room_mean_integration(ns: NodeScores, g: nx.Graph) -> RoomScores:
    """
    Mean node score of every room instance.

    Rooms whose nodes were all left out of the scored component are absent
    from the result and the result is flagged.
    """
    members: Dict[int, List[int]] = {}
    room_types: Dict[int, int] = {}
    for n, attrs in sorted(g.nodes(data=True)):
        iid = attrs["instance_id"]
        room_types[iid] = attrs["room_type"]
        if n in ns.scores:
            members.setdefault(iid, []).append(n)
    flags = set(ns.flags)
    if len(members) < len(room_types):
        flags.add("room_without_score")
    means = {iid: float(np.mean([ns.scores[n] for n in ms])) for iid, ms in members.items()}
    return RoomScores(
        means=means,
        members={iid: tuple(ms) for iid, ms in members.items()},
        room_types={iid: room_types[iid] for iid in members},
        flags=frozenset(flags),
    )


def plan_integration(ns: NodeScores) -> float:
    """
    Graph-level integration: mean node score.

    Examples:
        >>> plan_integration(NodeScores("hh", {0: 1.0, 1: 2.0, 2: 3.0}))
        2.0
    """
    if not ns.scores:
        raise EmptyPlanError("no node scores")
    return float(np.mean(ns.values()))
