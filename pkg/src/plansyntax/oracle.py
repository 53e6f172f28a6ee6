"""
oracle.py

The space-syntax oracle: one call turns a layout mask into a per-plan report.

The pipeline runs in five stages:

1. parse the 4-channel mask and derive interior, wall and door grids;
2. extract every room's walkable core and cover it with rectangles;
3. build the rectangle-space graph (within-room, bridge and door edges);
4. compute node integration and aggregate it per room, per type and per category;
5. check validity and attach the scalar metrics used for screening.

A failure at any stage never escapes: the plan is reported as invalid with the stage it failed at, which is exactly what the cleaning ledger counts.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Callable, Dict, Iterable, List, Optional, TypeVar

from .errors import (
    ChannelCountError,
    DecodeError,
    DisconnectedError,
    EmptyPlanError,
    InvariantError,
    MissingLivingError,
    MissingOtherError,
    MissingPublicError,
    NoValidCategoryError,
    TooFewNodesError,
    UnknownCodeError,
)
from .integration import (
    all_pairs_depth,
    node_integration,
    plan_integration,
    room_mean_integration,
)
from .mask_io import ChannelCodeTable, LayoutMask, derive_masks, parse_layout, room_cores
from .metrics import (
    CategoryMap,
    category_profile,
    living_metrics,
    public_score,
    type_statistics,
)
from .syntax_graph import GraphParams, build_graph

_logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
WORKERS_ENV = "PLANSYNTAX_WORKERS"

T = TypeVar("T")
U = TypeVar("U")


@dataclass(frozen=True)
class OracleParams:
    graph: GraphParams = field(default_factory=GraphParams)
    method: str = "hh"
    raw_ra: bool = False
    strict_codes: bool = False
    strict_graph: bool = False
    snap: bool = False
    max_rects_per_room: int = 64
    codes: ChannelCodeTable = field(default_factory=ChannelCodeTable.default)
    categories: CategoryMap = field(default_factory=CategoryMap.default)


@dataclass
class PlanReport:
    plan_id: str
    valid: bool = False
    reason: str = ""
    stage: str = "usable"
    flags: List[str] = field(default_factory=list)
    node_count: int = 0
    edge_counts: Dict[str, int] = field(default_factory=dict)
    rooms: List[Dict[str, Any]] = field(default_factory=list)
    type_means: Dict[int, float] = field(default_factory=dict)
    type_counts: Dict[int, int] = field(default_factory=dict)
    integration: Optional[float] = None
    public_score: Optional[float] = None
    living_room: Optional[float] = None
    living_adv: Optional[float] = None
    I: Dict[str, float] = field(default_factory=dict)  # noqa: E741
    R: Dict[str, float] = field(default_factory=dict)
    total_rooms: int = 0
    total_area: int = 0
    living_area_share: Optional[float] = None
    living_present: bool = False
    schema: int = SCHEMA_VERSION

    def invalidate(self, stage: str, reason: str) -> "PlanReport":
        self.valid = False
        self.stage = stage
        self.reason = reason
        _logger.debug("plan %s invalid at %s: %s", self.plan_id, stage, reason)
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["type_means"] = {str(k): v for k, v in self.type_means.items()}
        data["type_counts"] = {str(k): v for k, v in self.type_counts.items()}
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PlanReport":
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in known}
        kwargs["type_means"] = {int(k): v for k, v in data.get("type_means", {}).items()}
        kwargs["type_counts"] = {int(k): v for k, v in data.get("type_counts", {}).items()}
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "PlanReport":
        return cls.from_dict(json.loads(text))


def _accounting(report: PlanReport, m: LayoutMask, params: OracleParams) -> None:
    pixels = m.instance_pixel_counts()
    living = params.categories.living_type
    room_ids = [i for i in m.instance_ids if m.instance_labels[i] not in params.codes.ignore_types]
    report.total_rooms = len(room_ids)
    report.total_area = sum(pixels[i] for i in room_ids)
    living_area = sum(pixels[i] for i in room_ids if m.instance_labels[i] == living)
    report.living_present = any(m.instance_labels[i] == living for i in room_ids)
    report.living_area_share = (
        living_area / report.total_area if report.total_area else None
    )


def analyze_mask(
    m: LayoutMask, params: Optional[OracleParams] = None, plan_id: str = "plan"
) -> PlanReport:
    """
    The function `analyze_mask` runs the full space-syntax pipeline on a decoded layout.

    :param m: decoded layout
    :type m: LayoutMask
    :param params: oracle parameters
    :type params: Optional[OracleParams]
    :param plan_id: identifier written into the report
    :type plan_id: str
    :return: the per-plan report; ``valid`` is False when a stage failed
    """
    params = params or OracleParams()
    cm = params.categories
    report = PlanReport(plan_id=plan_id, flags=sorted(m.flags))
    _accounting(report, m, params)

    try:
        d = derive_masks(m, params.codes, strict=params.strict_codes)
    except UnknownCodeError as err:
        return report.invalidate("parse_failed", str(err))
    cores = room_cores(m, d)
    if any(c.empty for c in cores):
        report.flags.append("empty_core")

    try:
        g = build_graph(m, d, params.graph, cores=cores)
    except EmptyPlanError as err:
        return report.invalidate("build_org", str(err))
    report.node_count = g.number_of_nodes()
    report.edge_counts = g.edge_counts()
    if g.graph.get("dropped_doors"):
        report.flags.append("dropped_door_components")

    rect_counts = {iid: len(g.room_nodes(iid)) for iid in g.rooms()}
    lost = [
        iid
        for iid in m.instance_ids
        if m.instance_labels[iid] not in params.codes.ignore_types and not rect_counts.get(iid)
    ]
    if lost:
        _logger.debug("plan %s: rooms %s keep no rectangle", plan_id, lost)
        report.flags.append("room_without_rects")
    worst = max(rect_counts.values())
    if worst > params.max_rects_per_room:
        return report.invalidate(
            "build_house", f"room with {worst} rectangles (jagged boundary)"
        )

    try:
        dt = all_pairs_depth(g, strict=params.strict_graph)
        ns = node_integration(dt, params.method, raw_ra=params.raw_ra)
    except (DisconnectedError, TooFewNodesError) as err:
        return report.invalidate("syn_skip", str(err))
    rs = room_mean_integration(ns, g)
    report.flags.extend(sorted(rs.flags))

    pixels = m.instance_pixel_counts()
    report.rooms = [
        {
            "instance_id": iid,
            "room_type": m.instance_labels[iid],
            "category": cm.category(m.instance_labels[iid]),
            "mean_integration": rs.means.get(iid),
            "rect_count": rect_counts.get(iid, 0),
            "area": pixels[iid],
        }
        for iid in m.instance_ids
    ]
    report.integration = plan_integration(ns)
    report.type_means, report.type_counts = type_statistics(rs)

    try:
        report.public_score = public_score(rs, cm)
    except (MissingPublicError, MissingOtherError) as err:
        report.flags.append(type(err).__name__)
    try:
        pm = category_profile(rs, report.type_counts, cm)
        report.I, report.R = pm.I, pm.R
        report.living_room, report.living_adv = living_metrics(pm, cm)
    except (NoValidCategoryError, MissingLivingError) as err:
        report.flags.append(type(err).__name__)

    report.flags = sorted(set(report.flags))
    report.valid = True
    return report


def analyze_png(
    data: bytes, params: Optional[OracleParams] = None, plan_id: str = "plan"
) -> PlanReport:
    """Decode PNG bytes and analyze them; decode failures become parse_failed reports."""
    params = params or OracleParams()
    try:
        m = parse_layout(data, params.codes, snap=params.snap)
    except (DecodeError, ChannelCountError, InvariantError) as err:
        return PlanReport(plan_id=plan_id).invalidate("parse_failed", str(err))
    return analyze_mask(m, params, plan_id)


def worker_count(default: int = 1) -> int:
    """Worker-pool size from the PLANSYNTAX_WORKERS environment variable."""
    value = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(value)) if value else default
    except ValueError:
        _logger.warning("ignoring non-integer %s=%r", WORKERS_ENV, value)
        return default


def parallel_map(
    fn: Callable[[T], U], items: Iterable[T], workers: Optional[int] = None
) -> List[U]:
    """
    Apply ``fn`` to every item, preserving input order.

    Examples:
        >>> parallel_map(abs, [-1, 2, -3], workers=2)
        [1, 2, 3]
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))
