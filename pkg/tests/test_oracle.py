import numpy as np
import pytest
from conftest import make_layout

from plansyntax.integration import diamond_value
from plansyntax.mask_io import LayoutMask, render_png
from plansyntax.oracle import (
    SCHEMA_VERSION,
    OracleParams,
    PlanReport,
    analyze_mask,
    analyze_png,
    parallel_map,
    worker_count,
)
from plansyntax.syntax_graph import GraphParams

CLOSENESS = OracleParams(method="closeness")


def channels(m):
    return m.ch_boundary, m.ch_semantic, m.ch_instance, m.ch_interior


def test_three_rooms_in_a_row(three_rooms):
    r = analyze_mask(three_rooms, CLOSENESS, plan_id="row")
    assert r.valid and r.stage == "usable"
    assert r.node_count == 3
    assert r.edge_counts == {"within_room": 0, "bridge": 0, "cross_room": 2}
    assert r.integration == pytest.approx(7 / 9)
    assert r.public_score == pytest.approx(1 / 3)
    assert r.I["Living"] == pytest.approx(1.0)
    assert r.I["Bedroom"] == pytest.approx(2 / 3)
    assert r.R["Living"] == pytest.approx(9 / 7)
    assert r.R["Bathroom"] == pytest.approx(6 / 7)
    assert r.living_room == pytest.approx(9 / 7)
    assert r.living_adv == pytest.approx(3 / 7)
    assert (r.total_rooms, r.total_area) == (3, 1200)
    assert r.living_area_share == pytest.approx(1 / 3)
    assert r.living_present
    assert [room["rect_count"] for room in r.rooms] == [1, 1, 1]
    assert r.type_means == pytest.approx({0: 1.0, 1: 2 / 3, 3: 2 / 3})


def test_hh_integration(three_rooms):
    r = analyze_mask(three_rooms)
    assert r.valid
    d3 = diamond_value(3)
    assert r.integration == pytest.approx((1e6 + 2 * d3) / 3)
    assert r.type_means[0] == pytest.approx(1e6)
    assert r.type_means[1] == pytest.approx(d3)


def test_unreachable_room(split_rooms):
    # the largest component has two nodes: too few for hh
    r = analyze_mask(split_rooms)
    assert not r.valid
    assert r.stage == "syn_skip"
    r = analyze_mask(split_rooms, CLOSENESS)
    assert r.valid
    assert "room_without_score" in r.flags
    assert r.rooms[2]["mean_integration"] is None
    strict = OracleParams(method="closeness", strict_graph=True)
    assert analyze_mask(split_rooms, strict).stage == "syn_skip"


def test_failure_stages(three_rooms):
    no_rects = OracleParams(graph=GraphParams(min_rect_area=10**6))
    assert analyze_mask(three_rooms, no_rects).stage == "build_org"
    jagged = OracleParams(max_rects_per_room=0)
    r = analyze_mask(three_rooms, jagged)
    assert r.stage == "build_house"
    assert "jagged" in r.reason
    bad = analyze_png(b"not a png", plan_id="junk")
    assert bad.stage == "parse_failed"
    assert bad.plan_id == "junk"
    # accounting survives a failed stage
    assert r.total_rooms == 3


def test_png_path_matches_mask_path(three_rooms):
    a = analyze_png(render_png(three_rooms), CLOSENESS, plan_id="p")
    b = analyze_mask(three_rooms, CLOSENESS, plan_id="p")
    assert a == b


def test_report_json(three_rooms):
    r = analyze_mask(three_rooms, CLOSENESS, plan_id="row")
    text = r.to_json()
    assert PlanReport.from_json(text) == r
    assert f'"schema": {SCHEMA_VERSION}' in text
    assert '"type_means": {' in text


def test_parallel_map_keeps_order():
    items = list(range(20))
    assert parallel_map(lambda v: v * v, items, workers=4) == [v * v for v in items]
    assert parallel_map(str, [], workers=4) == []


def test_worker_count(monkeypatch):
    monkeypatch.delenv("PLANSYNTAX_WORKERS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("PLANSYNTAX_WORKERS", "4")
    assert worker_count() == 4
    monkeypatch.setenv("PLANSYNTAX_WORKERS", "0")
    assert worker_count() == 1
    monkeypatch.setenv("PLANSYNTAX_WORKERS", "many")
    assert worker_count(default=2) == 2


def test_oracle_benchmark(benchmark, three_rooms):
    r = benchmark(analyze_mask, three_rooms)
    assert r.valid


def test_room_too_small_for_a_rectangle_is_flagged():
    # Living | Bedroom | 5 x 5 Storage closet, doors on both walls
    m = make_layout(
        (24, 52),
        (2, 22, 2, 50),
        [(0, (2, 22, 2, 22)), (1, (2, 22, 23, 43)), (11, (2, 7, 44, 49))],
        doors=[(10, 13, 22, 23), (3, 6, 43, 44)],
    )
    r = analyze_mask(m, CLOSENESS, plan_id="closet")
    assert r.valid
    assert "room_without_rects" in r.flags
    assert [room["rect_count"] for room in r.rooms] == [1, 1, 0]
    assert r.rooms[2]["mean_integration"] is None
    assert r.node_count == 2
    finer = OracleParams(method="closeness", graph=GraphParams(min_rect_area=20))
    assert "room_without_rects" not in analyze_mask(m, finer).flags


def four_in_a_row():
    """Bedroom | Living | Bathroom | Kitchen, a door on every inner wall."""
    return make_layout(
        (24, 87),
        (2, 22, 2, 85),
        [(1, (2, 22, 2, 22)), (0, (2, 22, 23, 43)), (3, (2, 22, 44, 64)), (2, (2, 22, 65, 85))],
        doors=[(10, 13, 22, 23), (10, 13, 43, 44), (10, 13, 64, 65)],
    )


def test_upsampled_plan_keeps_its_metrics():
    m = four_in_a_row()
    big = LayoutMask.from_channels(*(np.kron(c, np.ones((2, 2), dtype=np.uint8)) for c in channels(m)))
    a = analyze_mask(m, plan_id="x")
    b = analyze_mask(big, plan_id="x")
    assert a.valid and b.valid
    assert b.node_count == a.node_count
    assert b.total_area == 4 * a.total_area
    assert b.living_area_share == pytest.approx(a.living_area_share)
    assert b.integration == pytest.approx(a.integration)
    assert b.public_score == pytest.approx(a.public_score)
    assert b.living_adv == pytest.approx(a.living_adv)
    assert b.R == pytest.approx(a.R)


def test_raw_ra_keeps_the_relative_profile():
    m = four_in_a_row()
    normed = analyze_mask(m)
    raw = analyze_mask(m, OracleParams(raw_ra=True))
    assert normed.node_count == raw.node_count == 4
    d4 = diamond_value(4)
    # every node score shrinks by the same factor
    assert raw.integration == pytest.approx(normed.integration / d4)
    assert raw.public_score == pytest.approx(normed.public_score / d4)
    assert raw.R == pytest.approx(normed.R, rel=1e-12)
    assert raw.living_adv == pytest.approx(normed.living_adv, rel=1e-12)
