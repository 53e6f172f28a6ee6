import json

import numpy as np
import pytest

from plansyntax.bench import (
    PROFILE_NAME,
    REPORT_NAME,
    SCHEMA_LINE,
    SUMMARY_NAME,
    BenchConfig,
    aggregate,
    bench_report_from_dir,
    emit_profile_svg,
    export_summary_csv,
    load_reference_profile,
    read_summary_csv,
    run_bench,
    summary_columns,
    write_analysis,
)
from plansyntax.errors import ConfigError
from plansyntax.metrics import CATEGORIES
from plansyntax.oracle import OracleParams, PlanReport, analyze_mask
from plansyntax.toy_generator import LayoutConfig, init_policy, synthesize_conditions

# public_score median, living_adv median and d_profile of the three eval-8 checkpoints
EVAL8 = {
    "hd": (0.1292, 0.2413, 0.1131),
    "iter": (0.1820, 0.3149, 0.0912),
    "ppo": (0.2244, 0.3522, 0.0663),
}
LIVING_MEDIANS = {"hd": 1.3397, "iter": 1.4195, "ppo": 1.4169}


@pytest.mark.parametrize("checkpoint", sorted(EVAL8))
def test_eval8_replay(testcases, checkpoint):
    rows = read_summary_csv(testcases / f"eval8_{checkpoint}.csv")
    reference = load_reference_profile(testcases / "eval8_reference.csv")
    report = aggregate(rows, reference=reference)
    public, adv, d_profile = EVAL8[checkpoint]
    assert report.n_plans == 6
    assert report.validity == {"valid": 5, "invalid": 1}
    assert round(report.stats["public_score"]["median"], 4) == public
    assert round(report.stats["living_adv"]["median"], 4) == adv
    assert round(report.medians()["Living"], 4) == LIVING_MEDIANS[checkpoint]
    assert round(report.d_profile, 4) == d_profile


def test_report_carries_the_coverage_weighted_profile(testcases):
    rows = read_summary_csv(testcases / "eval8_hd.csv")
    report = aggregate(rows)
    valid = [r for r in rows if r["valid"]]
    living = [r["R_Living"] for r in valid if r["R_Living"] is not None]
    assert report.cwri["Living"] == pytest.approx(sum(living) / len(valid))
    assert set(report.cwri) == set(CATEGORIES)
    assert all(v >= 0.0 for v in report.cwri.values())
    assert report.to_dict()["cwri"] == report.cwri
    assert aggregate([]).cwri == {}


def test_shipped_reference_profile():
    ref = load_reference_profile()
    assert ref["Living"] == 1.6286
    assert sorted(ref) == ["Bathroom", "Bedroom", "Entrance", "Living", "Storage"]


def test_d_profile_needs_every_reference_category(testcases, caplog):
    rows = read_summary_csv(testcases / "eval8_hd.csv")
    for r in rows:
        r["R_Storage"] = None
    report = aggregate(rows, reference=load_reference_profile())
    assert report.d_profile is None
    assert "d_profile not computed" in caplog.text


def test_summary_csv(tmp_path, three_rooms):
    good = analyze_mask(three_rooms, OracleParams(method="closeness"), plan_id="b")
    bad = PlanReport(plan_id="a").invalidate("parse_failed", "junk")
    path = export_summary_csv([good, bad], tmp_path / SUMMARY_NAME)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == SCHEMA_LINE
    assert lines[1].split(",") == summary_columns()
    assert lines[2].startswith("a,0,,,")
    assert all(len(line.split(",")) == len(summary_columns()) for line in lines[1:])
    rows = read_summary_csv(path)
    assert [r["plan_id"] for r in rows] == ["a", "b"]
    assert rows[0]["valid"] is False and rows[0]["public_score"] is None
    assert rows[1]["R_Living"] == pytest.approx(9 / 7)
    assert rows[1]["R_Kitchen"] is None
    with pytest.raises(ConfigError):
        export_summary_csv([], tmp_path / "empty.csv")


def test_single_plan_stats_are_degenerate(tmp_path, three_rooms):
    r = analyze_mask(three_rooms, OracleParams(method="closeness"), plan_id="only")
    report = write_analysis(tmp_path, [r])
    assert report.n_plans == 1
    assert report.stats["public_score"]["std"] == 0.0
    assert report.validity["usable"] == 1


def test_outputs_replay_from_plans(tmp_path, three_rooms, split_rooms):
    params = OracleParams(method="closeness")
    reports = [
        analyze_mask(three_rooms, params, plan_id="p0"),
        analyze_mask(split_rooms, params, plan_id="p1"),
        analyze_mask(split_rooms, plan_id="p2"),
    ]
    written = write_analysis(tmp_path, reports)
    assert (tmp_path / PROFILE_NAME).exists()
    assert sorted(p.name for p in (tmp_path / "plans").iterdir()) == ["p0.json", "p1.json", "p2.json"]
    stored = json.loads((tmp_path / REPORT_NAME).read_text())
    assert stored == written.to_dict()
    assert bench_report_from_dir(tmp_path).to_dict() == written.to_dict()
    assert written.validity["syn_skip"] == 1
    assert written.validity["usable"] == 2
    with pytest.raises(ConfigError):
        bench_report_from_dir(tmp_path / "nowhere")


def test_profile_svg_is_byte_identical(tmp_path):
    Y = {"Living": 1.4, "Bedroom": 0.9, "Bathroom": 0.8}
    bands = {"Living": (1.3, 1.5), "Bedroom": (0.85, 0.95)}
    ref = {"Living": 1.6, "Storage": 0.8}
    a = emit_profile_svg(Y, bands, ref, tmp_path / "a.svg")
    b = emit_profile_svg(Y, bands, ref, tmp_path / "b.svg")
    assert a.read_bytes() == b.read_bytes()
    assert b"<svg" in a.read_bytes()
    with pytest.raises(ConfigError):
        emit_profile_svg({"Attic": 1.0}, {}, None, tmp_path / "c.svg")


def test_bench_config_validation():
    with pytest.raises(ConfigError):
        BenchConfig(train_cap=8, eval_rooms=8)
    with pytest.raises(ConfigError):
        BenchConfig(samples=0)
    with pytest.raises(ConfigError):
        BenchConfig(train_cap=5, eval_rooms=9)
    assert BenchConfig(train_cap=3, eval_rooms=4, layout=LayoutConfig(max_rooms=4)).eval_rooms == 4


def test_run_bench_is_deterministic(tmp_path, layout_config):
    pol = init_policy(layout_config.policy_config(num_timesteps=20), seed=0)
    cfg = BenchConfig(samples=3, seed=1, respacing="4")
    first = run_bench(pol, cfg, tmp_path / "a")
    second = run_bench(pol, cfg, tmp_path / "b")
    assert first.n_plans == 3
    assert first.to_dict() == second.to_dict()
    for name in (SUMMARY_NAME, REPORT_NAME):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert sum(first.validity.values()) == 3


def test_run_bench_uses_eval_conditions_only(tmp_path, layout_config):
    conds = [c for c, _ in synthesize_conditions(6, [5, 8], np.random.default_rng(0), layout_config)]
    conds.append(next(c for c, _ in synthesize_conditions(20, [8], np.random.default_rng(1), layout_config)))
    pol = init_policy(layout_config.policy_config(num_timesteps=20), seed=0)
    report = run_bench(pol, BenchConfig(samples=2, respacing="4"), tmp_path, conditions=conds)
    assert report.n_plans == 2
    with pytest.raises(ConfigError):
        run_bench(pol, BenchConfig(samples=2), tmp_path, conditions=[c for c in conds if c.n_rooms < 8])
