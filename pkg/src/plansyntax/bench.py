"""
bench.py

The evaluation harness: sample plans from a checkpoint under held-out room counts, run the oracle on every plan, and aggregate.

A bench run writes one directory::

    runs/<run-id>/
        plans/*.json                     per-plan oracle reports
        convex_integration_summary.csv   one row per plan
        bench_report.json                summary statistics, median profile, CWRI, d_profile
        profile.svg                      median relative profile with IQR bands
        train_log.csv                    appended by the training subcommands

The bench report is a pure function of ``plans/``: bench_report_from_dir recomputes it from the JSON files alone. All outputs are written deterministically (sorted keys, fixed float format, LF line endings, fixed SVG hash salt and no timestamp) so reruns with the same seed are byte-identical.
"""

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import CategoryMismatchError, ConfigError, DegeneratePolygonError  # noqa: E402
from .metrics import CATEGORIES, cwri, profile_bands, profile_distance, summarize  # noqa: E402
from .oracle import OracleParams, PlanReport, analyze_mask, parallel_map  # noqa: E402
from .screening import clean_dataset  # noqa: E402
from .toy_generator import (  # noqa: E402
    Condition,
    ConditionSampler,
    LayoutConfig,
    Policy,
    encode_condition,
    render_layout,
    rollout,
    synthesize_program,
)

_logger = logging.getLogger(__name__)

SUMMARY_NAME = "convex_integration_summary.csv"
REPORT_NAME = "bench_report.json"
PROFILE_NAME = "profile.svg"
TRAIN_LOG_NAME = "train_log.csv"
SCHEMA_LINE = "# schema: convex_integration_summary v1"
STAT_METRICS = ("public_score", "living_room", "living_adv", "integration")
DATA_DIR = Path(__file__).parent / "data"


@dataclass(frozen=True)
class BenchConfig:
    train_cap: int = 7
    eval_rooms: int = 8
    samples: int = 200
    seed: int = 0
    respacing: str = "80,20,0,0"
    oracle: OracleParams = field(default_factory=OracleParams)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    workers: int = 1

    def __post_init__(self) -> None:
        if self.train_cap >= self.eval_rooms:
            raise ConfigError(
                f"train cap {self.train_cap} must stay below the eval room count {self.eval_rooms}"
            )
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.eval_rooms > self.layout.max_rooms:
            raise ConfigError("eval room count exceeds the layout's max_rooms")


@dataclass
class BenchReport:
    n_plans: int
    stats: Dict[str, Dict[str, float]]
    profile: Dict[str, Dict[str, float]]
    validity: Dict[str, int]
    d_profile: Optional[float] = None
    cwri: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_plans": self.n_plans,
            "stats": self.stats,
            "profile": self.profile,
            "cwri": self.cwri,
            "validity": self.validity,
            "d_profile": self.d_profile,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def medians(self) -> Dict[str, float]:
        return {g: band["median"] for g, band in self.profile.items()}


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9g")
    return str(value)


def summary_columns(categories: Sequence[str] = CATEGORIES) -> List[str]:
    return (
        ["plan_id", "valid", "integration", "public_score", "living_room", "living_adv"]
        + [f"I_{g}" for g in categories]
        + [f"R_{g}" for g in categories]
        + ["total_rooms", "total_area", "living_area_share"]
    )


def export_summary_csv(
    reports: Iterable[PlanReport],
    path: Union[str, Path],
    categories: Sequence[str] = CATEGORIES,
) -> Path:
    """
    The function `export_summary_csv` writes one row per plan with a versioned schema line.

    Floats use 9 significant digits, missing values are empty cells, rows end with LF.

    :param reports: per-plan reports, written in plan-id order
    :type reports: Iterable[PlanReport]
    :param path: output file
    :type path: Union[str, Path]
    :param categories: category order of the I_ and R_ columns
    :type categories: Sequence[str]
    :return: the output path
    """
    reports = sorted(reports, key=lambda r: r.plan_id)
    if not reports:
        raise ConfigError("no report to export")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fp:
        fp.write(SCHEMA_LINE + "\n")
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(summary_columns(categories))
        for r in reports:
            cells = (
                [r.plan_id, r.valid, r.integration, r.public_score, r.living_room, r.living_adv]
                + [r.I.get(g) for g in categories]
                + [r.R.get(g) for g in categories]
                + [r.total_rooms, r.total_area, r.living_area_share]
            )
            writer.writerow([_fmt(c) for c in cells])
    return path


def _read_csv_rows(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fp:
        lines = [line for line in fp if not line.startswith("#")]
    return list(csv.DictReader(lines))


def read_summary_csv(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """Read a summary CSV back; numeric cells become floats, empty cells None."""
    rows = []
    for raw in _read_csv_rows(path):
        row: Dict[str, Any] = {}
        for key, cell in raw.items():
            if key == "plan_id":
                row[key] = cell
            elif key == "valid":
                row[key] = cell == "1"
            else:
                row[key] = float(cell) if cell != "" else None
        rows.append(row)
    return rows


def load_reference_profile(path: Union[str, Path, None] = None) -> Dict[str, float]:
    """Category medians of a reference dataset (``category,median`` CSV)."""
    path = DATA_DIR / "reference_profile_8room.csv" if path is None else path
    return {row["category"]: float(row["median"]) for row in _read_csv_rows(path)}


def aggregate(
    rows: Sequence[Mapping[str, Any]],
    categories: Sequence[str] = CATEGORIES,
    reference: Optional[Mapping[str, float]] = None,
    validity: Optional[Dict[str, int]] = None,
) -> BenchReport:
    """
    The function `aggregate` reduces per-plan rows to a BenchReport.

    Rows are mappings with the summary-CSV keys (``R_<category>`` for the profile).
    Plans missing a metric or category contribute nothing to it.
    """
    rows = sorted(rows, key=lambda r: r["plan_id"])
    valid = [r for r in rows if r.get("valid")]
    stats = {}
    for metric in STAT_METRICS:
        values = [r[metric] for r in valid if r.get(metric) is not None]
        if values:
            stats[metric] = summarize(values).as_dict()
    profiles = [
        {g: r[f"R_{g}"] for g in categories if r.get(f"R_{g}") is not None} for r in valid
    ]
    bands = profile_bands(profiles, categories)
    coverage = cwri(profiles, categories) if profiles else {}
    profile = {g: {"median": y, "q25": lo, "q75": hi} for g, (y, lo, hi) in bands.items()}
    d_profile = None
    if reference:
        medians = {g: band["median"] for g, band in profile.items()}
        try:
            d_profile = profile_distance({g: medians[g] for g in reference if g in medians}, reference)
        except CategoryMismatchError as err:
            _logger.warning("d_profile not computed: %s", err)
    if validity is None:
        validity = {"valid": len(valid), "invalid": len(rows) - len(valid)}
    return BenchReport(
        n_plans=len(rows),
        stats=stats,
        profile=profile,
        validity=validity,
        d_profile=d_profile,
        cwri=coverage,
    )


def _report_row(r: PlanReport, categories: Sequence[str]) -> Dict[str, Any]:
    row: Dict[str, Any] = {
        "plan_id": r.plan_id,
        "valid": r.valid,
        "integration": r.integration,
        "public_score": r.public_score,
        "living_room": r.living_room,
        "living_adv": r.living_adv,
    }
    row.update({f"R_{g}": r.R.get(g) for g in categories})
    return row


def load_plan_reports(run_dir: Union[str, Path]) -> List[PlanReport]:
    plans = sorted((Path(run_dir) / "plans").glob("*.json"))
    return [PlanReport.from_json(p.read_text(encoding="utf-8")) for p in plans]


def bench_report_from_dir(
    run_dir: Union[str, Path],
    reference: Optional[Mapping[str, float]] = None,
    categories: Sequence[str] = CATEGORIES,
) -> BenchReport:
    """Recompute the bench report from ``plans/*.json`` alone."""
    reports = load_plan_reports(run_dir)
    if not reports:
        raise ConfigError(f"no plan report under {run_dir}")
    ledger = clean_dataset(reports)
    validity = dict(ledger.counts, usable=ledger.usable)
    return aggregate([_report_row(r, categories) for r in reports], categories, reference, validity)


def emit_profile_svg(
    Y: Mapping[str, float],
    bands: Mapping[str, Tuple[float, float]],
    Y_ref: Optional[Mapping[str, float]],
    path: Union[str, Path],
    categories: Sequence[str] = CATEGORIES,
) -> Path:
    """
    The function `emit_profile_svg` draws the median relative profile with its IQR band.

    :param Y: median R per category
    :type Y: Mapping[str, float]
    :param bands: (q25, q75) per category
    :type bands: Mapping[str, Tuple[float, float]]
    :param Y_ref: reference medians drawn as a second line
    :type Y_ref: Optional[Mapping[str, float]]
    :param path: output SVG file
    :type path: Union[str, Path]
    :param categories: category order along the x axis
    :type categories: Sequence[str]
    :return: the output path
    """
    order = [g for g in categories if g in Y]
    if not order:
        raise ConfigError("profile has no category to plot")
    xs = np.arange(len(order))
    with plt.rc_context({"svg.hashsalt": "plansyntax", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 3.5))
        try:
            lo = [bands.get(g, (Y[g], Y[g]))[0] for g in order]
            hi = [bands.get(g, (Y[g], Y[g]))[1] for g in order]
            ax.fill_between(xs, lo, hi, alpha=0.25, color="tab:blue", label="IQR")
            ax.plot(xs, [Y[g] for g in order], marker="o", color="tab:blue", label="median")
            if Y_ref:
                ref = [(i, Y_ref[g]) for i, g in enumerate(order) if g in Y_ref]
                if ref:
                    rx, ry = zip(*ref)
                    ax.plot(rx, ry, marker="s", linestyle="--", color="tab:gray", label="reference")
            ax.axhline(1.0, color="black", linewidth=0.5)
            ax.set_xticks(xs)
            ax.set_xticklabels(order, rotation=30)
            ax.set_ylabel("relative integration")
            ax.legend(loc="best")
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return Path(path)


def _write_outputs(
    run_dir: Path,
    reports: Sequence[PlanReport],
    reference: Optional[Mapping[str, float]],
    categories: Sequence[str],
) -> BenchReport:
    plans = run_dir / "plans"
    plans.mkdir(parents=True, exist_ok=True)
    for r in reports:
        (plans / f"{r.plan_id}.json").write_text(r.to_json() + "\n", encoding="utf-8")
    export_summary_csv(reports, run_dir / SUMMARY_NAME, categories)
    report = bench_report_from_dir(run_dir, reference, categories)
    (run_dir / REPORT_NAME).write_text(report.to_json(), encoding="utf-8")
    if report.profile:
        emit_profile_svg(
            report.medians(),
            {g: (b["q25"], b["q75"]) for g, b in report.profile.items()},
            reference,
            run_dir / PROFILE_NAME,
            categories,
        )
    return report


def run_bench(
    pol: Policy,
    cfg: BenchConfig,
    run_dir: Union[str, Path],
    conditions: Optional[Sequence[Condition]] = None,
    reference: Optional[Mapping[str, float]] = None,
) -> BenchReport:
    """
    The function `run_bench` samples plans under eval conditions and evaluates them.

    :param pol: the checkpoint under test
    :type pol: Policy
    :param cfg: bench settings; all randomness flows from ``cfg.seed``
    :type cfg: BenchConfig
    :param run_dir: output directory
    :type run_dir: Union[str, Path]
    :param conditions: eval conditions; synthesized with exactly ``cfg.eval_rooms`` rooms when omitted
    :type conditions: Optional[Sequence[Condition]]
    :param reference: reference category medians for d_profile
    :type reference: Optional[Mapping[str, float]]
    :return: the bench report (also written to ``run_dir``)
    """
    rng = np.random.default_rng(cfg.seed)
    if conditions is None:
        conditions = [
            synthesize_program(cfg.eval_rooms, rng, cfg.layout)[0] for _ in range(cfg.samples)
        ]
    sampler = ConditionSampler(conditions, exact=cfg.eval_rooms)
    schedule = pol.config.schedule(cfg.respacing)
    draws = [sampler.sample(rng) for _ in range(cfg.samples)]
    seeds = rng.integers(0, 2**63 - 1, size=cfg.samples)

    def evaluate(j: int) -> PlanReport:
        plan_id = f"plan{j:05d}"
        cond = draws[j]
        traj = rollout(
            pol, encode_condition(cond, cfg.layout), schedule, np.random.default_rng(int(seeds[j]))
        )
        try:
            mask = render_layout(traj.x0, cond, cfg.layout, cfg.oracle.codes)
        except DegeneratePolygonError as err:
            return PlanReport(plan_id=plan_id).invalidate("parse_failed", str(err))
        return analyze_mask(mask, cfg.oracle, plan_id)

    reports = parallel_map(evaluate, range(cfg.samples), cfg.workers)
    report = _write_outputs(Path(run_dir), reports, reference, cfg.oracle.categories.denominator)
    _logger.info("bench: %d plans, %s", report.n_plans, report.validity)
    return report


def write_analysis(
    run_dir: Union[str, Path],
    reports: Sequence[PlanReport],
    reference: Optional[Mapping[str, float]] = None,
    categories: Sequence[str] = CATEGORIES,
) -> BenchReport:
    """Write plans/, the summary CSV, the bench report and the SVG for analyzed reports."""
    return _write_outputs(Path(run_dir), reports, reference, categories)
