"""
screening.py

This code decides which generated plans are worth keeping.

A plan's selection score s = z + p has two parts:

- z, the robust advantage of the living room: its mean integration minus the median of the other room types, divided by their median absolute deviation. If the MAD is zero the standard deviation is used instead, and if that is zero too a small epsilon.
- p, a sum of non-compensatory penalties: living room missing, too few rooms, too little total area, living-area share outside a band. Each violated gate adds a large negative weight, so a plan that fails a gate cannot win on z.

Plans that never produced a graph get s = -inf and are never selected. top_k picks the K best ids from the union of a candidate set and a base set.

The cleaning ledger counts how many plans fail at each pipeline stage and how many remain usable.
"""

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import (
    TYPE_CHECKING,
    Any,
    Dict,
    FrozenSet,
    Hashable,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
import yaml

from .errors import ConfigError, EmptyOthersError
from .mask_io import ChannelCodeTable
from .metrics import CategoryMap

if TYPE_CHECKING:  # pragma: no cover
    from .oracle import PlanReport

_logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
FAILURE_STAGES = ("parse_failed", "build_org", "build_house", "syn_skip")


@dataclass(frozen=True)
class GateConfig:
    lambda_miss: float = -10.0
    lambda_rooms: float = -10.0
    lambda_area: float = -10.0
    lambda_share: float = -10.0
    m_min: int = 3
    a_min: float = 1000.0
    rho_min: float = 0.15
    rho_max: float = 0.50
    eps: float = 1e-8
    living_type: int = 0
    ignore_types: FrozenSet[int] = field(
        default_factory=lambda: ChannelCodeTable.default().ignore_types
    )

    def __post_init__(self) -> None:
        for name in ("lambda_miss", "lambda_rooms", "lambda_area", "lambda_share"):
            if getattr(self, name) > 0:
                raise ConfigError(f"{name} must be <= 0")
        if not 0.0 <= self.rho_min < self.rho_max <= 1.0:
            raise ConfigError(f"bad living-share band [{self.rho_min}, {self.rho_max}]")
        if self.eps <= 0:
            raise ConfigError("eps must be > 0")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "GateConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known - {"version"}
        if unknown:
            raise ConfigError(f"unknown gate settings: {sorted(unknown)}")
        if "ignore_types" in data or "living_type" in data:
            raise ConfigError("room types come from the channel-code table and the category map")
        kwargs = {k: v for k, v in data.items() if k in known}
        return cls(**kwargs)

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "GateConfig":
        with open(path, encoding="utf-8") as fp:
            return cls.from_mapping(yaml.safe_load(fp) or {})

    @classmethod
    def default(cls) -> "GateConfig":
        return cls.from_yaml(DATA_DIR / "gates.yaml")

    def aligned_with(
        self, codes: ChannelCodeTable, categories: Optional[CategoryMap] = None
    ) -> "GateConfig":
        """The same gates, scoring room types the way the oracle run does."""
        living = self.living_type if categories is None else categories.living_type
        return replace(self, ignore_types=codes.ignore_types, living_type=living)


@dataclass(frozen=True)
class SelectionScore:
    z: float
    p: float
    s: float
    components: Mapping[str, Any] = field(default_factory=dict)


def robust_advantage(mu_living: float, others: Sequence[float], eps: float = 1e-8) -> float:
    """
    The function `robust_advantage` computes the MAD-standardized lead of the living room.

    :param mu_living: mean integration of the living type
    :type mu_living: float
    :param others: mean integration of every other scored room type
    :type others: Sequence[float]
    :param eps: small constant added to the spread
    :type eps: float
    :return: z
    :raises EmptyOthersError: ``others`` is empty

    Examples:
        >>> round(robust_advantage(3.0, [1.0, 2.0, 3.0]), 6)
        1.0
        >>> robust_advantage(2.0, [2.0, 2.0, 2.0])
        0.0
    """
    values = np.asarray(others, dtype=float)
    if values.size == 0:
        raise EmptyOthersError("robust advantage needs at least one other room type")
    med = float(np.median(values))
    spread = float(np.median(np.abs(values - med)))
    if spread == 0.0:
        spread = float(np.std(values))
    denom = spread + eps if spread > 0.0 else eps
    return (mu_living - med) / denom


def penalty(report: "PlanReport", cfg: GateConfig) -> Tuple[float, Dict[str, bool]]:
    """
    The function `penalty` sums the weights of every violated gate.

    :return: total penalty p and the gate indicators
    """
    share = report.living_area_share
    gates = {
        "living_missing": not report.living_present,
        "too_few_rooms": report.total_rooms < cfg.m_min,
        "area_too_small": report.total_area < cfg.a_min,
        "share_out_of_band": share is None
        or not cfg.rho_min <= share <= cfg.rho_max,
    }
    weights = {
        "living_missing": cfg.lambda_miss,
        "too_few_rooms": cfg.lambda_rooms,
        "area_too_small": cfg.lambda_area,
        "share_out_of_band": cfg.lambda_share,
    }
    p = sum(weights[g] for g, hit in gates.items() if hit)
    return float(p), gates


def selection_score(report: "PlanReport", cfg: GateConfig) -> SelectionScore:
    """
    The function `selection_score` combines robust advantage and penalties into s = z + p.

    Plans without a usable graph score -inf.
    """
    if not report.valid:
        return SelectionScore(
            z=0.0, p=0.0, s=-math.inf, components={"invalid": report.reason}
        )
    means = {int(t): m for t, m in report.type_means.items()}
    mu_living = means.get(cfg.living_type)
    others = [
        m
        for t, m in sorted(means.items())
        if t != cfg.living_type and t not in cfg.ignore_types
    ]
    components: Dict[str, Any] = {}
    if mu_living is None:
        z = 0.0
        components["z_reason"] = "living_missing"
    elif not others:
        z = 0.0
        components["z_reason"] = "no_other_types"
    else:
        z = robust_advantage(mu_living, others, cfg.eps)
    p, gates = penalty(report, cfg)
    components.update(gates)
    return SelectionScore(z=z, p=p, s=z + p, components=components)


def top_k(
    candidates: Iterable[Tuple[Hashable, float]],
    base: Iterable[Tuple[Hashable, float]],
    k: int,
) -> List[Any]:
    """
    The function `top_k` selects the K highest-scoring ids of candidates and base together.

    Ties go to the smaller id; -inf scores are never selected.

    Examples:
        >>> top_k([("a", 3.0), ("b", 1.0)], [("c", 2.0)], 2)
        ['a', 'c']
    """
    if k < 1:
        raise ConfigError(f"K must be >= 1, got {k}")
    pool: Dict[Any, float] = {}
    for key, s in list(candidates) + list(base):
        if key not in pool or s > pool[key]:
            pool[key] = s
    ranked = sorted(
        ((key, s) for key, s in pool.items() if s != -math.inf),
        key=lambda item: (-item[1], item[0]),
    )
    return [key for key, _ in ranked[:k]]


@dataclass(frozen=True)
class CleaningLedger:
    total: int
    counts: Mapping[str, int]
    usable: int
    percentages: Mapping[str, float]

    @classmethod
    def from_counts(cls, total: int, counts: Mapping[str, int]) -> "CleaningLedger":
        """
        Build a ledger from stage failure counts.

        Examples:
            >>> led = CleaningLedger.from_counts(
            ...     80788, {"parse_failed": 3497, "build_org": 171, "build_house": 121, "syn_skip": 121}
            ... )
            >>> led.usable, led.percentages["usable"]
            (76878, 95.16)
        """
        full = {stage: int(counts.get(stage, 0)) for stage in FAILURE_STAGES}
        usable = total - sum(full.values())
        if usable < 0:
            raise ValueError("failure counts exceed the total")
        pct = {
            name: round(100.0 * c / total, 2) if total else 0.0
            for name, c in list(full.items()) + [("usable", usable)]
        }
        return cls(total=total, counts=full, usable=usable, percentages=pct)

    def rows(self) -> List[Tuple[str, int, float]]:
        names = list(FAILURE_STAGES) + ["usable"]
        values = dict(self.counts, usable=self.usable)
        return [(n, values[n], self.percentages[n]) for n in names]

    def write_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fp:
            writer = csv.writer(fp, lineterminator="\n")
            writer.writerow(["stage", "count", "percent"])
            for name, count, pct in self.rows():
                writer.writerow([name, count, f"{pct:.2f}"])
            writer.writerow(["total", self.total, "100.00"])

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


def clean_dataset(records: Iterable[Union[str, Any]]) -> CleaningLedger:
    """
    The function `clean_dataset` tallies pipeline outcomes into a cleaning ledger.

    :param records: stage tags ("usable" or a failure stage), or objects with a ``stage`` attribute
    :return: the ledger
    """
    counts = {stage: 0 for stage in FAILURE_STAGES}
    total = 0
    for rec in records:
        stage = rec if isinstance(rec, str) else rec.stage
        total += 1
        if stage == "usable":
            continue
        if stage not in counts:
            raise ValueError(f"unknown pipeline stage {stage!r}")
        counts[stage] += 1
    ledger = CleaningLedger.from_counts(total, counts)
    _logger.info("cleaning: %d of %d plans usable", ledger.usable, total)
    return ledger
