"""
metrics.py

Plan-level and dataset-level evaluation metrics built on room-mean integration.

Per plan:

- public_score: the best public room (living rooms by default) minus the best of all other rooms.
- category profile: room types are merged into functional categories (Living, Bedroom, Kitchen, ...). A category's integration I is the count-weighted mean of its type means; dividing every I by the plan's mean over present categories gives the relative profile R, whose mean is 1 by construction.
- living_room / living_adv: R of Living, and its lead over the strongest other visible category (Entrance and Unknown are not visible).

Over a dataset:

- cwri: mean R of a category over the plans that contain it, times the share of plans that contain it.
- profile_bands / profile_distance: per-category medians with quartile bands, and the mean absolute difference between two median profiles.
- summarize: mean, median, sample std and type-7 quartiles of any scalar metric.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from .errors import (
    CategoryMismatchError,
    ConfigError,
    EmptyError,
    MissingLivingError,
    MissingOtherError,
    MissingPublicError,
    NoValidCategoryError,
)
from .integration import RoomScores

_logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
UNKNOWN = "Unknown"
CATEGORIES = (
    "Living",
    "Bedroom",
    "Kitchen",
    "Bathroom",
    "Dining",
    "Study",
    "Balcony",
    "Entrance",
    "Storage",
)


# The `CategoryMap` class maps semantic room types onto merged functional categories and
# names the public, denominator and visible sets.
@dataclass(frozen=True)
class CategoryMap:
    categories: Mapping[int, str]
    public_types: FrozenSet[int] = frozenset({0})
    living_category: str = "Living"
    living_type: int = 0
    denominator: Tuple[str, ...] = CATEGORIES
    hidden: FrozenSet[str] = frozenset({"Entrance"})

    def __post_init__(self) -> None:
        if self.living_category not in self.denominator:
            raise ConfigError(f"living category {self.living_category!r} not in denominator set")
        if UNKNOWN in self.denominator:
            raise ConfigError("Unknown cannot be part of the denominator set")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "CategoryMap":
        try:
            categories = {int(k): str(v) for k, v in data["categories"].items()}
        except (KeyError, AttributeError, TypeError, ValueError) as err:
            raise ConfigError(f"bad categories section: {err}") from err
        return cls(
            categories=categories,
            public_types=frozenset(int(t) for t in data.get("public_types", [0])),
            living_category=str(data.get("living_category", "Living")),
            living_type=int(data.get("living_type", 0)),
            denominator=tuple(data.get("denominator", CATEGORIES)),
            hidden=frozenset(data.get("hidden", ["Entrance"])),
        )

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "CategoryMap":
        with open(path, encoding="utf-8") as fp:
            return cls.from_mapping(yaml.safe_load(fp) or {})

    @classmethod
    def default(cls) -> "CategoryMap":
        return cls.from_yaml(DATA_DIR / "categories.yaml")

    def with_public(self, extra_types: Iterable[int]) -> "CategoryMap":
        return replace(self, public_types=self.public_types | frozenset(extra_types))

    def category(self, room_type: int) -> str:
        return self.categories.get(room_type, UNKNOWN)

    @property
    def visible(self) -> Tuple[str, ...]:
        return tuple(g for g in self.denominator if g not in self.hidden)


@dataclass
class PlanMetrics:
    integration: Optional[float] = None
    public_score: Optional[float] = None
    living_room: Optional[float] = None
    living_adv: Optional[float] = None
    I: Dict[str, float] = field(default_factory=dict)  # noqa: E741
    R: Dict[str, float] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    median: float
    std: float
    q25: float
    q75: float

    @property
    def iqr(self) -> float:
        return self.q75 - self.q25

    def as_dict(self) -> Dict[str, float]:
        return {
            "n": self.n,
            "mean": self.mean,
            "median": self.median,
            "std": self.std,
            "q25": self.q25,
            "q75": self.q75,
            "iqr": self.iqr,
        }


def public_score(rs: RoomScores, cm: CategoryMap) -> float:
    """
    The function `public_score` measures how strongly the public space dominates.

    :param rs: room-mean integration of one plan
    :type rs: RoomScores
    :param cm: category map carrying the public set
    :type cm: CategoryMap
    :return: max over public rooms minus max over all other rooms
    :raises MissingPublicError: no scored public room
    :raises MissingOtherError: no scored non-public room
    """
    public = [s for r, s in rs.means.items() if rs.room_types[r] in cm.public_types]
    other = [s for r, s in rs.means.items() if rs.room_types[r] not in cm.public_types]
    if not public:
        raise MissingPublicError("plan has no scored public room")
    if not other:
        raise MissingOtherError("plan has no scored non-public room")
    return max(public) - max(other)


def type_statistics(rs: RoomScores) -> Tuple[Dict[int, float], Dict[int, int]]:
    """
    Per room type: the unweighted mean of instance means, and the instance count.
    """
    grouped: Dict[int, List[float]] = {}
    for r in sorted(rs.means):
        grouped.setdefault(rs.room_types[r], []).append(rs.means[r])
    means = {t: float(np.mean(v)) for t, v in sorted(grouped.items())}
    counts = {t: len(v) for t, v in sorted(grouped.items())}
    return means, counts


def category_profile(
    rs: RoomScores, counts: Optional[Mapping[int, int]], cm: CategoryMap
) -> PlanMetrics:
    """
    The function `category_profile` computes category integration I and the relative profile R.

    :param rs: room-mean integration of one plan
    :type rs: RoomScores
    :param counts: room count per type, the scored instance counts when None
    :type counts: Optional[Mapping[int, int]]
    :param cm: category map
    :type cm: CategoryMap
    :return: PlanMetrics with ``I`` and ``R`` filled in
    :raises NoValidCategoryError: none of the denominator categories is present
    """
    type_means, scored_counts = type_statistics(rs)
    weights = dict(scored_counts)
    if counts is not None:
        weights.update({t: n for t, n in counts.items() if t in type_means})

    num: Dict[str, float] = {}
    den: Dict[str, float] = {}
    for t, m in type_means.items():
        g = cm.category(t)
        if g not in cm.denominator:
            continue
        num[g] = num.get(g, 0.0) + weights[t] * m
        den[g] = den.get(g, 0.0) + weights[t]
    I = {g: num[g] / den[g] for g in cm.denominator if den.get(g, 0.0) > 0}  # noqa: E741
    if not I:
        raise NoValidCategoryError("no category of the denominator set is present")
    mu = float(np.mean(list(I.values())))
    R = {g: v / mu for g, v in I.items()}
    return PlanMetrics(I=I, R=R)


def living_metrics(pm: PlanMetrics, cm: CategoryMap) -> Tuple[float, float]:
    """
    The function `living_metrics` returns (living_room, living_adv).

    Examples:
        >>> cm = CategoryMap(categories={0: "Living"})
        >>> pm = PlanMetrics(R={"Living": 1.4, "Bedroom": 1.0, "Entrance": 1.6})
        >>> tuple(round(v, 12) for v in living_metrics(pm, cm))
        (1.4, 0.4)
    """
    living = pm.R.get(cm.living_category)
    if living is None:
        raise MissingLivingError("Living is absent from the profile")
    others = [pm.R[g] for g in cm.visible if g != cm.living_category and g in pm.R]
    if not others:
        raise MissingLivingError("no visible category besides Living")
    return living, living - max(others)


def cwri(
    profiles: Sequence[Mapping[str, float]], categories: Optional[Iterable[str]] = None
) -> Dict[str, float]:
    """
    The function `cwri` computes the coverage-weighted relative integration per category.

    :param profiles: relative profile R of every plan
    :type profiles: Sequence[Mapping[str, float]]
    :param categories: categories to report, all that appear when None
    :type categories: Optional[Iterable[str]]
    :return: CWRI per category; 0 for categories present in no plan

    Examples:
        >>> cwri([{"Living": 2.0}, {"Bedroom": 1.0}], ["Living", "Study"])
        {'Living': 1.0, 'Study': 0.0}
    """
    if not profiles:
        raise EmptyError("cwri needs at least one plan")
    if categories is None:
        categories = sorted({g for p in profiles for g in p})
    total = len(profiles)
    result = {}
    for g in categories:
        present = [p[g] for p in profiles if g in p]
        result[g] = float(np.mean(present)) * len(present) / total if present else 0.0
    return result


def profile_bands(
    profiles: Sequence[Mapping[str, float]], categories: Iterable[str]
) -> Dict[str, Tuple[float, float, float]]:
    """Per category (median, q25, q75) over the plans that contain it."""
    bands = {}
    for g in categories:
        values = [p[g] for p in profiles if g in p]
        if not values:
            continue
        s = summarize(values)
        bands[g] = (s.median, s.q25, s.q75)
    return bands


def profile_distance(Y: Mapping[str, float], Y_ref: Mapping[str, float]) -> float:
    """
    Mean absolute difference between two median profiles over their shared categories.

    Examples:
        >>> round(profile_distance({"Living": 1.2, "Bedroom": 1.0}, {"Living": 1.0, "Bedroom": 1.0}), 12)
        0.1
    """
    if set(Y) != set(Y_ref):
        raise CategoryMismatchError(
            f"category sets differ: {sorted(set(Y) ^ set(Y_ref))}"
        )
    if not Y:
        raise EmptyError("profiles have no category")
    return float(np.mean([abs(Y[g] - Y_ref[g]) for g in sorted(Y)]))


def summarize(samples: Iterable[float]) -> SummaryStats:
    """
    The function `summarize` computes robust summary statistics of a sample.

    Quantiles use linear interpolation (type 7); std is the sample std
    (ddof=1), 0 for a single sample.

    Examples:
        >>> s = summarize([4, 2, 3, 1])
        >>> s.median, s.q25, s.q75, s.iqr
        (2.5, 1.75, 3.25, 1.5)
    """
    values = np.sort(np.asarray(list(samples), dtype=float))
    if values.size == 0:
        raise EmptyError("summarize needs at least one sample")
    q25, median, q75 = np.quantile(values, [0.25, 0.5, 0.75])
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return SummaryStats(
        n=int(values.size),
        mean=float(np.mean(values)),
        median=float(median),
        std=std,
        q25=float(q25),
        q75=float(q75),
    )
