"""
post_training.py

Two ways of steering the toy diffusion policy towards plans the space-syntax oracle likes.

Iterative Top-K retraining (sspt_iter_round): sample candidates, score them with the oracle, keep the K best of candidates and a cached base set together, and run denoising epochs on the kept plans.

PPO (sspt_ppo_round): treat the reverse chain as a sequential decision process. Each rollout logs (state, action, behavior log-probability) per stochastic step and gets one terminal reward. Rewards are clipped (fixed bounds or batch quantiles), normalized into advantages, and the timestep-averaged clipped surrogate, minus an optional KL penalty, is maximized by analytic gradient ascent for a few sub-epochs.

Because the mean of the policy is affine in its weights, the gradient of a log-density is an outer product ((a - mu) / sigma^2) phi^T, so no autodiff framework is needed.
"""

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from .diffusion import Schedule, gauss_logprob, respace
from .errors import ConfigError, DegeneratePolygonError, LengthMismatchError
from .metrics import profile_distance
from .oracle import OracleParams, analyze_mask, parallel_map
from .screening import GateConfig, selection_score, top_k
from .toy_generator import (
    Condition,
    LayoutConfig,
    Policy,
    Trajectory,
    denoising_step,
    render_layout,
    rollout,
)

__all__ = [
    "gauss_logprob",
    "respace",
    "RewardClip",
    "PPOConfig",
    "IterConfig",
    "ppo_ratio",
    "clipped_surrogate",
    "kl_estimate",
    "normalize_advantages",
    "clip_rewards",
    "ppo_objective",
    "sspt_ppo_round",
    "sspt_iter_round",
    "SelectionReward",
    "HybridReward",
    "append_train_log",
]

_logger = logging.getLogger(__name__)

RATIO_MIN = 1e-8
RATIO_MAX = 1e8
ADV_EPS = 1e-8
CLIP_MODES = ("none", "fixed", "quantile")
TRAIN_LOG_COLUMNS = (
    "round",
    "mode",
    "mean_reward",
    "median_reward",
    "kl",
    "mean_ratio",
    "clip_fraction",
    "failures",
    "seconds",
    "delta_reward_per_hour",
)

RewardFn = Callable[[np.ndarray, Condition], float]
ConditionFn = Callable[[np.random.Generator], Tuple[np.ndarray, Condition]]


@dataclass(frozen=True)
class RewardClip:
    mode: str = "none"
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in CLIP_MODES:
            raise ConfigError(f"unknown reward-clip mode {self.mode!r}")
        if self.mode == "fixed" and not self.lo <= self.hi:
            raise ConfigError(f"fixed clip needs lo <= hi, got [{self.lo}, {self.hi}]")
        if self.mode == "quantile" and not 0.0 <= self.lo < self.hi <= 1.0:
            raise ConfigError(f"quantile clip needs 0 <= q_lo < q_hi <= 1, got [{self.lo}, {self.hi}]")

    @classmethod
    def parse(cls, text: str) -> "RewardClip":
        """
        Parse "none", "fixed:LO,HI" or "quantile:QLO,QHI".

        Examples:
            >>> RewardClip.parse("quantile:0.05,0.95")
            RewardClip(mode='quantile', lo=0.05, hi=0.95)
        """
        mode, _, args = text.partition(":")
        if mode == "none" and not args:
            return cls()
        try:
            lo, hi = (float(v) for v in args.split(","))
        except ValueError as err:
            raise ConfigError(f"bad reward clip {text!r}") from err
        return cls(mode=mode, lo=lo, hi=hi)


@dataclass(frozen=True)
class PPOConfig:
    clip_eps: float = 0.2
    beta_kl: float = 0.0
    sub_epochs: int = 4
    rollouts: int = 32
    reward_clip: RewardClip = field(default_factory=lambda: RewardClip("quantile", 0.05, 0.95))
    respacing: str = "80,20,0,0"
    lr: float = 1e-3
    failure_reward: float = -10.0
    workers: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigError(f"clip_eps must be in (0, 1), got {self.clip_eps}")
        if self.beta_kl < 0:
            raise ConfigError("beta_kl must be >= 0")
        if self.sub_epochs < 1 or self.rollouts < 1:
            raise ConfigError("sub_epochs and rollouts must be >= 1")


@dataclass(frozen=True)
class IterConfig:
    samples: int = 64
    topk: int = 32
    epochs: int = 4
    batch_size: int = 16
    lr: float = 1e-2
    respacing: str = "80,20,0,0"
    workers: int = 1

    def __post_init__(self) -> None:
        if self.samples < 1 or self.topk < 1 or self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("samples, topk and batch_size must be >= 1, epochs >= 0")


def ppo_ratio(logp_new: np.ndarray, logp_old: np.ndarray) -> np.ndarray:
    """
    exp(logp_new - logp_old), clamped to [1e-8, 1e8].

    Examples:
        >>> float(ppo_ratio(0.0, 0.0))
        1.0
    """
    delta = np.asarray(logp_new, dtype=np.float64) - np.asarray(logp_old, dtype=np.float64)
    with np.errstate(over="ignore"):
        return np.clip(np.exp(delta), RATIO_MIN, RATIO_MAX)


def clipped_surrogate(rho: np.ndarray, adv: np.ndarray, eps: float) -> np.ndarray:
    """
    min(rho A, clip(rho, 1 - eps, 1 + eps) A).

    Examples:
        >>> float(clipped_surrogate(1.5, 1.0, 0.2))
        1.2
        >>> float(clipped_surrogate(0.5, -1.0, 0.2))
        -0.8
    """
    rho = np.asarray(rho, dtype=np.float64)
    adv = np.asarray(adv, dtype=np.float64)
    return np.minimum(rho * adv, np.clip(rho, 1.0 - eps, 1.0 + eps) * adv)


def kl_estimate(logp_old: Sequence[float], logp_new: Sequence[float]) -> float:
    """
    Sample estimate of KL(old || new) from stored log-probabilities.

    Examples:
        >>> kl_estimate([1.0, 2.0], [0.5, 1.5])
        0.5
    """
    old = np.asarray(logp_old, dtype=np.float64)
    new = np.asarray(logp_new, dtype=np.float64)
    if old.shape != new.shape:
        raise LengthMismatchError(f"{old.shape} != {new.shape}")
    if old.size == 0:
        raise LengthMismatchError("log-prob lists are empty")
    return float(np.mean(old - new))


def normalize_advantages(rewards: Sequence[float]) -> np.ndarray:
    """
    (R - mean) / (population std + 1e-8); all zeros for fewer than two rewards.

    Examples:
        >>> [round(float(a), 4) for a in normalize_advantages([1.0, 2.0, 3.0])]
        [-1.2247, 0.0, 1.2247]
    """
    r = np.asarray(rewards, dtype=np.float64)
    if r.size < 2:
        return np.zeros_like(r)
    return (r - r.mean()) / (r.std() + ADV_EPS)


def clip_rewards(
    rewards: Sequence[float], clip: RewardClip, failure_reward: float = -10.0
) -> np.ndarray:
    """
    The function `clip_rewards` clamps rewards to fixed or batch-quantile bounds.

    Non-finite rewards (failed renders) map to the lower bound, or to
    ``failure_reward`` when clipping is off. Quantile bounds are computed over
    the finite rewards only.

    Examples:
        >>> clip_rewards(range(10), RewardClip("fixed", 2, 7)).tolist()
        [2.0, 2.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 7.0, 7.0]
    """
    r = np.asarray(list(rewards), dtype=np.float64)
    finite = np.isfinite(r)
    if clip.mode == "none":
        return np.where(finite, r, failure_reward)
    if clip.mode == "fixed":
        lo, hi = clip.lo, clip.hi
    elif finite.any():
        lo, hi = (float(q) for q in np.quantile(r[finite], [clip.lo, clip.hi]))
    else:
        lo = hi = failure_reward
    r = np.where(np.isnan(r), -np.inf, r)
    return np.clip(r, lo, hi)


def _stack(trajectories: Sequence[Trajectory], pol: Policy, schedule: Schedule) -> Dict[str, np.ndarray]:
    owner = np.concatenate([np.full(tr.length, k) for k, tr in enumerate(trajectories)])
    indices = np.concatenate([tr.indices for tr in trajectories])
    states = np.vstack([tr.states for tr in trajectories])
    conds = np.vstack([np.broadcast_to(tr.cond, (tr.length, tr.cond.size)) for tr in trajectories])
    phi = pol.features(states, np.asarray(schedule.timesteps)[indices], conds)
    return {
        "owner": owner,
        "phi": phi,
        "actions": np.vstack([tr.actions for tr in trajectories]),
        "old": np.concatenate([tr.logps for tr in trajectories]),
        "var": schedule.variances[indices][:, None],
        "steps": np.asarray([tr.length for tr in trajectories], dtype=np.float64),
    }


def ppo_objective(
    pol: Policy,
    trajectories: Sequence[Trajectory],
    advantages: Sequence[float],
    cfg: PPOConfig,
    schedule: Schedule,
    weights: Optional[np.ndarray] = None,
    _cache: Optional[Dict[str, np.ndarray]] = None,
) -> Tuple[float, np.ndarray, Dict[str, float]]:
    """
    The function `ppo_objective` evaluates the timestep-averaged clipped surrogate and its gradient.

    value = mean over rollouts of [(1/T) sum_t J_t - beta_KL * KL]

    :param pol: current policy (its weights are used unless ``weights`` is given)
    :type pol: Policy
    :param trajectories: rollouts collected under the old policy
    :type trajectories: Sequence[Trajectory]
    :param advantages: one normalized advantage per rollout
    :type advantages: Sequence[float]
    :param cfg: clip epsilon and KL weight
    :type cfg: PPOConfig
    :param schedule: the respaced schedule used for the rollouts
    :type schedule: Schedule
    :param weights: evaluate at these weights instead of ``pol.weights``
    :type weights: Optional[np.ndarray]
    :return: (value, gradient w.r.t. the weights, stats)
    """
    if len(trajectories) != len(advantages):
        raise LengthMismatchError("one advantage per trajectory is required")
    w = pol.weights if weights is None else weights
    data = _cache if _cache is not None else _stack(trajectories, pol, schedule)
    owner, phi, var = data["owner"], data["phi"], data["var"]
    steps = data["steps"]
    adv = np.asarray(advantages, dtype=np.float64)[owner]

    mu = phi @ w.T
    new = gauss_logprob(data["actions"], mu, np.broadcast_to(var, mu.shape))
    delta = new - data["old"]
    rho = ppo_ratio(new, data["old"])
    surr = clipped_surrogate(rho, adv, cfg.clip_eps)

    n = len(trajectories)
    per_step = 1.0 / (n * steps[owner])
    value = float(np.sum(per_step * (surr - cfg.beta_kl * (data["old"] - new))))

    unclipped = np.where(adv >= 0, rho <= 1.0 + cfg.clip_eps, rho >= 1.0 - cfg.clip_eps)
    inside = (delta > math.log(RATIO_MIN)) & (delta < math.log(RATIO_MAX))
    coef = per_step * (np.where(unclipped & inside, rho * adv, 0.0) + cfg.beta_kl)
    score = (data["actions"] - mu) / var
    grad = (coef[:, None] * score).T @ phi

    stats = {
        "mean_ratio": float(np.mean(rho)),
        "kl": float(np.mean(data["old"] - new)),
        "clip_fraction": float(np.mean(np.abs(rho - 1.0) > cfg.clip_eps)),
    }
    return value, grad, stats


def _child_rngs(rng: np.random.Generator, n: int) -> List[np.random.Generator]:
    seeds = rng.integers(0, 2**63 - 1, size=n)
    return [np.random.default_rng(int(s)) for s in seeds]


def sspt_ppo_round(
    pol: Policy,
    cfg: PPOConfig,
    reward_fn: RewardFn,
    rng: np.random.Generator,
    schedule: Schedule,
    sample_condition: ConditionFn,
) -> Tuple[Policy, Dict[str, Any]]:
    """
    The function `sspt_ppo_round` collects rollouts under the current policy and takes PPO steps.

    :param pol: policy before the round (theta_old)
    :type pol: Policy
    :param cfg: PPO settings
    :type cfg: PPOConfig
    :param reward_fn: terminal reward of (x0, condition); -inf marks a failed plan
    :type reward_fn: RewardFn
    :param rng: the single source of randomness of the round
    :type rng: np.random.Generator
    :param schedule: respaced schedule
    :type schedule: Schedule
    :param sample_condition: draws (encoded condition, condition) pairs
    :type sample_condition: ConditionFn
    :return: updated policy and round diagnostics
    """
    start = time.perf_counter()
    draws = [sample_condition(rng) for _ in range(cfg.rollouts)]
    child = _child_rngs(rng, cfg.rollouts)
    trajectories = [rollout(pol, vec, schedule, g) for (vec, _), g in zip(draws, child)]
    raw = parallel_map(
        lambda k: reward_fn(trajectories[k].x0, draws[k][1]),
        range(cfg.rollouts),
        cfg.workers,
    )
    failures = int(sum(1 for r in raw if not math.isfinite(r)))
    if failures:
        _logger.info("%d of %d rollouts failed in the oracle", failures, cfg.rollouts)
    rewards = clip_rewards(raw, cfg.reward_clip, cfg.failure_reward)
    for tr, r in zip(trajectories, rewards):
        tr.reward = float(r)
    advantages = normalize_advantages(rewards)

    cache = _stack(trajectories, pol, schedule)
    ratios, kls, clips = [], [], []
    new_pol = pol
    for _ in range(cfg.sub_epochs):
        _, grad, stats = ppo_objective(
            new_pol, trajectories, advantages, cfg, schedule, _cache=cache
        )
        ratios.append(stats["mean_ratio"])
        kls.append(stats["kl"])
        clips.append(stats["clip_fraction"])
        new_pol = new_pol.with_weights(new_pol.weights + cfg.lr * grad)
    _, _, final = ppo_objective(new_pol, trajectories, advantages, cfg, schedule, _cache=cache)

    diagnostics = {
        "mode": "ppo",
        "mean_reward": float(np.mean(rewards)),
        "median_reward": float(np.median(rewards)),
        "raw_rewards": [float(r) for r in raw],
        "first_ratio": ratios[0],
        "mean_ratio": float(np.mean(ratios)),
        "kl": final["kl"],
        "clip_fraction": float(np.mean(clips)),
        "failures": failures,
        "seconds": time.perf_counter() - start,
    }
    _logger.info(
        "ppo round: mean reward %.4f, kl %.3g, clipped %.3f",
        diagnostics["mean_reward"],
        diagnostics["kl"],
        diagnostics["clip_fraction"],
    )
    return new_pol, diagnostics


def sspt_iter_round(
    pol: Policy,
    base_set: Sequence[Tuple[str, np.ndarray, np.ndarray, float]],
    cfg: IterConfig,
    reward_fn: RewardFn,
    rng: np.random.Generator,
    schedule: Schedule,
    sample_condition: ConditionFn,
) -> Tuple[Policy, Dict[str, Any]]:
    """
    The function `sspt_iter_round` runs generate, score, Top-K and fine-tune once.

    :param base_set: cached (id, x0, encoded condition, score) entries
    :type base_set: Sequence[Tuple[str, np.ndarray, np.ndarray, float]]
    :return: updated policy and diagnostics (scores, K, acceptance rate, selected ids)
    """
    start = time.perf_counter()
    draws = [sample_condition(rng) for _ in range(cfg.samples)]
    child = _child_rngs(rng, cfg.samples)
    x0s = [rollout(pol, vec, schedule, g).x0 for (vec, _), g in zip(draws, child)]
    scores = parallel_map(
        lambda k: reward_fn(x0s[k], draws[k][1]), range(cfg.samples), cfg.workers
    )
    pool: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
    candidates = []
    for k, (x0, (vec, _), s) in enumerate(zip(x0s, draws, scores)):
        key = f"gen{k:06d}"
        pool[key] = (x0, vec)
        candidates.append((key, float(s)))
    for key, x0, vec, s in base_set:
        pool[key] = (x0, vec)
    selected = top_k(candidates, [(key, s) for key, _, _, s in base_set], cfg.topk)

    new_pol = pol
    losses: List[float] = []
    if selected:
        x_sel = np.asarray([pool[key][0] for key in selected])
        c_sel = np.asarray([pool[key][1] for key in selected])
        for _ in range(cfg.epochs):
            order = rng.permutation(len(selected))
            for begin in range(0, len(order), cfg.batch_size):
                sel = order[begin : begin + cfg.batch_size]
                loss, new_pol = denoising_step(
                    new_pol, (x_sel[sel], c_sel[sel]), rng, cfg.lr, schedule
                )
                losses.append(loss)

    finite = [s for s in scores if math.isfinite(s)]
    accepted = sum(1 for key in selected if key in {c for c, _ in candidates})
    diagnostics = {
        "mode": "iter",
        "mean_reward": float(np.mean(finite)) if finite else float("-inf"),
        "median_reward": float(np.median(finite)) if finite else float("-inf"),
        "raw_rewards": [float(s) for s in scores],
        "k": len(selected),
        "selected": selected,
        "acceptance_rate": accepted / cfg.samples,
        "mean_loss": float(np.mean(losses)) if losses else 0.0,
        "failures": len(scores) - len(finite),
        "seconds": time.perf_counter() - start,
    }
    _logger.info(
        "iter round: median score %.4f, %d selected, %.2f accepted",
        diagnostics["median_reward"],
        len(selected),
        diagnostics["acceptance_rate"],
    )
    return new_pol, diagnostics


class SelectionReward:
    """Reward = selection score s = z + p of the rendered plan; -inf when rendering fails."""

    def __init__(
        self,
        params: Optional[OracleParams] = None,
        gates: Optional[GateConfig] = None,
        layout: Optional[LayoutConfig] = None,
    ):
        self.params = params or OracleParams()
        self.gates = (gates or GateConfig.default()).aligned_with(
            self.params.codes, self.params.categories
        )
        self.layout = layout or LayoutConfig()

    def report(self, x0: np.ndarray, program: Condition) -> Any:
        try:
            mask = render_layout(x0, program, self.layout, self.params.codes)
        except DegeneratePolygonError as err:
            _logger.debug("render failed: %s", err)
            return None
        return analyze_mask(mask, self.params)

    def __call__(self, x0: np.ndarray, program: Condition) -> float:
        report = self.report(x0, program)
        if report is None:
            return float("-inf")
        return selection_score(report, self.gates).s


class HybridReward(SelectionReward):
    """
    Weighted sum of the selection score, living_adv, public_score, plan
    integration and a profile-distance penalty against a reference profile.
    Missing metrics contribute 0.
    """

    TERMS = ("selection", "living_adv", "public_score", "integration", "profile_distance")

    def __init__(
        self,
        weights: Mapping[str, float],
        reference: Optional[Mapping[str, float]] = None,
        params: Optional[OracleParams] = None,
        gates: Optional[GateConfig] = None,
        layout: Optional[LayoutConfig] = None,
    ):
        super().__init__(params, gates, layout)
        unknown = set(weights) - set(self.TERMS)
        if unknown:
            raise ConfigError(f"unknown reward terms {sorted(unknown)}")
        if weights.get("profile_distance") and not reference:
            raise ConfigError("profile_distance term needs a reference profile")
        self.weights = {t: float(weights.get(t, 0.0)) for t in self.TERMS}
        self.reference = dict(reference or {})

    @classmethod
    def parse_weights(cls, text: str) -> Dict[str, float]:
        """
        Parse "term=w,term=w" or the path of a YAML mapping, optionally nested under ``weights``.

        Examples:
            >>> HybridReward.parse_weights("selection=1, living_adv=0.5")
            {'selection': 1.0, 'living_adv': 0.5}
        """
        items: Any
        if Path(text).suffix in (".yaml", ".yml"):
            with open(text, encoding="utf-8") as fp:
                data = yaml.safe_load(fp) or {}
            if isinstance(data, dict) and isinstance(data.get("weights"), dict):
                data = data["weights"]
            if not isinstance(data, dict):
                raise ConfigError(f"{text}: reward weights must be a mapping")
            items = data.items()
        else:
            items = []
            for part in filter(None, (p.strip() for p in text.split(","))):
                term, sep, value = part.partition("=")
                if not sep:
                    raise ConfigError(f"bad reward weight {part!r}")
                items.append((term.strip(), value))
        try:
            weights = {str(k): float(v) for k, v in items}
        except (TypeError, ValueError) as err:
            raise ConfigError(f"bad reward weights {text!r}") from err
        unknown = set(weights) - set(cls.TERMS)
        if unknown:
            raise ConfigError(f"unknown reward terms {sorted(unknown)}")
        return weights

    def __call__(self, x0: np.ndarray, program: Condition) -> float:
        report = self.report(x0, program)
        if report is None:
            return float("-inf")
        s = selection_score(report, self.gates).s
        if not math.isfinite(s):
            return s
        terms = {
            "selection": s,
            "living_adv": report.living_adv or 0.0,
            "public_score": report.public_score or 0.0,
            "integration": report.integration or 0.0,
            "profile_distance": 0.0,
        }
        shared = sorted(set(report.R) & set(self.reference))
        if shared:
            terms["profile_distance"] = -profile_distance(
                {g: report.R[g] for g in shared}, {g: self.reference[g] for g in shared}
            )
        return float(sum(self.weights[t] * terms[t] for t in self.TERMS))


def append_train_log(path: Union[str, Path], row: Mapping[str, Any]) -> None:
    """Append one diagnostics row to a CSV training log, writing the header for a new file."""
    path = Path(path)
    new_file = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8", newline="") as fp:
        writer = csv.DictWriter(
            fp, fieldnames=TRAIN_LOG_COLUMNS, extrasaction="ignore", lineterminator="\n"
        )
        if new_file:
            writer.writeheader()
        writer.writerow({k: _fmt(row.get(k)) for k in TRAIN_LOG_COLUMNS})


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)
