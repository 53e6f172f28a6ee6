"""
diffusion.py

Noise schedule, timestep respacing and Gaussian log-densities shared by the toy generator and the post-training loops.

The base schedule is a linear beta schedule over T steps. A respacing string such as "80,20,0,0" splits [0, T) into equal segments, low-noise segment first, and keeps the given number of evenly spaced timesteps in each one. The kept timesteps define a shorter chain whose betas are recomputed from the cumulative alphas, so the short chain matches the marginals of the long one.

Index 0 of a respaced chain is the final deterministic projection to x0; it is never sampled stochastically.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .errors import ConfigError, DimensionError, RespacingError, ZeroStepsError

_logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
VARIANCE_KINDS = ("large", "small")


def linear_betas(num_timesteps: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02) -> np.ndarray:
    if num_timesteps < 1:
        raise ConfigError(f"num_timesteps must be >= 1, got {num_timesteps}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ConfigError(f"bad beta range [{beta_start}, {beta_end}]")
    return np.linspace(beta_start, beta_end, num_timesteps, dtype=np.float64)


def _parse_counts(respacing: str) -> List[int]:
    parts = [p.strip() for p in str(respacing).split(",")]
    if not parts or any(not p for p in parts):
        raise RespacingError(f"malformed respacing {respacing!r}")
    try:
        counts = [int(p) for p in parts]
    except ValueError as err:
        raise RespacingError(f"malformed respacing {respacing!r}") from err
    if any(c < 0 for c in counts):
        raise RespacingError(f"negative count in respacing {respacing!r}")
    return counts


def respace(respacing: str, num_timesteps: int) -> List[int]:
    """
    The function `respace` selects the base timesteps kept by a respacing string.

    :param respacing: comma-separated step counts, one per equal segment, low noise first
    :type respacing: str
    :param num_timesteps: length T of the base schedule
    :type num_timesteps: int
    :return: kept timesteps, strictly increasing
    :raises RespacingError: malformed string or a segment asked for more steps than it holds
    :raises ZeroStepsError: every count is zero

    Examples:
        >>> respace("4", 4)
        [0, 1, 2, 3]
        >>> respace("2,1", 10)
        [0, 4, 5]
    """
    counts = _parse_counts(respacing)
    if sum(counts) == 0:
        raise ZeroStepsError(f"respacing {respacing!r} allocates no step")
    size_per, extra = divmod(num_timesteps, len(counts))
    start = 0
    steps: List[int] = []
    for i, count in enumerate(counts):
        size = size_per + (1 if i < extra else 0)
        if count > size:
            raise RespacingError(f"cannot take {count} steps from a segment of {size}")
        stride = 1.0 if count <= 1 else (size - 1) / (count - 1)
        cur = 0.0
        for _ in range(count):
            steps.append(start + round(cur))
            cur += stride
        start += size
    return sorted(set(steps))


@dataclass(frozen=True, eq=False)
class Schedule:
    """A respaced diffusion chain; index i runs over the kept timesteps."""

    timesteps: Tuple[int, ...]
    alphas_cumprod: np.ndarray
    alphas_cumprod_prev: np.ndarray
    betas: np.ndarray
    variances: np.ndarray
    variance_kind: str = "large"

    @property
    def length(self) -> int:
        return len(self.timesteps)

    @property
    def log_variances(self) -> np.ndarray:
        return np.log(self.variances)

    @property
    def posterior_coef_x0(self) -> np.ndarray:
        return self.betas * np.sqrt(self.alphas_cumprod_prev) / (1.0 - self.alphas_cumprod)

    @property
    def posterior_coef_xt(self) -> np.ndarray:
        return (
            (1.0 - self.alphas_cumprod_prev)
            * np.sqrt(1.0 - self.betas)
            / (1.0 - self.alphas_cumprod)
        )

    @classmethod
    def build(
        cls,
        respacing: str = "",
        num_timesteps: int = 1000,
        beta_start: float = 1e-4,
        beta_end: float = 0.02,
        variance: str = "large",
    ) -> "Schedule":
        """
        Respaced schedule; an empty ``respacing`` keeps every base timestep.

        Examples:
            >>> Schedule.build("80,20,0,0").length
            100
        """
        if variance not in VARIANCE_KINDS:
            raise ConfigError(f"unknown variance kind {variance!r}")
        base = np.cumprod(1.0 - linear_betas(num_timesteps, beta_start, beta_end))
        kept = respace(respacing, num_timesteps) if respacing else list(range(num_timesteps))
        acp = base[kept]
        acp_prev = np.concatenate([[1.0], acp[:-1]])
        betas = 1.0 - acp / acp_prev
        if variance == "large":
            variances = betas.copy()
        else:
            variances = betas * (1.0 - acp_prev) / (1.0 - acp)
        # index 0 is deterministic; keep a positive placeholder so logs stay finite
        fallback = variances[1] if len(kept) > 1 else betas[0]
        variances[0] = fallback if variances[0] <= 0 else variances[0]
        _logger.debug("schedule %r: %d steps, t in [%d, %d]", respacing, len(kept), kept[0], kept[-1])
        return cls(
            timesteps=tuple(kept),
            alphas_cumprod=acp,
            alphas_cumprod_prev=acp_prev,
            betas=betas,
            variances=variances,
            variance_kind=variance,
        )


def gauss_logprob(a: np.ndarray, mu: np.ndarray, var: np.ndarray) -> np.ndarray:
    """
    The function `gauss_logprob` evaluates a diagonal Gaussian log-density, summed over the last axis.

    :param a: the draw
    :type a: np.ndarray
    :param mu: the mean, same shape as ``a``
    :type mu: np.ndarray
    :param var: the variances, broadcastable to ``a``
    :type var: np.ndarray
    :return: log-density per leading index (a scalar for 1-d input)
    :raises DimensionError: shapes do not agree

    Examples:
        >>> round(float(gauss_logprob([0.0], [0.0], [1.0])), 6)
        -0.918939
    """
    a = np.asarray(a, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    if a.shape != mu.shape:
        raise DimensionError(f"draw shape {a.shape} != mean shape {mu.shape}")
    try:
        var = np.broadcast_to(var, a.shape)
    except ValueError as err:
        raise DimensionError(f"variance shape {var.shape} does not fit {a.shape}") from err
    if np.any(var <= 0):
        raise ConfigError("variances must be positive")
    diff = a - mu
    return -0.5 * np.sum(LOG_2PI + np.log(var) + diff * diff / var, axis=-1)
