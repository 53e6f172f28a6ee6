"""
toy_generator.py

A small conditional Gaussian reverse-diffusion policy over room-corner coordinates, plus everything needed to feed it and to turn its samples into layout masks.

Layout vectors. A plan with up to ``max_rooms`` axis-aligned rooms is stored as a 2 x N_v matrix of corner coordinates in [-1, 1] (two corners per room: top-left and exclusive bottom-right), flattened row by row as [xs..., ys...]. Unused slots stay at zero.

Conditions. A condition names the room type of every slot, the program adjacency (which rooms get a door between them) and the boundary box in pixels. It is encoded as per-slot one-hot types, a type histogram and the normalized boundary size.

Policy. The reverse step is Gaussian with mean mu = W_x x_t + W_t emb(t) + W_c enc(c) + b and a fixed variance taken from the schedule. All four blocks live in one weight matrix so gradients are plain outer products. emb(t) is a sinusoidal embedding of the base timestep.

Rendering. render_layout snaps each room rectangle to the pixel grid, fills gaps inside the boundary from the nearest room, draws walls along every room edge, puts a 3-pixel door on each program adjacency and a front door on the entrance room.

synthesize_program draws valid plans by guillotine splitting of the boundary box; they serve as condition files, test fixtures and the pretraining corpus.
"""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np
from scipy import ndimage

from .diffusion import Schedule, gauss_logprob
from .errors import ConfigError, DegeneratePolygonError, OODViolationError
from .mask_io import ChannelCodeTable, LayoutMask

_logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
LIVING_TYPE = 0
ENTRANCE_TYPE = 10
CORE_TYPES = (1, 3, 2)  # MasterRoom, Bathroom, Kitchen
EXTRA_TYPES = (5, 4, 10, 11, 6, 9, 7, 8, 3, 1)
NEIGHBOURS = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class PolicyConfig:
    dim: int
    cond_dim: int
    emb_dim: int = 16
    num_timesteps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    variance: str = "large"
    init_scale: float = 0.01
    skip_gain: float = 1.0

    def __post_init__(self) -> None:
        if self.dim < 1 or self.cond_dim < 0:
            raise ConfigError(f"bad policy dims: dim={self.dim}, cond_dim={self.cond_dim}")
        if self.emb_dim < 2 or self.emb_dim % 2:
            raise ConfigError(f"emb_dim must be even and >= 2, got {self.emb_dim}")
        if self.num_timesteps < 1:
            raise ConfigError("num_timesteps must be >= 1")
        if self.variance not in ("large", "small"):
            raise ConfigError(f"unknown variance kind {self.variance!r}")
        if self.init_scale < 0:
            raise ConfigError("init_scale must be >= 0")

    @property
    def n_features(self) -> int:
        return self.dim + self.emb_dim + self.cond_dim + 1

    def schedule(self, respacing: str = "") -> Schedule:
        return Schedule.build(
            respacing, self.num_timesteps, self.beta_start, self.beta_end, self.variance
        )


def timestep_embedding(t: np.ndarray, dim: int) -> np.ndarray:
    """
    Sinusoidal embedding, one row per timestep: [cos(t f_i)..., sin(t f_i)...].

    Examples:
        >>> timestep_embedding(np.array([0.0]), 4).tolist()
        [[1.0, 1.0, 0.0, 0.0]]
    """
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    args = np.asarray(t, dtype=np.float64).reshape(-1, 1) * freqs
    return np.concatenate([np.cos(args), np.sin(args)], axis=1)


# The `Policy` class holds the affine reverse-step mean [W_x | W_t | W_c | b] as a single
# D x F matrix.
class Policy:
    def __init__(self, config: PolicyConfig, weights: np.ndarray):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (config.dim, config.n_features):
            raise ConfigError(
                f"weights {weights.shape} do not match ({config.dim}, {config.n_features})"
            )
        self.config = config
        self.weights = weights

    @property
    def W_x(self) -> np.ndarray:
        return self.weights[:, : self.config.dim]

    @property
    def W_t(self) -> np.ndarray:
        d = self.config.dim
        return self.weights[:, d : d + self.config.emb_dim]

    @property
    def W_c(self) -> np.ndarray:
        start = self.config.dim + self.config.emb_dim
        return self.weights[:, start : start + self.config.cond_dim]

    @property
    def b(self) -> np.ndarray:
        return self.weights[:, -1]

    def with_weights(self, weights: np.ndarray) -> "Policy":
        return Policy(self.config, np.array(weights, dtype=np.float64))

    def features(self, x_t: np.ndarray, t: Any, cond: np.ndarray) -> np.ndarray:
        """Feature rows phi = [x_t, emb(t), cond, 1], shape (B, F)."""
        x = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
        batch = x.shape[0]
        if x.shape[1] != self.config.dim:
            raise ConfigError(f"state has {x.shape[1]} dims, policy expects {self.config.dim}")
        ts = np.broadcast_to(np.asarray(t, dtype=np.float64), (batch,))
        c = np.broadcast_to(
            np.atleast_2d(np.asarray(cond, dtype=np.float64)), (batch, self.config.cond_dim)
        )
        return np.hstack(
            [x, timestep_embedding(ts, self.config.emb_dim), c, np.ones((batch, 1))]
        )

    def mean(self, x_t: np.ndarray, t: Any, cond: np.ndarray) -> np.ndarray:
        mu = self.features(x_t, t, cond) @ self.weights.T
        return mu[0] if np.ndim(x_t) == 1 else mu


def init_policy(config: PolicyConfig, seed: int) -> Policy:
    """
    The function `init_policy` draws small uniform weights around a skip connection.

    W_x starts at ``skip_gain`` times the identity plus U(-init_scale, init_scale);
    the other blocks start at U(-0.01, 0.01).

    :param config: policy dimensions and schedule
    :type config: PolicyConfig
    :param seed: random seed
    :type seed: int
    :return: a fresh policy
    """
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-0.01, 0.01, size=(config.dim, config.n_features))
    weights[:, : config.dim] = config.skip_gain * np.eye(config.dim) + rng.uniform(
        -config.init_scale, config.init_scale, size=(config.dim, config.dim)
    )
    return Policy(config, weights)


def p_mean_variance(
    pol: Policy, x_t: np.ndarray, index: int, cond: np.ndarray, schedule: Schedule
) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and log-variance of the reverse step at schedule index ``index``."""
    mu = pol.mean(x_t, schedule.timesteps[index], cond)
    log_var = np.full(np.shape(mu), schedule.log_variances[index])
    return mu, log_var


def sample_step(
    pol: Policy,
    x_t: np.ndarray,
    index: int,
    cond: np.ndarray,
    schedule: Schedule,
    rng: np.random.Generator,
    deterministic: bool = False,
) -> Tuple[np.ndarray, float]:
    """
    The function `sample_step` draws x_{t-1} from the reverse Gaussian and scores the draw.

    :param deterministic: return the mean instead of a draw
    :type deterministic: bool
    :return: the draw and its log-probability under the policy
    """
    mu, log_var = p_mean_variance(pol, x_t, index, cond, schedule)
    var = np.exp(log_var)
    if deterministic:
        x_prev = mu
    else:
        x_prev = mu + np.sqrt(var) * rng.standard_normal(mu.shape)
    return x_prev, float(gauss_logprob(x_prev, mu, var))


@dataclass(eq=False)
class Trajectory:
    """A stored rollout; step rows are ordered from high noise to low noise."""

    indices: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    logps: np.ndarray
    x0: np.ndarray
    cond: np.ndarray
    reward: Optional[float] = None

    @property
    def length(self) -> int:
        return int(self.indices.shape[0])

    def recompute_logps(self, pol: Policy, schedule: Schedule) -> np.ndarray:
        t = np.asarray(schedule.timesteps)[self.indices]
        mu = pol.features(self.states, t, self.cond) @ pol.weights.T
        var = schedule.variances[self.indices][:, None]
        return gauss_logprob(self.actions, mu, np.broadcast_to(var, mu.shape))


def rollout(
    pol: Policy, cond: np.ndarray, schedule: Schedule, rng: np.random.Generator
) -> Trajectory:
    """
    The function `rollout` samples a full reverse trajectory from x_T ~ N(0, I).

    Every stochastic step is recorded; the last step (index 0) is the
    deterministic projection to x0 and is not recorded.
    """
    x = rng.standard_normal(pol.config.dim)
    indices, states, actions, logps = [], [], [], []
    for i in range(schedule.length - 1, 0, -1):
        x_prev, logp = sample_step(pol, x, i, cond, schedule, rng)
        indices.append(i)
        states.append(x)
        actions.append(x_prev)
        logps.append(logp)
        x = x_prev
    x0 = pol.mean(x, schedule.timesteps[0], cond)
    dim = pol.config.dim
    return Trajectory(
        indices=np.asarray(indices, dtype=np.int64),
        states=np.asarray(states, dtype=np.float64).reshape(-1, dim),
        actions=np.asarray(actions, dtype=np.float64).reshape(-1, dim),
        logps=np.asarray(logps, dtype=np.float64),
        x0=x0,
        cond=np.asarray(cond, dtype=np.float64),
    )


# ---- denoising objective ----


def sample_denoising_batch(
    pol: Policy,
    x0s: np.ndarray,
    conds: np.ndarray,
    rng: np.random.Generator,
    schedule: Schedule,
) -> Tuple[np.ndarray, np.ndarray]:
    """Forward-noise a batch; return features and posterior-mean targets."""
    x0s = np.atleast_2d(np.asarray(x0s, dtype=np.float64))
    batch = x0s.shape[0]
    idx = rng.integers(0, schedule.length, size=batch)
    noise = rng.standard_normal(x0s.shape)
    acp = schedule.alphas_cumprod[idx][:, None]
    x_t = np.sqrt(acp) * x0s + np.sqrt(1.0 - acp) * noise
    target = (
        schedule.posterior_coef_x0[idx][:, None] * x0s
        + schedule.posterior_coef_xt[idx][:, None] * x_t
    )
    phi = pol.features(x_t, np.asarray(schedule.timesteps)[idx], conds)
    return phi, target


def denoising_loss(
    weights: np.ndarray, phi: np.ndarray, target: np.ndarray
) -> Tuple[float, np.ndarray]:
    """Mean squared error of the mean prediction and its gradient w.r.t. the weights."""
    resid = phi @ weights.T - target
    loss = float(np.mean(resid * resid))
    grad = (2.0 / resid.size) * resid.T @ phi
    return loss, grad


def denoising_step(
    pol: Policy,
    batch: Tuple[np.ndarray, np.ndarray],
    rng: np.random.Generator,
    lr: float,
    schedule: Schedule,
) -> Tuple[float, Policy]:
    """
    The function `denoising_step` takes one gradient step on the denoising objective.

    :param batch: (x0 rows, condition rows)
    :return: loss before the step and the updated policy
    """
    x0s, conds = batch
    if len(x0s) == 0:
        raise ConfigError("denoising batch is empty")
    phi, target = sample_denoising_batch(pol, x0s, conds, rng, schedule)
    loss, grad = denoising_loss(pol.weights, phi, target)
    return loss, pol.with_weights(pol.weights - lr * grad)


def pretrain(
    pol: Policy,
    corpus: Sequence[Tuple[np.ndarray, np.ndarray]],
    epochs: int,
    batch_size: int,
    lr: float,
    rng: np.random.Generator,
    schedule: Schedule,
) -> Policy:
    """Denoising epochs over a corpus of (x0, condition vector) pairs."""
    if not corpus:
        raise ConfigError("pretraining corpus is empty")
    x0s = np.asarray([x for x, _ in corpus])
    conds = np.asarray([c for _, c in corpus])
    for epoch in range(epochs):
        order = rng.permutation(len(corpus))
        losses = []
        for start in range(0, len(order), batch_size):
            sel = order[start : start + batch_size]
            loss, pol = denoising_step(pol, (x0s[sel], conds[sel]), rng, lr, schedule)
            losses.append(loss)
        _logger.info("pretrain epoch %d: loss %.6f", epoch, float(np.mean(losses)))
    return pol


def save_policy(path: Union[str, Path], pol: Policy) -> None:
    """Write a versioned .npz checkpoint: the weight matrix and the JSON config."""
    with open(path, "wb") as fp:
        np.savez(
            fp,
            version=np.array(CHECKPOINT_VERSION),
            weights=pol.weights,
            config=np.array(json.dumps(asdict(pol.config), sort_keys=True)),
        )


def load_policy(path: Union[str, Path]) -> Policy:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {version}")
        config = PolicyConfig(**json.loads(data["config"].item()))
        return Policy(config, data["weights"])


# ---- conditions and layouts ----


@dataclass(frozen=True)
class LayoutConfig:
    max_rooms: int = 8
    n_types: int = 13
    box: int = 64
    margin: int = 4
    door_width: int = 3
    min_contact: int = 5
    boundary_range: Tuple[int, int] = (44, 56)

    def __post_init__(self) -> None:
        if self.max_rooms < 1 or self.n_types < 1:
            raise ConfigError("max_rooms and n_types must be >= 1")
        lo, hi = self.boundary_range
        if not 1 <= lo <= hi <= self.box - 2 * self.margin:
            raise ConfigError(f"boundary range {self.boundary_range} does not fit the box")

    @property
    def dim(self) -> int:
        return 4 * self.max_rooms

    @property
    def cond_dim(self) -> int:
        return self.max_rooms * self.n_types + self.n_types + 2

    @property
    def span(self) -> int:
        return self.box - 2 * self.margin

    def policy_config(self, **kwargs: Any) -> PolicyConfig:
        return PolicyConfig(dim=self.dim, cond_dim=self.cond_dim, **kwargs)

    def to_coords(self, pixels: np.ndarray) -> np.ndarray:
        return 2.0 * (np.asarray(pixels, dtype=np.float64) - self.margin) / self.span - 1.0

    def to_pixels(self, coords: np.ndarray) -> np.ndarray:
        p = self.margin + (np.asarray(coords, dtype=np.float64) + 1.0) / 2.0 * self.span
        return np.clip(np.rint(p), 0, self.box).astype(np.int64)


@dataclass(frozen=True)
class Condition:
    rooms: Tuple[int, ...]
    adjacency: Tuple[Tuple[int, int], ...] = ()
    boundary: Tuple[int, int] = (56, 56)

    @property
    def n_rooms(self) -> int:
        return len(self.rooms)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rooms": list(self.rooms),
            "adjacency": [list(p) for p in self.adjacency],
            "boundary": list(self.boundary),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Condition":
        try:
            return cls(
                rooms=tuple(int(t) for t in data["rooms"]),
                adjacency=tuple(tuple(sorted((int(a), int(b)))) for a, b in data.get("adjacency", [])),  # type: ignore[misc]
                boundary=tuple(int(v) for v in data.get("boundary", (56, 56))),  # type: ignore[arg-type]
            )
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(f"bad condition record: {err}") from err


def read_conditions(path: Union[str, Path]) -> List[Condition]:
    """Read a line-oriented JSON condition file; blank lines are skipped."""
    conditions = []
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                conditions.append(Condition.from_dict(json.loads(line)))
            except json.JSONDecodeError as err:
                raise ConfigError(f"{path}:{lineno}: {err}") from err
    return conditions


def write_conditions(path: Union[str, Path], conditions: Iterable[Condition]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        for cond in conditions:
            fp.write(json.dumps(cond.to_dict(), sort_keys=True) + "\n")


def encode_condition(cond: Condition, layout: LayoutConfig) -> np.ndarray:
    """Per-slot one-hot types, type histogram and normalized boundary size."""
    if cond.n_rooms > layout.max_rooms:
        raise ConfigError(f"{cond.n_rooms} rooms exceed max_rooms={layout.max_rooms}")
    slots = np.zeros((layout.max_rooms, layout.n_types))
    for s, t in enumerate(cond.rooms):
        if not 0 <= t < layout.n_types:
            raise ConfigError(f"room type {t} outside the type vocabulary")
        slots[s, t] = 1.0
    hist = slots.sum(axis=0) / layout.max_rooms
    bounds = np.asarray(cond.boundary, dtype=np.float64) / layout.box
    return np.concatenate([slots.ravel(), hist, bounds])


class ConditionSampler:
    """
    Draws training or evaluation conditions.

    ``cap`` keeps conditions with at most that many rooms (training);
    ``exact`` keeps conditions with exactly that many (evaluation). Every
    draw passes the room-count guard.
    """

    def __init__(
        self,
        conditions: Sequence[Condition],
        cap: Optional[int] = None,
        exact: Optional[int] = None,
    ):
        self.cap = cap
        self.exact = exact
        self.pool = [
            c
            for c in conditions
            if (cap is None or c.n_rooms <= cap) and (exact is None or c.n_rooms == exact)
        ]
        if not self.pool:
            raise ConfigError(f"no condition satisfies cap={cap}, exact={exact}")
        self.sampled = 0
        self.violations = 0

    def check(self, cond: Condition) -> None:
        if self.cap is not None and cond.n_rooms > self.cap:
            self.violations += 1
            raise OODViolationError(f"{cond.n_rooms}-room condition exceeds cap {self.cap}")

    def sample(self, rng: np.random.Generator) -> Condition:
        cond = self.pool[int(rng.integers(len(self.pool)))]
        self.sampled += 1
        self.check(cond)
        return cond


def condition_source(
    sampler: ConditionSampler, layout: LayoutConfig
) -> Callable[[np.random.Generator], Tuple[np.ndarray, Condition]]:
    """Adapter yielding (encoded condition, condition) pairs for the training loops."""

    def draw(rng: np.random.Generator) -> Tuple[np.ndarray, Condition]:
        cond = sampler.sample(rng)
        return encode_condition(cond, layout), cond

    return draw


def _contact(a: Tuple[int, int, int, int], b: Tuple[int, int, int, int]) -> int:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    if ax1 == bx0 or bx1 == ax0:
        return max(0, min(ay1, by1) - max(ay0, by0))
    if ay1 == by0 or by1 == ay0:
        return max(0, min(ax1, bx1) - max(ax0, bx0))
    return 0


def synthesize_program(
    n_rooms: int,
    rng: np.random.Generator,
    layout: Optional[LayoutConfig] = None,
    boundary: Optional[Tuple[int, int]] = None,
) -> Tuple[Condition, np.ndarray]:
    """
    The function `synthesize_program` draws a valid plan by guillotine splits of the boundary box.

    The room with the most contacts becomes the living room (slot 0). The
    program adjacency holds every contact of the living room plus a BFS tree
    over the remaining contacts.

    :param n_rooms: number of rooms
    :type n_rooms: int
    :param rng: random generator
    :type rng: np.random.Generator
    :param layout: layout geometry
    :type layout: Optional[LayoutConfig]
    :param boundary: boundary size (w, h) in pixels, drawn when omitted
    :type boundary: Optional[Tuple[int, int]]
    :return: the condition and its layout vector x0
    """
    layout = layout or LayoutConfig()
    if not 1 <= n_rooms <= layout.max_rooms:
        raise ConfigError(f"n_rooms must be in [1, {layout.max_rooms}], got {n_rooms}")
    if boundary is None:
        lo, hi = layout.boundary_range
        boundary = (int(rng.integers(lo, hi + 1)), int(rng.integers(lo, hi + 1)))
    w, h = boundary
    m = layout.margin
    rects = [(m, m, m + w, m + h)]
    while len(rects) < n_rooms:
        idx = max(
            range(len(rects)),
            key=lambda i: ((rects[i][2] - rects[i][0]) * (rects[i][3] - rects[i][1]), -i),
        )
        x0, y0, x1, y1 = rects.pop(idx)
        frac = rng.uniform(0.35, 0.65)
        if x1 - x0 >= y1 - y0:
            cut = x0 + int(round((x1 - x0) * frac))
            rects += [(x0, y0, cut, y1), (cut, y0, x1, y1)]
        else:
            cut = y0 + int(round((y1 - y0) * frac))
            rects += [(x0, y0, x1, cut), (x0, cut, x1, y1)]

    contacts = nx.Graph()
    contacts.add_nodes_from(range(len(rects)))
    for i in range(len(rects)):
        for j in range(i + 1, len(rects)):
            if _contact(rects[i], rects[j]) >= layout.min_contact:
                contacts.add_edge(i, j)

    def area(i: int) -> int:
        x0, y0, x1, y1 = rects[i]
        return (x1 - x0) * (y1 - y0)

    living = max(range(len(rects)), key=lambda i: (contacts.degree(i), area(i), -i))
    others = sorted((i for i in range(len(rects)) if i != living), key=lambda i: (rects[i][1], rects[i][0]))
    order = [living] + others
    slot_of = {r: s for s, r in enumerate(order)}

    types = list(CORE_TYPES[: len(others)])
    while len(types) < len(others):
        types.append(int(rng.choice(EXTRA_TYPES)))
    types = [types[k] for k in rng.permutation(len(types))]
    rooms = (LIVING_TYPE,) + tuple(types)

    program: Set[Tuple[int, int]] = set()
    for j in contacts.neighbors(living):
        program.add(tuple(sorted((slot_of[living], slot_of[j]))))  # type: ignore[arg-type]
    for u, v in nx.bfs_edges(contacts, living):
        program.add(tuple(sorted((slot_of[u], slot_of[v]))))  # type: ignore[arg-type]

    coords = np.zeros((2, 2 * layout.max_rooms))
    for s, r in enumerate(order):
        x0, y0, x1, y1 = rects[r]
        coords[0, 2 * s : 2 * s + 2] = layout.to_coords([x0, x1])
        coords[1, 2 * s : 2 * s + 2] = layout.to_coords([y0, y1])
    cond = Condition(rooms=rooms, adjacency=tuple(sorted(program)), boundary=(w, h))
    return cond, coords.ravel()


def synthesize_conditions(
    count: int,
    room_counts: Sequence[int],
    rng: np.random.Generator,
    layout: Optional[LayoutConfig] = None,
) -> List[Tuple[Condition, np.ndarray]]:
    """``count`` synthesized plans with room counts drawn from ``room_counts``."""
    layout = layout or LayoutConfig()
    return [
        synthesize_program(int(rng.choice(room_counts)), rng, layout) for _ in range(count)
    ]


def _shift(padded: np.ndarray, dy: int, dx: int, shape: Tuple[int, int]) -> np.ndarray:
    h, w = shape
    return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]


def _segment(
    instance: np.ndarray, mask: np.ndarray, centre: Tuple[int, int], along: Tuple[int, int], owner: int, width: int
) -> None:
    h, w = instance.shape
    for o in range(-(width // 2), width - width // 2):
        y, x = centre[0] + o * along[0], centre[1] + o * along[1]
        if 0 <= y < h and 0 <= x < w and instance[y, x] == owner:
            mask[y, x] = True


def render_layout(
    x0: np.ndarray,
    cond: Condition,
    layout: Optional[LayoutConfig] = None,
    codes: Optional[ChannelCodeTable] = None,
) -> LayoutMask:
    """
    The function `render_layout` rasterizes a layout vector into a 4-channel mask.

    :param x0: flattened corner coordinates
    :type x0: np.ndarray
    :param cond: room types, program adjacency and boundary box
    :type cond: Condition
    :param layout: layout geometry
    :type layout: Optional[LayoutConfig]
    :param codes: channel-code table
    :type codes: Optional[ChannelCodeTable]
    :return: the rendered mask; overlaps, lost rooms and unrealized doors are flagged
    :raises DegeneratePolygonError: a room has zero area or coordinates are not finite
    """
    layout = layout or LayoutConfig()
    codes = codes or ChannelCodeTable.default()
    coords = np.asarray(x0, dtype=np.float64).reshape(2, -1)
    if not np.all(np.isfinite(coords)):
        raise DegeneratePolygonError("layout vector has non-finite coordinates")
    shape = (layout.box, layout.box)
    m = layout.margin
    env_w, env_h = cond.boundary
    envelope = np.zeros(shape, dtype=bool)
    envelope[m : m + env_h, m : m + env_w] = True

    flags: Set[str] = set()
    instance = np.zeros(shape, dtype=np.int64)
    for r in range(cond.n_rooms):
        xs = sorted(layout.to_pixels(coords[0, 2 * r : 2 * r + 2]).tolist())
        ys = sorted(layout.to_pixels(coords[1, 2 * r : 2 * r + 2]).tolist())
        if xs[1] <= xs[0] or ys[1] <= ys[0]:
            raise DegeneratePolygonError(f"room {r} rasterizes to zero area")
        region = instance[ys[0] : ys[1], xs[0] : xs[1]]
        if np.any(region > 0):
            flags.add("overlap")
        region[...] = r + 1

    outside = (instance > 0) & ~envelope
    if outside.any():
        flags.add("outside_boundary")
        instance[outside] = 0
    if not instance.any():
        raise DegeneratePolygonError("no room lies inside the boundary")
    if any(not np.any(instance == r + 1) for r in range(cond.n_rooms)):
        flags.add("room_lost")
    gaps = envelope & (instance == 0)
    if gaps.any():
        flags.add("filled_gaps")
        _, (iy, ix) = ndimage.distance_transform_edt(instance == 0, return_indices=True)
        instance[gaps] = instance[iy[gaps], ix[gaps]]

    semantic = np.full(shape, codes.semantic_code("external"), dtype=np.int64)
    for r, t in enumerate(cond.rooms):
        semantic[instance == r + 1] = t

    padded = np.pad(instance, 1)
    ext_wall = np.zeros(shape, dtype=bool)
    int_wall = np.zeros(shape, dtype=bool)
    for dy, dx in NEIGHBOURS:
        nb = _shift(padded, dy, dx, shape)
        differs = (instance > 0) & (nb != instance)
        ext_wall |= differs & (nb == 0)
        int_wall |= differs & (nb > 0)

    door = np.zeros(shape, dtype=bool)
    for a, b in cond.adjacency:
        ia, ib = a + 1, b + 1
        contacts = []
        for dy, dx in ((0, 1), (1, 0)):
            nb = _shift(padded, dy, dx, shape)
            along = (1, 0) if dx else (0, 1)
            for y, x in zip(*np.nonzero((instance == ia) & (nb == ib))):
                contacts.append(((int(y), int(x)), (int(y) + dy, int(x) + dx), along))
            for y, x in zip(*np.nonzero((instance == ib) & (nb == ia))):
                contacts.append(((int(y) + dy, int(x) + dx), (int(y), int(x)), along))
        if not contacts:
            flags.add("unrealized_door")
            continue
        contacts.sort()
        pa, pb, along = contacts[len(contacts) // 2]
        _segment(instance, door, pa, along, ia, layout.door_width)
        _segment(instance, door, pb, along, ib, layout.door_width)

    front = np.zeros(shape, dtype=bool)
    if ENTRANCE_TYPE in cond.rooms:
        e = cond.rooms.index(ENTRANCE_TYPE) + 1
        edge = sorted(zip(*np.nonzero((instance == e) & ext_wall)))
        if edge:
            y, x = (int(v) for v in edge[len(edge) // 2])
            for dy, dx in NEIGHBOURS:
                yy, xx = y + dy, x + dx
                if not (0 <= yy < shape[0] and 0 <= xx < shape[1]) or instance[yy, xx] == 0:
                    _segment(instance, front, (y, x), (abs(dx), abs(dy)), e, layout.door_width)
                    break

    boundary = np.full(shape, codes.boundary_code("none"), dtype=np.int64)
    boundary[int_wall] = codes.boundary_code("interior_wall")
    boundary[ext_wall] = codes.boundary_code("exterior_wall")
    boundary[door] = codes.boundary_code("interior_door")
    boundary[front] = codes.boundary_code("front_door")
    interior = np.where(envelope, codes.interior_code, codes.exterior_code)
    if flags:
        _logger.debug("render flags: %s", sorted(flags))
    return LayoutMask.from_channels(
        boundary, semantic, instance, interior, codes=codes, flags=flags
    )

