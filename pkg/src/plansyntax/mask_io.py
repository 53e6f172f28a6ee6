"""
mask_io.py

This module reads and writes floor-plan layouts stored as RPLAN-style 4-channel PNG masks and turns them into the binary grids that the rest of plansyntax works on.

A layout mask has four 8-bit channels in a fixed order: boundary/door cues, semantic room-type labels, room-instance ids (0 means no room) and interior/exterior flags. They map onto the R, G, B and A bands of an RGBA image.

The meaning of every pixel value comes from a ChannelCodeTable. The default table ships as ``data/channel_codes.yaml`` and can be replaced per run, so no magic pixel values appear anywhere else in the package.

Three derived objects are produced here:

1. LayoutMask - the four validated channels plus the modal semantic label of every instance and a set of quality flags (mixed labels, unknown semantic codes, snapped pixels).

2. DerivedMasks - the interior, wall and door grids. A pixel that is both wall and door counts as door.

3. RoomCore - the walkable core of each room instance, i.e. its pixels minus wall and door pixels.

All functions are pure. Identical inputs give bit-identical outputs.
"""

import io
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np
import yaml
from PIL import Image, UnidentifiedImageError

from .errors import (
    ChannelCountError,
    ConfigError,
    DecodeError,
    InvariantError,
    UnknownCodeError,
)

_logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"

BOUNDARY_ROLES = (
    "none",
    "exterior_wall",
    "front_door",
    "interior_wall",
    "interior_door",
)
WALL_ROLES = frozenset({"exterior_wall", "interior_wall"})
DOOR_ROLES = frozenset({"front_door", "interior_door"})
STRUCTURAL_ROLES = frozenset({"external"}) | WALL_ROLES | DOOR_ROLES
INTERIOR_ROLES = frozenset({"interior", "exterior"})


def _int_keyed(section: Any, name: str) -> Dict[int, str]:
    if not isinstance(section, Mapping):
        raise ConfigError(f"channel-code section {name!r} must be a mapping")
    result: Dict[int, str] = {}
    for key, value in section.items():
        try:
            code = int(key)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"{name}: code {key!r} is not an integer") from err
        if not 0 <= code <= 255:
            raise ConfigError(f"{name}: code {code} is outside 0..255")
        result[code] = str(value)
    return result


# The `ChannelCodeTable` class maps the 8-bit values of each channel to their roles.
@dataclass(frozen=True)
class ChannelCodeTable:
    boundary: Mapping[int, str]
    semantic: Mapping[int, str]
    structural: Mapping[int, str]
    interior: Mapping[int, str]
    version: int = 1

    def __post_init__(self) -> None:
        for code, role in self.boundary.items():
            if role not in BOUNDARY_ROLES:
                raise ConfigError(f"boundary code {code}: unknown role {role!r}")
        for code, role in self.structural.items():
            if role not in STRUCTURAL_ROLES:
                raise ConfigError(f"structural code {code}: unknown role {role!r}")
            if code not in self.semantic:
                raise ConfigError(f"structural code {code} is not a semantic code")
        roles = sorted(self.interior.values())
        if roles != ["exterior", "interior"]:
            raise ConfigError("interior section needs exactly one interior and one exterior code")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ChannelCodeTable":
        """Build a table from the parsed YAML layout of ``channel_codes.yaml``."""
        return cls(
            boundary=_int_keyed(data.get("boundary", {}), "boundary"),
            semantic=_int_keyed(data.get("semantic", {}), "semantic"),
            structural=_int_keyed(data.get("structural", {}), "structural"),
            interior=_int_keyed(data.get("interior", {}), "interior"),
            version=int(data.get("version", 1)),
        )

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "ChannelCodeTable":
        with open(path, encoding="utf-8") as fp:
            data = yaml.safe_load(fp) or {}
        return cls.from_mapping(data)

    @classmethod
    def default(cls) -> "ChannelCodeTable":
        return _default_table()

    def boundary_code(self, role: str) -> int:
        """Smallest boundary code carrying ``role``.

        Examples:
            >>> ChannelCodeTable.default().boundary_code("exterior_wall")
            127
        """
        codes = sorted(c for c, r in self.boundary.items() if r == role)
        if not codes:
            raise ConfigError(f"no boundary code for role {role!r}")
        return codes[0]

    def semantic_code(self, role: str) -> int:
        codes = sorted(c for c, r in self.structural.items() if r == role)
        if not codes:
            raise ConfigError(f"no structural semantic code for role {role!r}")
        return codes[0]

    @property
    def interior_code(self) -> int:
        return next(c for c, r in self.interior.items() if r == "interior")

    @property
    def exterior_code(self) -> int:
        return next(c for c, r in self.interior.items() if r == "exterior")

    @property
    def room_types(self) -> FrozenSet[int]:
        return frozenset(self.semantic) - frozenset(self.structural)

    @property
    def ignore_types(self) -> FrozenSet[int]:
        """Semantic codes that describe structure, not rooms."""
        return frozenset(self.structural)

    def boundary_roles(self, values: np.ndarray) -> np.ndarray:
        """Role index (into BOUNDARY_ROLES) per pixel, -1 for codes missing from the table."""
        lut = np.full(256, -1, dtype=np.int8)
        for code, role in self.boundary.items():
            lut[code] = BOUNDARY_ROLES.index(role)
        return lut[values]

    def structural_codes(self, roles: Iterable[str]) -> List[int]:
        wanted = set(roles)
        return sorted(c for c, r in self.structural.items() if r in wanted)


@lru_cache(maxsize=None)
def _default_table() -> ChannelCodeTable:
    return ChannelCodeTable.from_yaml(DATA_DIR / "channel_codes.yaml")


@dataclass(frozen=True, eq=False)
class LayoutMask:
    """Decoded 4-channel raster layout.

    Build it with :meth:`from_channels`, which enforces the invariants.
    """

    ch_boundary: np.ndarray
    ch_semantic: np.ndarray
    ch_instance: np.ndarray
    ch_interior: np.ndarray
    instance_labels: Mapping[int, int] = field(default_factory=dict)
    flags: FrozenSet[str] = frozenset()

    @property
    def height(self) -> int:
        return int(self.ch_boundary.shape[0])

    @property
    def width(self) -> int:
        return int(self.ch_boundary.shape[1])

    @property
    def instance_ids(self) -> List[int]:
        return sorted(self.instance_labels)

    def stack(self) -> np.ndarray:
        """The channels as an H x W x 4 uint8 array in channel order."""
        return np.dstack(
            [self.ch_boundary, self.ch_semantic, self.ch_instance, self.ch_interior]
        )

    def equals(self, other: "LayoutMask") -> bool:
        return np.array_equal(self.stack(), other.stack())

    def instance_pixel_counts(self) -> Dict[int, int]:
        counts = np.bincount(self.ch_instance.ravel(), minlength=256)
        return {iid: int(counts[iid]) for iid in self.instance_ids}

    @classmethod
    def from_channels(
        cls,
        boundary: np.ndarray,
        semantic: np.ndarray,
        instance: np.ndarray,
        interior: np.ndarray,
        codes: Optional[ChannelCodeTable] = None,
        flags: Iterable[str] = (),
    ) -> "LayoutMask":
        """
        The function validates four channel grids and wraps them into a LayoutMask.

        :param boundary: boundary/door cue codes
        :type boundary: np.ndarray
        :param semantic: room-type labels
        :type semantic: np.ndarray
        :param instance: room-instance ids, 0 for no room
        :type instance: np.ndarray
        :param interior: interior/exterior flags
        :type interior: np.ndarray
        :param codes: channel-code table, the shipped default when omitted
        :type codes: Optional[ChannelCodeTable]
        :param flags: quality flags already raised by the caller
        :type flags: Iterable[str]
        :return: the validated mask

        Examples:
            >>> import numpy as np
            >>> inst = np.zeros((8, 8), dtype=np.uint8)
            >>> inst[2:6, 2:6] = 1
            >>> m = LayoutMask.from_channels(
            ...     np.zeros((8, 8)), np.full((8, 8), 13) * (inst == 0), inst, 255 * (inst > 0)
            ... )
            >>> m.instance_ids, int((m.ch_interior == 255).sum())
            ([1], 16)
        """
        codes = codes or ChannelCodeTable.default()
        chans = [
            np.ascontiguousarray(c, dtype=np.uint8)
            for c in (boundary, semantic, instance, interior)
        ]
        shape = chans[0].shape
        if len(shape) != 2 or any(c.shape != shape for c in chans):
            raise InvariantError(
                f"channel shapes differ: {[c.shape for c in chans]}"
            )
        ch_boundary, ch_semantic, ch_instance, ch_interior = chans
        outside = (ch_instance > 0) & (ch_interior != codes.interior_code)
        if outside.any():
            raise InvariantError(
                f"{int(outside.sum())} instance pixels lie outside the interior"
            )

        all_flags = set(flags)
        labels: Dict[int, int] = {}
        ids = np.unique(ch_instance)
        for iid in ids[ids > 0].tolist():
            counts = np.bincount(ch_semantic[ch_instance == iid], minlength=256)
            labels[iid] = int(np.argmax(counts))
            if np.count_nonzero(counts) > 1:
                all_flags.add("mixed_label_instance")
                _logger.debug("instance %d carries several semantic labels", iid)

        unknown = set(np.unique(ch_semantic).tolist()) - set(codes.semantic)
        if unknown:
            all_flags.add("unknown_semantic_code")
            _logger.debug("unknown semantic codes preserved: %s", sorted(unknown))

        return cls(
            ch_boundary=ch_boundary,
            ch_semantic=ch_semantic,
            ch_instance=ch_instance,
            ch_interior=ch_interior,
            instance_labels=labels,
            flags=frozenset(all_flags),
        )


@dataclass(frozen=True, eq=False)
class DerivedMasks:
    interior: np.ndarray
    wall: np.ndarray
    door: np.ndarray
    unknown_pixels: int = 0


@dataclass(frozen=True, eq=False)
class RoomCore:
    instance_id: int
    room_type: int
    core: np.ndarray

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.core))

    @property
    def empty(self) -> bool:
        return self.size == 0


def _snap(channel: np.ndarray, table_codes: Iterable[int]) -> np.ndarray:
    codes = np.array(sorted(table_codes), dtype=np.int16)
    # argmin keeps the lower code on ties
    idx = np.abs(channel[..., None].astype(np.int16) - codes).argmin(axis=-1)
    return codes[idx].astype(np.uint8)


def parse_layout(
    data: bytes, codes: Optional[ChannelCodeTable] = None, snap: bool = False
) -> LayoutMask:
    """
    The function decodes an encoded 4-channel image into a validated LayoutMask.

    :param data: encoded image bytes (PNG)
    :type data: bytes
    :param codes: channel-code table, the shipped default when omitted
    :type codes: Optional[ChannelCodeTable]
    :param snap: snap boundary and interior values to the nearest table code
        (anti-aliased sources); the mask is flagged when any pixel moves
    :type snap: bool
    :return: the decoded mask
    :raises DecodeError: the bytes are not a decodable image
    :raises ChannelCountError: the image does not have four channels
    :raises InvariantError: an instance pixel lies outside the interior
    """
    codes = codes or ChannelCodeTable.default()
    try:
        with Image.open(io.BytesIO(data)) as img:
            img.load()
            arr = np.array(img)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as err:
        raise DecodeError(f"cannot decode layout image: {err}") from err

    n_channels = 1 if arr.ndim == 2 else int(arr.shape[-1])
    if arr.ndim != 3 or n_channels != 4:
        raise ChannelCountError(f"expected 4 channels, got {n_channels}")
    if arr.dtype != np.uint8:
        raise DecodeError(f"expected 8-bit channels, got {arr.dtype}")

    boundary, semantic, instance, interior = (arr[..., i] for i in range(4))
    flags = []
    if snap:
        snapped_b = _snap(boundary, codes.boundary)
        snapped_i = _snap(interior, codes.interior)
        moved = int(np.count_nonzero(snapped_b != boundary)) + int(
            np.count_nonzero(snapped_i != interior)
        )
        if moved:
            flags.append("snapped_pixels")
            _logger.debug("snapped %d pixels to table codes", moved)
        boundary, interior = snapped_b, snapped_i
    return LayoutMask.from_channels(
        boundary, semantic, instance, interior, codes=codes, flags=flags
    )


def render_png(m: LayoutMask) -> bytes:
    """Encode a LayoutMask as an RGBA PNG (inverse of :func:`parse_layout`)."""
    buf = io.BytesIO()
    Image.fromarray(m.stack()).save(buf, format="PNG")
    return buf.getvalue()


def derive_masks(
    m: LayoutMask, codes: Optional[ChannelCodeTable] = None, strict: bool = False
) -> DerivedMasks:
    """
    The function derives the interior, wall and door grids of a layout.

    Walls and doors come from the boundary channel roles and from the
    structural semantic labels. Door pixels win over wall pixels.

    :param m: the layout
    :type m: LayoutMask
    :param codes: channel-code table, the shipped default when omitted
    :type codes: Optional[ChannelCodeTable]
    :param strict: raise on boundary values missing from the table instead of
        treating them as "none"
    :type strict: bool
    :return: the derived grids
    :raises UnknownCodeError: strict mode only
    """
    codes = codes or ChannelCodeTable.default()
    roles = codes.boundary_roles(m.ch_boundary)
    unknown = roles < 0
    n_unknown = int(np.count_nonzero(unknown))
    if n_unknown:
        values = sorted(np.unique(m.ch_boundary[unknown]).tolist())
        if strict:
            raise UnknownCodeError(f"boundary values not in the code table: {values}")
        _logger.debug("%d pixels with unknown boundary values %s", n_unknown, values)

    wall_idx = [BOUNDARY_ROLES.index(r) for r in sorted(WALL_ROLES)]
    door_idx = [BOUNDARY_ROLES.index(r) for r in sorted(DOOR_ROLES)]
    wall = np.isin(roles, wall_idx) | np.isin(
        m.ch_semantic, codes.structural_codes(WALL_ROLES)
    )
    door = np.isin(roles, door_idx) | np.isin(
        m.ch_semantic, codes.structural_codes(DOOR_ROLES)
    )
    wall &= ~door
    interior = m.ch_interior == codes.interior_code
    return DerivedMasks(
        interior=interior, wall=wall, door=door, unknown_pixels=n_unknown
    )


def room_cores(m: LayoutMask, d: DerivedMasks) -> List[RoomCore]:
    """
    One walkable core per room instance, sorted by instance id.

    Examples:
        >>> import numpy as np
        >>> inst = np.zeros((6, 6), dtype=np.uint8)
        >>> inst[1:5, 1:5] = 1
        >>> m = LayoutMask.from_channels(np.zeros((6, 6)), 13 * (inst == 0), inst, 255 * inst)
        >>> wall = np.zeros((6, 6), dtype=bool)
        >>> wall[1, 1:5] = True
        >>> d = DerivedMasks(inst > 0, wall, np.zeros((6, 6), dtype=bool))
        >>> [c.size for c in room_cores(m, d)]
        [12]
    """
    if d.wall.shape != m.ch_instance.shape or d.door.shape != m.ch_instance.shape:
        raise InvariantError("derived masks do not match the layout dimensions")
    walkable = ~(d.wall | d.door)
    cores = []
    for iid in m.instance_ids:
        core = (m.ch_instance == iid) & walkable
        rc = RoomCore(instance_id=iid, room_type=m.instance_labels[iid], core=core)
        if rc.empty:
            _logger.debug("instance %d has an empty walkable core", iid)
        cores.append(rc)
    return cores


def load_mask_dir(path: Union[str, Path]) -> Iterator[Tuple[str, bytes]]:
    """Yield ``(plan_id, png_bytes)`` for every ``*.png`` in ``path``, sorted by name."""
    for png in sorted(Path(path).glob("*.png")):
        yield png.stem, png.read_bytes()
