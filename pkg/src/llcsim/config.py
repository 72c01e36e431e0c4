"""Static system description: cores, caches, the TDM schedule and LLC partitions.

Everything here is immutable once built.  :func:`load_config` reads the TOML
document format described in the README; :func:`paper_eval_config` and
:func:`sharing_config` build the two evaluation setups programmatically.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

from .errors import ConfigError


class Mode(enum.Enum):
    PRIVATE = "p"
    BEST_EFFORT = "nss"
    SEQUENCED = "ss"

    @classmethod
    def parse(cls, text: str) -> "Mode":
        key = str(text).strip().lower()
        aliases = {"p": cls.PRIVATE, "private": cls.PRIVATE,
                   "nss": cls.BEST_EFFORT, "best-effort": cls.BEST_EFFORT,
                   "besteffort": cls.BEST_EFFORT,
                   "ss": cls.SEQUENCED, "sequenced": cls.SEQUENCED}
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError(f"unknown partition mode {text!r}") from None


@dataclass(frozen=True)
class CacheGeometry:
    num_sets: int
    num_ways: int
    line_size: int = 64

    def __post_init__(self):
        if self.num_sets < 1:
            raise ConfigError(f"num_sets must be >= 1, got {self.num_sets}")
        if self.num_ways < 1:
            raise ConfigError(f"num_ways must be >= 1, got {self.num_ways}")
        if self.line_size < 1 or self.line_size & (self.line_size - 1):
            raise ConfigError(f"line_size must be a power of two, got {self.line_size}")

    @property
    def capacity_lines(self) -> int:
        return self.num_sets * self.num_ways


@dataclass(frozen=True)
class TdmSchedule:
    slot_order: tuple

    def __post_init__(self):
        object.__setattr__(self, "slot_order", tuple(int(c) for c in self.slot_order))
        if not self.slot_order:
            raise ConfigError("schedule must contain at least one slot")

    @property
    def period_slots(self) -> int:
        return len(self.slot_order)

    def owner(self, slot: int) -> int:
        return self.slot_order[slot % len(self.slot_order)]

    def position(self, core: int) -> int:
        return self.slot_order.index(core)

    def next_owned_slot(self, core: int, slot: int) -> int:
        """First slot >= ``slot`` owned by ``core``."""
        period = len(self.slot_order)
        for k in range(period):
            if self.slot_order[(slot + k) % period] == core:
                return slot + k
        raise ConfigError(f"core {core} owns no slot in the schedule")


def validate_one_slot(schedule: TdmSchedule, num_cores: int) -> bool:
    """True iff every core in ``[0, num_cores)`` owns exactly one slot per period.

    Unknown core ids are a configuration error rather than a ``False``.
    """
    order = schedule.slot_order
    unknown = [c for c in order if not 0 <= c < num_cores]
    if unknown:
        raise ConfigError(f"schedule references unknown cores {sorted(set(unknown))}")
    return len(order) == num_cores and sorted(order) == list(range(num_cores))


def distance(schedule: TdmSchedule, ci: int, cj: int) -> int:
    """Slots from the start of ``ci``'s slot to the start of ``cj``'s next slot.

    Only defined for one-slot schedules; ``distance(s, c, c)`` is one period.
    """
    n = schedule.period_slots
    if not validate_one_slot(schedule, n):
        raise ConfigError("distance is only defined for one-slot (1S-TDM) schedules")
    for c in (ci, cj):
        if not 0 <= c < n:
            raise ConfigError(f"unknown core {c}")
    d = (schedule.position(cj) - schedule.position(ci)) % n
    return d or n


@dataclass(frozen=True)
class PartitionSpec:
    id: int
    set_start: int
    set_count: int
    ways: tuple
    sharers: frozenset
    mode: Mode

    def __post_init__(self):
        object.__setattr__(self, "ways", tuple(sorted(set(int(w) for w in self.ways))))
        object.__setattr__(self, "sharers", frozenset(int(c) for c in self.sharers))
        if self.set_count < 1:
            raise ConfigError(f"partition {self.id}: empty set range")
        if self.set_start < 0:
            raise ConfigError(f"partition {self.id}: negative set index")
        if not self.ways:
            raise ConfigError(f"partition {self.id}: way mask is empty")
        if not self.sharers:
            raise ConfigError(f"partition {self.id}: no sharers")
        if self.mode is Mode.PRIVATE and len(self.sharers) != 1:
            raise ConfigError(f"partition {self.id}: private partitions take exactly one sharer")

    @property
    def set_range(self) -> range:
        return range(self.set_start, self.set_start + self.set_count)

    @property
    def capacity_lines(self) -> int:
        return self.set_count * len(self.ways)

    @property
    def num_sharers(self) -> int:
        return len(self.sharers)


@dataclass(frozen=True)
class SystemConfig:
    num_cores: int
    schedule: TdmSchedule
    partitions: tuple
    slot_width: int = 50
    line_size: int = 64
    l1i_geom: CacheGeometry = field(default_factory=lambda: CacheGeometry(8, 2))
    l1d_geom: CacheGeometry = field(default_factory=lambda: CacheGeometry(8, 2))
    l2_geom: CacheGeometry = field(default_factory=lambda: CacheGeometry(16, 4))
    llc_geom: CacheGeometry = field(default_factory=lambda: CacheGeometry(32, 16))
    pwb_capacity: int | None = None
    ss_evict_while_queued: bool = True

    def __post_init__(self):
        object.__setattr__(self, "partitions", tuple(self.partitions))
        if self.pwb_capacity is None:
            object.__setattr__(self, "pwb_capacity", self.num_cores)
        self.validate()

    def validate(self):
        n = self.num_cores
        if n < 1:
            raise ConfigError(f"cores must be >= 1, got {n}")
        if self.slot_width < 1:
            raise ConfigError(f"slot_width must be >= 1, got {self.slot_width}")
        if self.line_size < 1 or self.line_size & (self.line_size - 1):
            raise ConfigError(f"line_size must be a power of two, got {self.line_size}")
        if self.pwb_capacity < 1:
            raise ConfigError(f"pwb_capacity must be >= 1, got {self.pwb_capacity}")
        for name in ("l1i_geom", "l1d_geom", "l2_geom", "llc_geom"):
            if getattr(self, name).line_size != self.line_size:
                raise ConfigError(f"{name}: line size differs from system line_size")
        bad = [c for c in self.schedule.slot_order if not 0 <= c < n]
        if bad:
            raise ConfigError(f"schedule: unknown cores {sorted(set(bad))}")
        missing = set(range(n)) - set(self.schedule.slot_order)
        if missing:
            raise ConfigError(f"schedule: cores {sorted(missing)} own no slot")
        owner = {}
        cells = {}
        for p in self.partitions:
            if p.set_start + p.set_count > self.llc_geom.num_sets:
                raise ConfigError(f"partitions[{p.id}].sets: beyond the LLC's {self.llc_geom.num_sets} sets")
            if p.ways[-1] >= self.llc_geom.num_ways:
                raise ConfigError(f"partitions[{p.id}].ways: beyond the LLC's {self.llc_geom.num_ways} ways")
            if len(p.sharers) > n:
                raise ConfigError(f"partitions[{p.id}].sharers: more sharers than cores")
            for c in p.sharers:
                if not 0 <= c < n:
                    raise ConfigError(f"partitions[{p.id}].sharers: unknown core {c}")
                if c in owner:
                    raise ConfigError(f"partitions[{p.id}].sharers: core {c} already belongs to partition {owner[c]}")
                owner[c] = p.id
            for s in p.set_range:
                for w in p.ways:
                    if (s, w) in cells:
                        raise ConfigError(f"partitions[{p.id}]: overlaps partition {cells[(s, w)]} at set {s} way {w}")
                    cells[(s, w)] = p.id
        unassigned = set(range(n)) - set(owner)
        if unassigned:
            raise ConfigError(f"partitions: cores {sorted(unassigned)} belong to no partition")

    @property
    def is_one_slot(self) -> bool:
        return validate_one_slot(self.schedule, self.num_cores)

    def partition_of(self, core: int) -> PartitionSpec:
        for p in self.partitions:
            if core in p.sharers:
                return p
        raise ConfigError(f"core {core} belongs to no partition")

    def l2_capacity_lines(self) -> int:
        return self.l2_geom.capacity_lines


# ---------------------------------------------------------------------------
# Document loading


def _parse_range(value, what: str) -> list:
    """Accept ``"a..b"`` (inclusive), a list of ints, or a single int."""
    if isinstance(value, int):
        return [value]
    if isinstance(value, list):
        return [int(v) for v in value]
    if isinstance(value, str):
        text = value.strip()
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo, 0), int(hi, 0)
            if hi < lo:
                raise ConfigError(f"{what}: empty range {value!r}")
            return list(range(lo, hi + 1))
        return [int(text, 0)]
    raise ConfigError(f"{what}: cannot parse {value!r}")


def _parse_ways(value, what: str) -> list:
    # a bare integer is a bitmask; strings and lists are way indices
    if isinstance(value, int):
        if value <= 0:
            raise ConfigError(f"{what}: way mask is empty")
        return [i for i in range(value.bit_length()) if value >> i & 1]
    if isinstance(value, str) and value.strip().lower().startswith("0x"):
        return _parse_ways(int(value, 16), what)
    return _parse_range(value, what)


def _geometry(doc: dict, key: str, line_size: int, default: CacheGeometry) -> CacheGeometry:
    if key not in doc:
        return CacheGeometry(default.num_sets, default.num_ways, line_size)
    g = doc[key]
    try:
        return CacheGeometry(int(g["sets"]), int(g["ways"]), line_size)
    except KeyError as exc:
        raise ConfigError(f"{key}: missing field {exc.args[0]!r}") from None
    except ConfigError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def config_from_dict(doc: dict) -> SystemConfig:
    try:
        cores = int(doc["cores"])
    except KeyError:
        raise ConfigError("missing required field 'cores'") from None
    line_size = int(doc.get("line_size", 64))
    schedule = TdmSchedule(doc.get("schedule", list(range(cores))))
    parts = []
    for i, p in enumerate(doc.get("partitions", [])):
        where = f"partitions[{i}]"
        try:
            sets = _parse_range(p["sets"], where + ".sets")
            ways = _parse_ways(p["ways"], where + ".ways")
            sharers = [int(c) for c in p["sharers"]]
            mode = Mode.parse(p.get("mode", "nss"))
        except KeyError as exc:
            raise ConfigError(f"{where}: missing field {exc.args[0]!r}") from None
        if sets != list(range(sets[0], sets[0] + len(sets))):
            raise ConfigError(f"{where}.sets: set range must be contiguous")
        parts.append(PartitionSpec(i, sets[0], len(sets), tuple(ways), frozenset(sharers), mode))
    base = SystemConfig.__dataclass_fields__
    return SystemConfig(
        num_cores=cores,
        schedule=schedule,
        partitions=tuple(parts),
        slot_width=int(doc.get("slot_width", 50)),
        line_size=line_size,
        l1i_geom=_geometry(doc, "l1i", line_size, base["l1i_geom"].default_factory()),
        l1d_geom=_geometry(doc, "l1d", line_size, base["l1d_geom"].default_factory()),
        l2_geom=_geometry(doc, "l2", line_size, base["l2_geom"].default_factory()),
        llc_geom=_geometry(doc, "llc", line_size, base["llc_geom"].default_factory()),
        pwb_capacity=doc.get("pwb_capacity"),
        ss_evict_while_queued=bool(doc.get("ss_evict_while_queued", True)),
    )


def load_config(source) -> SystemConfig:
    """Parse a TOML configuration document (text or path-like) and validate it."""
    text = source
    if not isinstance(source, str) or ("\n" not in source and os.path.exists(source)):
        with open(source, "rb") as fh:
            text = fh.read().decode()
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed configuration document: {exc}") from None
    return config_from_dict(doc)


# ---------------------------------------------------------------------------
# Evaluation presets


def one_slot_schedule(num_cores: int) -> TdmSchedule:
    return TdmSchedule(tuple(range(num_cores)))


def paper_eval_config(mode, num_cores: int = 4, slot_width: int = 50,
                      llc_sets_per_partition: int = 1) -> SystemConfig:
    """Four-core evaluation machine: 4-way/16-set L2, 16-way/32-set LLC, 64 B lines.

    Shared modes put every core into one partition of ``llc_sets_per_partition``
    sets; private mode gives each core its own partition of that size.
    """
    mode = Mode.parse(mode) if isinstance(mode, str) else mode
    s = llc_sets_per_partition
    ways = tuple(range(16))
    if mode is Mode.PRIVATE:
        parts = [PartitionSpec(c, c * s, s, ways, frozenset([c]), mode) for c in range(num_cores)]
    else:
        parts = [PartitionSpec(0, 0, s, ways, frozenset(range(num_cores)), mode)]
    return SystemConfig(num_cores=num_cores, schedule=one_slot_schedule(num_cores),
                        partitions=tuple(parts), slot_width=slot_width)


def sharing_config(mode, num_cores: int, total_bytes: int, ways: int = 16,
                   line_size: int = 64, slot_width: int = 50) -> SystemConfig:
    """Fixed total LLC capacity, shared by all cores (SS/NSS) or split by sets (P)."""
    mode = Mode.parse(mode) if isinstance(mode, str) else mode
    lines = total_bytes // line_size
    if lines % ways:
        raise ConfigError(f"{total_bytes} B is not a whole number of {ways}-way sets")
    sets = lines // ways
    way_ids = tuple(range(ways))
    if mode is Mode.PRIVATE:
        if sets % num_cores:
            raise ConfigError(f"{sets} sets cannot be split evenly over {num_cores} cores")
        per = sets // num_cores
        parts = [PartitionSpec(c, c * per, per, way_ids, frozenset([c]), mode) for c in range(num_cores)]
    else:
        parts = [PartitionSpec(0, 0, sets, way_ids, frozenset(range(num_cores)), mode)]
    llc_sets = max(32, sets)
    return SystemConfig(num_cores=num_cores, schedule=one_slot_schedule(num_cores),
                        partitions=tuple(parts), slot_width=slot_width, line_size=line_size,
                        l1i_geom=CacheGeometry(8, 2, line_size), l1d_geom=CacheGeometry(8, 2, line_size),
                        l2_geom=CacheGeometry(16, 4, line_size),
                        llc_geom=CacheGeometry(llc_sets, max(16, ways), line_size))


def single_set_config(num_cores: int, sharers: Iterable, ways: int, mode,
                      slot_width: int = 1, schedule: Sequence | None = None,
                      l2_sets: int = 16, l2_ways: int = 4) -> SystemConfig:
    """A tiny machine whose sharers contend for one LLC set (scenarios, oracle replays).

    Cores outside ``sharers`` get one-set private partitions of their own.
    """
    mode = Mode.parse(mode) if isinstance(mode, str) else mode
    sharers = frozenset(sharers)
    parts = [PartitionSpec(0, 0, 1, tuple(range(ways)), sharers, mode)]
    nxt = 1
    for c in range(num_cores):
        if c not in sharers:
            parts.append(PartitionSpec(nxt, nxt, 1, tuple(range(ways)), frozenset([c]), Mode.PRIVATE))
            nxt += 1
    sched = TdmSchedule(tuple(schedule) if schedule is not None else tuple(range(num_cores)))
    return SystemConfig(num_cores=num_cores, schedule=sched, partitions=tuple(parts),
                        slot_width=slot_width,
                        l1i_geom=CacheGeometry(1, 1), l1d_geom=CacheGeometry(1, 1),
                        l2_geom=CacheGeometry(l2_sets, l2_ways),
                        llc_geom=CacheGeometry(max(nxt, 2), ways))
