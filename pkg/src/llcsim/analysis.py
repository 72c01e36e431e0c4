"""Closed-form worst-case latency bounds and per-run bound checking."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .config import Mode, SystemConfig
from .errors import CalibrationError


@dataclass(frozen=True)
class BoundInputs:
    N: int
    n: int
    w: int
    M: int
    m_cua: int
    SW: int = 50

    def __post_init__(self):
        if not 1 <= self.n <= self.N:
            raise ValueError(f"need 1 <= n <= N, got n={self.n}, N={self.N}")
        if self.w < 1:
            raise ValueError(f"w must be >= 1, got {self.w}")
        if self.M < 0 or self.m_cua < 0:
            raise ValueError("capacities must be >= 0")
        if self.SW < 1:
            raise ValueError(f"SW must be >= 1, got {self.SW}")

    @property
    def m(self) -> int:
        return min(self.m_cua, self.M)


def interference_factor(n: int, w: int) -> int:
    """Periods a conflicting set can take to drain past one write-back of the core."""
    if n < 1 or w < 1:
        raise ValueError("n and w must be >= 1")
    return 2 * (n - 1) * w * (n - 1)


def wcl_1stdm_slots(b: BoundInputs) -> int:
    return (b.m + 1) * interference_factor(b.n, b.w) * b.N + 1


def wcl_1stdm(b: BoundInputs) -> int:
    return wcl_1stdm_slots(b) * b.SW


def wcl_sequencer_slots(n: int, N: int) -> int:
    if not 1 <= n <= N:
        raise ValueError(f"need 1 <= n <= N, got n={n}, N={N}")
    return (2 * (n - 1) * n + 1) * N


def wcl_sequencer(n: int, N: int, SW: int = 50) -> int:
    return wcl_sequencer_slots(n, N) * SW


def wcl_private_slots(N: int) -> int:
    if N < 1:
        raise ValueError("N must be >= 1")
    # misaligned arrival, own victim write-back, response
    return 2 * N + 1


def wcl_private(N: int, SW: int = 50) -> int:
    return wcl_private_slots(N) * SW


def bound_slots(mode, N: int, n: int = 1, w: int = 1, M: int = 0, m_cua: int = 0) -> int:
    """Slot bound for one request in a partition of the given mode.

    A partition with a single sharer is bounded like a private one, whatever its
    nominal mode: the lone sharer can only be delayed by its own write-back.
    """
    mode = Mode.parse(mode) if isinstance(mode, str) else mode
    if mode is Mode.PRIVATE or n == 1:
        return wcl_private_slots(N)
    if mode is Mode.SEQUENCED:
        return wcl_sequencer_slots(n, N)
    return wcl_1stdm_slots(BoundInputs(N, n, w, M, m_cua, 1))


def calibrate_slot_width(reported_wcl: int, mode="nss", *, N: int, n: int = 1, w: int = 1,
                         M: int = 0, m_cua: int = 0) -> int:
    slots = bound_slots(mode, N, n, w, M, m_cua)
    if reported_wcl <= 0 or reported_wcl % slots:
        raise CalibrationError(f"{reported_wcl} cycles is not a whole multiple of {slots} slots")
    return reported_wcl // slots


def bound_ratio(m: int, n: int, N: int, w: int) -> float:
    """Best-effort over sequenced bound for the same partition."""
    return wcl_1stdm_slots(BoundInputs(N, n, w, m, m, 1)) / wcl_sequencer_slots(n, N)


def partition_bound(config: SystemConfig, core: int, m_cua: Optional[int] = None) -> int:
    """Bound in cycles for requests of ``core`` under ``config``."""
    p = config.partition_of(core)
    m_cua = config.l2_capacity_lines() if m_cua is None else m_cua
    return bound_slots(p.mode, config.num_cores, p.num_sharers, len(p.ways),
                       p.capacity_lines, m_cua) * config.slot_width


@dataclass
class Witness:
    core: int
    slot: int
    addr: int
    latency: int
    bound: int


@dataclass
class CoreVerdict:
    core: int
    bound: int
    max_latency: int
    requests: int
    passed: bool
    witness: Optional[Witness] = None


@dataclass
class BoundVerdict:
    status: str                    # PASS, FAIL, INCOMPLETE or UNBOUNDED
    cores: list = field(default_factory=list)
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    @property
    def witnesses(self) -> list:
        return [c.witness for c in self.cores if c.witness is not None]

    def to_text(self) -> str:
        if self.detail.startswith(self.status):
            lines = [self.detail]
        else:
            lines = [self.status + (f": {self.detail}" if self.detail else "")]
        for c in self.cores:
            lines.append(f"core {c.core}: max {c.max_latency} / bound {c.bound} cycles over {c.requests} requests "
                         f"{'PASS' if c.passed else 'FAIL'}")
            if c.witness:
                w = c.witness
                lines.append(f"  violation slot={w.slot} addr={w.addr:#x} latency={w.latency} bound={w.bound}")
        return "\n".join(lines) + "\n"


def check_bound(report, config: Optional[SystemConfig] = None, m_cua: Optional[int] = None,
                horizon_periods: Optional[int] = None) -> BoundVerdict:
    config = config or report.config
    sw = config.slot_width
    if not config.is_one_slot:
        if not report.complete:
            periods = horizon_periods or report.slots // config.schedule.period_slots
            return BoundVerdict("INCOMPLETE", detail=f"INCOMPLETE after {periods} periods "
                                f"(cores {report.incomplete_cores} pending)")
        return BoundVerdict("UNBOUNDED", detail="schedule is not one-slot; no analytical bound applies")
    cores = []
    for c in range(config.num_cores):
        bound = partition_bound(config, c, m_cua)
        recs = [r for r in report.records if r.core == c]
        worst = max(recs, key=lambda r: r.latency_slots, default=None)
        mx = worst.latency_slots * sw if worst else 0
        wit = None
        if worst is not None and mx > bound:
            wit = Witness(c, worst.done_slot, worst.addr, mx, bound)
        cores.append(CoreVerdict(c, bound, mx, len(recs), wit is None, wit))
    if any(not c.passed for c in cores):
        return BoundVerdict("FAIL", cores)
    if not report.complete:
        periods = horizon_periods or report.slots // config.schedule.period_slots
        return BoundVerdict("INCOMPLETE", cores, f"INCOMPLETE after {periods} periods "
                            f"(cores {report.incomplete_cores} pending)")
    return BoundVerdict("PASS", cores)
