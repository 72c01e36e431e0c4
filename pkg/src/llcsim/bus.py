"""The TDM bus between the L2 controllers and the LLC."""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .config import TdmSchedule
from .errors import ProtocolError, PwbOverflow


class TxKind(enum.Enum):
    REQUEST = "REQ"
    WRITEBACK = "WB"
    RESPONSE = "RESP"


class BusTransaction(NamedTuple):
    kind: TxKind
    core: int
    addr: int
    slot: int


def slot_owner(schedule: TdmSchedule, slot: int) -> int:
    return schedule.slot_order[slot % len(schedule.slot_order)]


@dataclass
class PendingRequest:
    addr: int
    kind: object          # cache.AccessKind
    entry_slot: int
    issue_slot: int       # first owned slot at or after entry


@dataclass
class PendingBuffers:
    """PRB (one request) and PWB (FIFO of write-backs) of one L2 controller.

    ``rr_last`` remembers which class went on the bus last; when both classes
    are pending the other one is served.  It starts at ``TxKind.WRITEBACK`` so a
    lone core's first conflict is resolved request-first.
    """

    core: int
    capacity: int
    prb: Optional[PendingRequest] = None
    pwb: deque = field(default_factory=deque)
    rr_last: TxKind = TxKind.WRITEBACK

    def put_request(self, req: PendingRequest):
        if self.prb is not None:
            raise ProtocolError(f"core {self.core} already has an outstanding request", core=self.core)
        self.prb = req


def enqueue_writeback(bufs: PendingBuffers, addr: int, dirty: bool = False, slot: Optional[int] = None):
    if len(bufs.pwb) >= bufs.capacity:
        raise PwbOverflow(f"core {bufs.core}: PWB full ({bufs.capacity} entries) enqueuing {addr:#x}",
                          slot=slot, core=bufs.core)
    bufs.pwb.append((addr, dirty))


def arbitrate(bufs: PendingBuffers, slot: int = 0) -> Optional[BusTransaction]:
    """Pick what the owner sends at the start of its slot.

    The chosen class is recorded in ``rr_last`` whenever something is sent, so
    a core holding both a request and write-backs alternates between them.
    The write-back is *not* dequeued here; the caller pops it once applied.
    """
    has_req = bufs.prb is not None
    has_wb = bool(bufs.pwb)
    if has_req and has_wb:
        kind = TxKind.REQUEST if bufs.rr_last is TxKind.WRITEBACK else TxKind.WRITEBACK
    elif has_req:
        kind = TxKind.REQUEST
    elif has_wb:
        kind = TxKind.WRITEBACK
    else:
        return None
    bufs.rr_last = kind
    addr = bufs.prb.addr if kind is TxKind.REQUEST else bufs.pwb[0][0]
    return BusTransaction(kind, bufs.core, addr, slot)
