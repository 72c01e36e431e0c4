"""Seeded synthetic traces and the trace file format.

Traces are drawn with :class:`random.Random` (Mersenne Twister MT19937), whose
output for a given integer seed is fixed by the CPython documentation across
versions and platforms.  Each trace gets its own generator seeded from
``(seed, base_addr)`` via a string key, so the trace of one core does not
depend on which other cores exist or on the partition configuration.
"""
from __future__ import annotations

import random
from typing import Iterable, TextIO

from .cache import AccessKind
from .engine import TraceAccess

RNG_NAME = "python-random-MT19937"
DEFAULT_RANGES = (1024, 2048, 4096, 8192, 16384)
DEFAULT_COUNT = 10_000
DEFAULT_WRITE_RATIO = 0.5


def _rng(seed: int, base_addr: int, range_bytes: int) -> random.Random:
    return random.Random(f"llcsim:{seed}:{base_addr:#x}:{range_bytes}")


def generate_trace(seed: int, base_addr: int, range_bytes: int, count: int = DEFAULT_COUNT,
                   write_ratio: float = DEFAULT_WRITE_RATIO, line_size: int = 64) -> list:
    if range_bytes <= 0 or range_bytes % line_size:
        raise ValueError(f"range of {range_bytes} B is not a positive multiple of the {line_size} B line")
    if base_addr % line_size:
        raise ValueError(f"base address {base_addr:#x} is not line-aligned")
    if count < 0:
        raise ValueError("count must be >= 0")
    if not 0.0 <= write_ratio <= 1.0:
        raise ValueError(f"write_ratio {write_ratio} outside [0, 1]")
    rng = _rng(seed, base_addr, range_bytes)
    lines = range_bytes // line_size
    out = []
    for _ in range(count):
        addr = base_addr + rng.randrange(lines) * line_size
        op = AccessKind.WRITE if rng.random() < write_ratio else AccessKind.READ
        out.append(TraceAccess(op, addr))
    return out


def disjoint_ranges(num_cores: int, range_bytes: int, stride: int | None = None) -> list:
    stride = range_bytes if stride is None else stride
    if stride < range_bytes:
        raise ValueError(f"stride {stride} B is smaller than the range {range_bytes} B: ranges would overlap")
    return [k * stride for k in range(num_cores)]


def core_traces(num_cores: int, seed: int, range_bytes: int, count: int = DEFAULT_COUNT,
                write_ratio: float = DEFAULT_WRITE_RATIO, stride: int | None = None,
                line_size: int = 64) -> list:
    """One trace per core over disjoint ranges; identical for every partition layout."""
    stride = stride if stride is not None else max(range_bytes, 1 << 20)
    return [generate_trace(seed, base, range_bytes, count, write_ratio, line_size)
            for base in disjoint_ranges(num_cores, range_bytes, stride)]


def write_trace(trace: Iterable, fh: TextIO, header: str | None = None):
    if header:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
    for op, addr in trace:
        fh.write(f"{op.value} {addr:#x}\n")


def read_trace(fh: TextIO, line_size: int = 64) -> list:
    out = []
    for n, raw in enumerate(fh, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 2:
            raise ValueError(f"line {n}: expected '<R|W|I> <hex address>', got {raw.strip()!r}")
        try:
            op = AccessKind(parts[0].upper())
        except ValueError:
            raise ValueError(f"line {n}: unknown access kind {parts[0]!r}") from None
        try:
            addr = int(parts[1], 16)
        except ValueError:
            raise ValueError(f"line {n}: bad hex address {parts[1]!r}") from None
        if addr % line_size:
            raise ValueError(f"line {n}: address {addr:#x} is not {line_size}-byte aligned")
        out.append(TraceAccess(op, addr))
    return out


def load_trace(path, line_size: int = 64) -> list:
    with open(path) as fh:
        return read_trace(fh, line_size)


def save_trace(trace, path, header: str | None = None):
    with open(path, "w") as fh:
        write_trace(trace, fh, header)
