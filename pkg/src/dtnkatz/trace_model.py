"""Contact-trace data model: node registry, contact records, windowing and the
snapshot tensor of per-period adjacency matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

# Largest time value (seconds) that still has integer precision in a float64.
MAX_TIME = float(2**53)


class NodeRegistry:
    """Bijective map between external node ids and dense indices ``0..N-1``.

    Indices are handed out in first-appearance order.
    """

    def __init__(self, ids: Iterable[Hashable] = ()):
        self._ids: list[Hashable] = []
        self._index: dict[Hashable, int] = {}
        for ext in ids:
            self.add(ext)

    def add(self, ext: Hashable) -> int:
        idx = self._index.get(ext)
        if idx is None:
            idx = len(self._ids)
            self._index[ext] = idx
            self._ids.append(ext)
        return idx

    def index(self, ext: Hashable) -> int:
        return self._index[ext]

    def external(self, idx: int) -> Hashable:
        return self._ids[idx]

    @property
    def ids(self) -> tuple:
        return tuple(self._ids)

    @property
    def count(self) -> int:
        return len(self._ids)

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, ext: object) -> bool:
        return ext in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, NodeRegistry) and self._ids == other._ids

    def __repr__(self) -> str:
        return f"NodeRegistry({self._ids!r})"


def register_nodes(records: Iterable[Sequence]) -> NodeRegistry:
    """Build a registry from raw records whose first two fields are node ids."""
    reg = NodeRegistry()
    for rec in records:
        reg.add(rec[0])
        reg.add(rec[1])
    return reg


@dataclass(frozen=True, order=True)
class ContactEvent:
    """Undirected contact between nodes ``a < b`` over ``[start, end)`` seconds."""

    a: int
    b: int
    start: float
    end: float

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError(f"self-contact on node {self.a}")
        if self.a > self.b:
            raise ValueError("ContactEvent must be canonical (a < b); use ContactEvent.make")
        if not self.start <= self.end:
            raise ValueError(f"contact start {self.start} > end {self.end}")

    @classmethod
    def make(cls, a: int, b: int, start: float, end: float) -> "ContactEvent":
        if a > b:
            a, b = b, a
        return cls(a, b, start, end)


@dataclass(frozen=True, order=True)
class LocationVisit:
    node: int
    location: int
    start: float
    end: float

    def __post_init__(self):
        if not self.start <= self.end:
            raise ValueError(f"visit start {self.start} > end {self.end}")


@dataclass(frozen=True)
class WindowConfig:
    """``slice_count`` consecutive slices of ``slice_duration`` seconds from ``origin``."""

    origin: float
    slice_duration: float
    slice_count: int

    def __post_init__(self):
        if not self.slice_duration > 0:
            raise ValueError("slice_duration must be > 0")
        if self.slice_count < 1:
            raise ValueError("slice_count must be >= 1")
        # room for the T+1 benchmark slice as well
        if not math.isfinite(self.origin) or self.end + self.slice_duration > MAX_TIME:
            raise OverflowError("window exceeds the representable time domain")

    @property
    def end(self) -> float:
        return self.origin + self.slice_count * self.slice_duration

    def bounds(self, t: int) -> tuple[float, float]:
        """Half-open interval of slice ``t`` (1-based)."""
        d = self.slice_duration
        return self.origin + (t - 1) * d, self.origin + t * d

    def next_window(self) -> "WindowConfig":
        """Single-slice window right after this one (the T+1 period)."""
        return WindowConfig(self.end, self.slice_duration, 1)


@dataclass(frozen=True, eq=False)
class SnapshotTensor:
    """Stack of binary symmetric adjacency slices, shape ``(T, N, N)``.

    ``slices[t - 1]`` is the slice for period ``t``.
    """

    n: int
    config: WindowConfig
    slices: np.ndarray = field(repr=False)

    def __post_init__(self):
        z = self.slices
        if z.shape != (self.config.slice_count, self.n, self.n):
            raise ValueError(f"slices shape {z.shape} does not match T={self.config.slice_count}, N={self.n}")
        z.setflags(write=False)

    @property
    def slice_count(self) -> int:
        return self.config.slice_count

    def support(self) -> np.ndarray:
        """Pairs linked in at least one slice."""
        return self.slices.any(axis=0)


def _first_slice(start: float, cfg: WindowConfig) -> int:
    """0-based index of the slice whose half-open interval contains ``start``."""
    k = int((start - cfg.origin) // cfg.slice_duration)
    # float division can land one slice off near boundaries
    while k > 0 and cfg.bounds(k)[1] > start:
        k -= 1
    while cfg.bounds(k + 1)[1] <= start:
        k += 1
    return k


def _slice_range(start: float, end: float, cfg: WindowConfig) -> tuple[int, int]:
    """0-based slice indices ``[lo, hi)`` overlapped by contact ``[start, end)``."""
    o, T = cfg.origin, cfg.slice_count
    if start == end:
        if not o <= start < cfg.end:
            return 0, 0
        k = min(_first_slice(start, cfg), T - 1)
        return k, k + 1
    if end <= o or start >= cfg.end:
        return 0, 0
    lo = _first_slice(max(start, o), cfg)
    hi = min(int(math.ceil((end - o) / cfg.slice_duration)), T)
    while hi > lo and cfg.bounds(hi)[0] >= end:
        hi -= 1
    while hi < T and cfg.bounds(hi + 1)[0] < end:
        hi += 1
    return lo, hi


def build_tensor(events: Iterable[ContactEvent], cfg: WindowConfig, n: int) -> SnapshotTensor:
    """Bin contacts into ``cfg.slice_count`` adjacency slices.

    A slice bit is set when a contact overlaps the slice interval at all.
    Zero-length contacts mark the slice containing their start time.
    """
    z = np.zeros((cfg.slice_count, n, n), dtype=np.uint8)
    for ev in events:
        if not (0 <= ev.a < n and 0 <= ev.b < n):
            raise IndexError(f"contact ({ev.a}, {ev.b}) outside node range 0..{n - 1}")
        lo, hi = _slice_range(ev.start, ev.end, cfg)
        if lo < hi:
            z[lo:hi, ev.a, ev.b] = 1
            z[lo:hi, ev.b, ev.a] = 1
    return SnapshotTensor(n, cfg, z)


def ground_truth_slice(events: Iterable[ContactEvent], cfg: WindowConfig, n: int) -> np.ndarray:
    """Adjacency matrix of the period right after the observation window."""
    return build_tensor(events, cfg.next_window(), n).slices[0].copy()
