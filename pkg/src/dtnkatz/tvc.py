"""Synthetic contact traces from a time-variant community mobility model.

Every node owns ``community_count`` square community boxes placed uniformly at
random in the simulation area. It moves by random waypoint inside its current
region (one of its boxes, or the whole area when roaming). At each epoch
boundary a node heads to another of its communities with probability
``p_switch``, starts roaming with probability ``p_roam`` and otherwise keeps
its current mode.

Positions are advanced once per ``tick``. A contact is a maximal run of ticks
during which two nodes are within ``radio_range``; a visit is a maximal run of
ticks during which a node is in community mode and inside that community box.
Both are emitted as half-open ``[first_tick, last_tick + tick)`` intervals.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .trace_model import ContactEvent, LocationVisit, NodeRegistry


@dataclass(frozen=True)
class TvcParams:
    area_edge: float = 1000.0
    node_count: int = 100
    radio_range: float = 75.0
    community_count: int = 2
    v_min: float = 5.0
    v_max: float = 15.0
    # Stand-ins: the reference generator's example constants are not published.
    # These keep nodes mostly inside their home community for an hour at a time.
    p_switch: float = 0.1
    p_roam: float = 0.005
    community_edge: float = 200.0
    epoch_duration: float = 3600.0
    tick: float = 1.0
    duration: float = 14400.0
    seed: int = 42
    # Lower-left corners shared by every node instead of per-node random boxes.
    community_origins: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        errors = []
        if self.node_count < 1:
            errors.append("node_count must be >= 1")
        if self.community_count < 1:
            errors.append("community_count must be >= 1")
        if not 0 <= self.v_min <= self.v_max:
            errors.append("speeds must satisfy 0 <= v_min <= v_max")
        if not (0 <= self.p_switch <= 1 and 0 <= self.p_roam <= 1 and self.p_switch + self.p_roam <= 1):
            errors.append("p_switch, p_roam must be probabilities with p_switch + p_roam <= 1")
        if not 0 < self.radio_range < self.area_edge:
            errors.append("radio_range must be positive and smaller than area_edge")
        if not 0 <= self.community_edge <= self.area_edge:
            errors.append("community_edge must lie in [0, area_edge]")
        if not (self.tick > 0 and self.duration > 0 and self.epoch_duration > 0):
            errors.append("tick, duration and epoch_duration must be > 0")
        elif not (_is_multiple(self.duration, self.tick) and _is_multiple(self.epoch_duration, self.tick)):
            errors.append("duration and epoch_duration must be multiples of tick")
        if self.community_origins is not None:
            if len(self.community_origins) != self.community_count:
                errors.append("community_origins must list community_count corners")
            hi = self.area_edge - self.community_edge
            for x, y in self.community_origins:
                if not (0 <= x <= hi and 0 <= y <= hi):
                    errors.append(f"community box at ({x}, {y}) leaves the area")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def ticks(self) -> int:
        return int(round(self.duration / self.tick))

    def replace(self, **changes) -> "TvcParams":
        return dataclasses.replace(self, **changes)


def _is_multiple(x: float, step: float) -> bool:
    q = x / step
    return abs(q - round(q)) < 1e-9 and round(q) >= 1


def node_registry(params: TvcParams) -> NodeRegistry:
    return NodeRegistry(str(i) for i in range(params.node_count))


def location_registry(params: TvcParams) -> NodeRegistry:
    return NodeRegistry(f"community-{c + 1}" for c in range(params.community_count))


def assign_preferences(params: TvcParams, seed: int | None = None) -> np.ndarray:
    """Lower-left corners of every node's community boxes, shape ``(N, C, 2)``."""
    n, c = params.node_count, params.community_count
    if params.community_origins is not None:
        corners = np.asarray(params.community_origins, dtype=float)
        return np.broadcast_to(corners, (n, c, 2)).copy()
    rng = np.random.default_rng([params.seed if seed is None else seed, 0])
    return rng.uniform(0.0, params.area_edge - params.community_edge, size=(n, c, 2))


class _Intervals:
    """Turns per-tick boolean states into maximal runs."""

    def __init__(self, size: int):
        self.active = np.zeros(size, dtype=bool)
        self.since = np.zeros(size, dtype=np.int64)
        self.runs: list[tuple[int, int, int]] = []  # (slot, first_tick, end_tick)

    def update(self, state: np.ndarray, k: int) -> None:
        started = state & ~self.active
        ended = self.active & ~state
        for slot in np.flatnonzero(ended):
            self.runs.append((int(slot), int(self.since[slot]), k))
        self.since[started] = k
        self.active = state

    def close(self, k: int) -> list[tuple[int, int, int]]:
        self.update(np.zeros_like(self.active), k)
        return self.runs


def simulate(params: TvcParams) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yield ``(tick_index, positions, modes)`` for every tick.

    ``positions`` is ``(N, 2)`` metres and ``modes[i]`` is the community index,
    or ``community_count`` while roaming. Both arrays are reused between ticks.
    """
    n, C = params.node_count, params.community_count
    edge, area = params.community_edge, params.area_edge
    boxes = assign_preferences(params)
    rng = np.random.default_rng([params.seed, 1])
    rows = np.arange(n)

    def draw_targets(modes: np.ndarray, who: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        roaming = modes == C
        lo = np.where(roaming[:, None], 0.0, boxes[who, np.minimum(modes, C - 1)])
        size = np.where(roaming, area, edge)
        pts = lo + rng.uniform(0.0, 1.0, size=(len(who), 2)) * size[:, None]
        speeds = rng.uniform(params.v_min, params.v_max, size=len(who))
        return pts, speeds

    mode = np.zeros(n, dtype=np.int64)
    pos = boxes[:, 0] + rng.uniform(0.0, 1.0, size=(n, 2)) * edge
    target, speed = draw_targets(mode, rows)
    epoch_ticks = int(round(params.epoch_duration / params.tick))

    for k in range(params.ticks):
        if k and k % epoch_ticks == 0:
            u = rng.uniform(size=n)
            switch = u < params.p_switch
            roam = ~switch & (u < params.p_switch + params.p_roam)
            new_mode = mode.copy()
            if C == 1:
                new_mode[switch] = 0
            else:
                cur = mode[switch]
                offset = rng.integers(1, C, size=len(cur))
                new_mode[switch] = np.where(cur == C, rng.integers(0, C, size=len(cur)), (cur + offset) % C)
            new_mode[roam] = C
            changed = np.flatnonzero(new_mode != mode)
            mode[:] = new_mode
            if changed.size:
                target[changed], speed[changed] = draw_targets(mode[changed], changed)

        yield k, pos, mode

        step = speed * params.tick
        delta = target - pos
        dist = np.hypot(delta[:, 0], delta[:, 1])
        arrived = dist <= step
        moving = ~arrived
        pos[moving] += delta[moving] * (step[moving] / dist[moving])[:, None]
        if arrived.any():
            who = np.flatnonzero(arrived)
            pos[who] = target[who]
            target[who], speed[who] = draw_targets(mode[who], who)


def generate(params: TvcParams) -> tuple[list[ContactEvent], list[LocationVisit]]:
    """Contacts and community visits of one simulation run, deterministic in
    ``params.seed``."""
    n, C = params.node_count, params.community_count
    boxes = assign_preferences(params)
    rows = np.arange(n)
    iu, ju = np.triu_indices(n, k=1)
    r2 = params.radio_range**2
    contacts = _Intervals(len(iu))
    visits = _Intervals(n * C)  # slot = node * C + community

    for k, pos, mode in simulate(params):
        d = pos[iu] - pos[ju]
        contacts.update(np.einsum("ij,ij->i", d, d) <= r2, k)
        lo = boxes[rows, np.minimum(mode, C - 1)]
        inside = (mode < C) & np.all((pos >= lo) & (pos <= lo + params.community_edge), axis=1)
        slots = np.zeros((n, C), dtype=bool)
        slots[rows[inside], mode[inside]] = True
        visits.update(slots.ravel(), k)

    K, t = params.ticks, params.tick
    events = [ContactEvent(int(iu[s]), int(ju[s]), k0 * t, k1 * t) for s, k0, k1 in contacts.close(K)]
    events.sort(key=lambda e: (e.start, e.a, e.b))
    visit_list = [LocationVisit(s // C, s % C, k0 * t, k1 * t) for s, k0, k1 in visits.close(K)]
    visit_list.sort(key=lambda v: (v.start, v.node, v.location))
    return events, visit_list
