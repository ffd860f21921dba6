"""Canonical contact / visit CSV formats.

Contact files::

    version=1,kind=contacts
    node_a,node_b,start_seconds,end_seconds
    ...

Visit files use ``version=1,kind=visits`` and ``node,location,start,end``
records. Lines starting with ``#`` are comments. Times are trace-relative
seconds written as plain non-negative decimals.
"""

from __future__ import annotations

import math
import re
from typing import IO, Iterable, Iterator

import numpy as np

from .trace_model import ContactEvent, LocationVisit, NodeRegistry

CONTACTS_HEADER = "version=1,kind=contacts"
VISITS_HEADER = "version=1,kind=visits"

_DECIMAL = re.compile(r"\d+(\.\d*)?|\.\d+")


class TraceFormatError(ValueError):
    """Malformed trace file; ``line`` is the 1-based offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"{message} at line {line}" if line is not None else message)


def _records(stream: IO[str] | Iterable[str], header: str) -> Iterator[tuple[int, list[str]]]:
    seen_header = False
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        if not seen_header:
            if line.strip() != header:
                raise TraceFormatError(f"expected header {header!r}, got {line!r}", lineno)
            seen_header = True
            continue
        yield lineno, line.split(",")
    if not seen_header:
        raise TraceFormatError(f"missing header {header!r}")


def _seconds(text: str, lineno: int) -> float:
    text = text.strip()
    if not _DECIMAL.fullmatch(text):
        raise TraceFormatError(f"non-numeric time {text!r}", lineno)
    return float(text)


def _fields(parts: list[str], lineno: int) -> tuple[str, str, float, float]:
    if len(parts) != 4:
        raise TraceFormatError(f"expected 4 fields, got {len(parts)}", lineno)
    first, second = parts[0].strip(), parts[1].strip()
    if not first or not second:
        raise TraceFormatError("empty id field", lineno)
    start, end = _seconds(parts[2], lineno), _seconds(parts[3], lineno)
    if start > end:
        raise TraceFormatError(f"start {start} > end {end}", lineno)
    return first, second, start, end


def parse_contacts(
    stream: IO[str] | Iterable[str], registry: NodeRegistry | None = None
) -> tuple[list[ContactEvent], NodeRegistry]:
    """Read a contact CSV. Node ids are registered in first-appearance order,
    extending ``registry`` when one is given."""
    reg = registry if registry is not None else NodeRegistry()
    events = []
    for lineno, parts in _records(stream, CONTACTS_HEADER):
        x, y, start, end = _fields(parts, lineno)
        if x == y:
            raise TraceFormatError("self-contact", lineno)
        events.append(ContactEvent.make(reg.add(x), reg.add(y), start, end))
    return events, reg


def parse_visits(
    stream: IO[str] | Iterable[str],
    registry: NodeRegistry | None = None,
    locations: NodeRegistry | None = None,
) -> tuple[list[LocationVisit], NodeRegistry, NodeRegistry]:
    reg = registry if registry is not None else NodeRegistry()
    locs = locations if locations is not None else NodeRegistry()
    visits = []
    for lineno, parts in _records(stream, VISITS_HEADER):
        node, loc, start, end = _fields(parts, lineno)
        visits.append(LocationVisit(reg.add(node), locs.add(loc), start, end))
    return visits, reg, locs


def format_seconds(t: float) -> str:
    """Shortest decimal that round-trips, without exponent notation."""
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"time must be finite and non-negative, got {t}")
    return np.format_float_positional(float(t), unique=True, trim="-")


def write_contacts(events: Iterable[ContactEvent], registry: NodeRegistry, stream: IO[str]) -> None:
    stream.write(CONTACTS_HEADER + "\n")
    for ev in events:
        stream.write(
            f"{registry.external(ev.a)},{registry.external(ev.b)},"
            f"{format_seconds(ev.start)},{format_seconds(ev.end)}\n"
        )


def write_visits(
    visits: Iterable[LocationVisit], registry: NodeRegistry, locations: NodeRegistry, stream: IO[str]
) -> None:
    stream.write(VISITS_HEADER + "\n")
    for v in visits:
        stream.write(
            f"{registry.external(v.node)},{locations.external(v.location)},"
            f"{format_seconds(v.start)},{format_seconds(v.end)}\n"
        )
