import io
import random
from collections import Counter

import pytest

from dtnkatz.ingestion import (
    CONTACTS_HEADER,
    VISITS_HEADER,
    TraceFormatError,
    format_seconds,
    parse_contacts,
    parse_visits,
    write_contacts,
)
from dtnkatz.trace_model import ContactEvent, NodeRegistry


def contacts(*lines):
    return io.StringIO("\n".join([CONTACTS_HEADER, *lines]) + "\n")


def visits(*lines):
    return io.StringIO("\n".join([VISITS_HEADER, *lines]) + "\n")


def test_single_record():
    events, reg = parse_contacts(contacts("x,y,0,600"))
    assert events == [ContactEvent(0, 1, 0.0, 600.0)]
    assert reg.ids == ("x", "y")


def test_reversed_record_is_canonicalised():
    events, _ = parse_contacts(contacts("x,y,0,600", "y,x,0,600"))
    assert events[0] == events[1] == ContactEvent(0, 1, 0.0, 600.0)


def test_self_contact_names_line():
    with pytest.raises(TraceFormatError, match="self-contact at line 2"):
        parse_contacts(contacts("x,x,0,10"))


@pytest.mark.parametrize(
    "line, message",
    [
        ("x,y,0", "expected 4 fields"),
        ("x,y,0,1,2", "expected 4 fields"),
        ("x,y,abc,10", "non-numeric"),
        ("x,y,1e3,2000", "non-numeric"),
        ("x,y,1,000,2000", "expected 4 fields"),
        ("x,y,-1,10", "non-numeric"),
        ("x,y,nan,10", "non-numeric"),
        ("x,y,20,10", "start 20.0 > end 10.0"),
    ],
)
def test_malformed_lines(line, message):
    with pytest.raises(TraceFormatError, match=message) as err:
        parse_contacts(contacts("a,b,0,1", line))
    assert err.value.line == 3


def test_header_required():
    with pytest.raises(TraceFormatError, match="header"):
        parse_contacts(io.StringIO("x,y,0,600\n"))
    with pytest.raises(TraceFormatError, match="header"):
        parse_contacts(io.StringIO(VISITS_HEADER + "\n"))


def test_comments_and_decimals():
    text = "# exported by hand\n" + CONTACTS_HEADER + "\n# note\nx,y,0.5,12.25\n"
    events, _ = parse_contacts(io.StringIO(text))
    assert events == [ContactEvent(0, 1, 0.5, 12.25)]


def test_existing_registry_is_extended():
    reg = NodeRegistry(["q"])
    events, reg = parse_contacts(contacts("x,q,0,1"), reg)
    assert reg.ids == ("q", "x")
    assert events == [ContactEvent(0, 1, 0.0, 1.0)]


def test_visits():
    vs, nodes, locs = parse_visits(visits("x,AP7,0,900"))
    assert (vs[0].node, vs[0].location, vs[0].start, vs[0].end) == (0, 0, 0.0, 900.0)
    assert locs.ids == ("AP7",)

    vs, _, _ = parse_visits(visits("x,AP7,0,10", "x,AP7,0,10"))
    assert len(vs) == 2

    with pytest.raises(TraceFormatError, match="start 900.0 > end 0.0 at line 2"):
        parse_visits(visits("x,AP7,900,0"))


def test_write_empty_and_single():
    out = io.StringIO()
    write_contacts([], NodeRegistry(), out)
    assert out.getvalue() == CONTACTS_HEADER + "\n"

    out = io.StringIO()
    write_contacts([ContactEvent(0, 1, 0, 600)], NodeRegistry(["x", "y"]), out)
    assert out.getvalue() == CONTACTS_HEADER + "\nx,y,0,600\n"


def test_format_seconds():
    assert format_seconds(600.0) == "600"
    assert format_seconds(0.1) == "0.1"
    assert format_seconds(1e-5) == "0.00001"
    with pytest.raises(ValueError):
        format_seconds(-1.0)


def _keyed(events, reg):
    return Counter((frozenset((reg.external(e.a), reg.external(e.b))), e.start, e.end) for e in events)


def test_round_trip_random():
    rng = random.Random(7)
    reg = NodeRegistry(f"n{i}" for i in range(40))
    events = []
    for _ in range(1000):
        a, b = rng.sample(range(40), 2)
        s = rng.uniform(0, 14400)
        e = s + rng.choice([0.0, rng.uniform(0, 600)])
        events.append(ContactEvent.make(a, b, s, e))
    buf = io.StringIO()
    write_contacts(events, reg, buf)
    buf.seek(0)
    parsed, reg2 = parse_contacts(buf)
    assert _keyed(parsed, reg2) == _keyed(events, reg)
    assert all(e.a < e.b for e in parsed)
