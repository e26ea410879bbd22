import numpy as np
import pytest

from gffperc.events import (
    AllOfEvent,
    CrossingEvent,
    DisjointCrossingsEvent,
    DualConnectedEvent,
    OriginToRingEvent,
    SiteEvent,
    TrueEvent,
    default_ring_radius,
    parse_event,
)
from gffperc.lattice import VERTICAL, Rect, build_box
from gffperc.levelset import LevelSet


def full_levelset(n, value=True):
    return LevelSet(build_box(n), 0.0, np.full((n, n), value))


def test_increasing_flags():
    assert SiteEvent((1, 1)).increasing
    assert CrossingEvent(Rect(0, 3, 0, 3), VERTICAL).increasing
    assert OriginToRingEvent(1).increasing
    assert not DualConnectedEvent((0, 0), (1, 1)).increasing
    assert DisjointCrossingsEvent(Rect(0, 3, 0, 3), VERTICAL, 2).increasing


def test_conjunction_increasing_only_when_all_parts_are():
    inc = AllOfEvent((SiteEvent((1, 1)), TrueEvent()))
    assert inc.increasing
    mixed = AllOfEvent((SiteEvent((1, 1)), DualConnectedEvent((0, 0), (1, 1))))
    assert not mixed.increasing


def test_conjunction_evaluation():
    ls = full_levelset(4)
    ev = AllOfEvent((SiteEvent((0, 0)), SiteEvent((3, 3))))
    assert ev.evaluate(ls)
    assert not ev.evaluate(full_levelset(4, value=False))


def test_labels_roundtrip_through_parser():
    box = build_box(8)
    for ev in (
            SiteEvent((3, 4)),
            CrossingEvent(Rect(1, 6, 1, 3), VERTICAL),
            DualConnectedEvent((0, 0), (5, 5)),
            DisjointCrossingsEvent(Rect(1, 6, 1, 6), VERTICAL, 2),
            OriginToRingEvent(2),
            TrueEvent(),
    ):
        assert parse_event(ev.label(), box) == ev


def test_parse_defaults():
    box = build_box(8)
    ev = parse_event("crossing:vertical", box)
    assert ev.rect == Rect(0, 7, 0, 7)
    ring = parse_event("origin-to-ring", box)
    assert ring.radius == default_ring_radius(8) == 3


def test_parse_rejects_bad_input():
    box = build_box(8)
    for bad in ("nope", "crossing:sideways", "site:9,9", "connected:1,1",
                "disjoint-count:vertical:0", "origin-to-ring:99"):
        with pytest.raises(ValueError):
            parse_event(bad, box)


def test_ring_radius_floor():
    assert default_ring_radius(3) == 0
    assert default_ring_radius(32) == 15
    with pytest.raises(ValueError):
        default_ring_radius(2)


def test_origin_ring_zero_radius_means_origin_open():
    ev = OriginToRingEvent(0)
    assert ev.evaluate(full_levelset(5))
    assert not ev.evaluate(full_levelset(5, value=False))
