"""Catalogue of level-set events for the Monte Carlo estimators.

Every event evaluates on a LevelSet and declares whether it is increasing
in the field (adding open vertices can only switch it off -> on).  The
increasing flag gates the FKG checker and the monotone-coupling estimates.
Labels are stable strings used in CSV/JSON output and accepted back by
``parse_event``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lattice import HORIZONTAL, VERTICAL, BoxLattice, Rect, Vertex
from .levelset import (
    LevelSet,
    connected,
    count_disjoint_crossings,
    crossing,
    cluster_radius,
    dual_connected,
)

__all__ = [
    "Event",
    "TrueEvent",
    "SiteEvent",
    "ConnectedEvent",
    "CrossingEvent",
    "OriginToRingEvent",
    "DualConnectedEvent",
    "DisjointCrossingsEvent",
    "AllOfEvent",
    "default_ring_radius",
    "parse_event",
]


class Event:
    increasing: bool = False

    def evaluate(self, ls: LevelSet) -> bool:
        raise NotImplementedError

    def label(self) -> str:
        raise NotImplementedError

    def validate(self, box: BoxLattice) -> None:
        """Reject geometry that does not fit the box."""

    def __str__(self):
        return self.label()


@dataclass(frozen=True)
class TrueEvent(Event):
    """Constant-true event (increasing, trivially)."""

    increasing = True

    def evaluate(self, ls):
        return True

    def label(self):
        return "always-true"


@dataclass(frozen=True)
class SiteEvent(Event):
    """Single site open: {phi_x >= h}."""

    x: Vertex
    increasing = True

    def evaluate(self, ls):
        return ls.is_open(self.x)

    def label(self):
        return f"site:{self.x[0]},{self.x[1]}"

    def validate(self, box):
        box.require_vertex(self.x)


@dataclass(frozen=True)
class ConnectedEvent(Event):
    """Open 4-connected path between two vertices."""

    x: Vertex
    y: Vertex
    increasing = True

    def evaluate(self, ls):
        return connected(ls, self.x, self.y)

    def label(self):
        return f"connected:{self.x[0]},{self.x[1]}:{self.y[0]},{self.y[1]}"

    def validate(self, box):
        box.require_vertex(self.x)
        box.require_vertex(self.y)


@dataclass(frozen=True)
class CrossingEvent(Event):
    """Open crossing of a rectangle in the named direction."""

    rect: Rect
    direction: str
    increasing = True

    def evaluate(self, ls):
        return crossing(ls, self.rect, self.direction)

    def label(self):
        return f"crossing:{self.direction}:{self.rect.label()}"

    def validate(self, box):
        self.rect.require_inside(box)


@dataclass(frozen=True)
class OriginToRingEvent(Event):
    """Origin joined to the Chebyshev ring at `radius` by an open path.

    This realizes "origin to boundary": the frame itself carries phi = 0
    and would trivialize the event at h <= 0, so the target defaults to the
    interior ring adjacent to the frame.
    """

    radius: int
    increasing = True

    def evaluate(self, ls):
        return cluster_radius(ls, ls.box.origin) >= self.radius

    def label(self):
        return f"origin-to-ring:{self.radius}"

    def validate(self, box):
        if self.radius < 0:
            raise ValueError("ring radius must be >= 0")
        ox, oy = box.origin
        reach = min(ox, oy, box.n - 1 - ox, box.n - 1 - oy)
        if self.radius > reach:
            raise ValueError(f"ring radius {self.radius} leaves box of side {box.n}")


@dataclass(frozen=True)
class DualConnectedEvent(Event):
    """Closed 8-connected ("star") path between two vertices. Decreasing."""

    u: Vertex
    v: Vertex
    increasing = False

    def evaluate(self, ls):
        return dual_connected(ls, self.u, self.v)

    def label(self):
        return f"dual-connected:{self.u[0]},{self.u[1]}:{self.v[0]},{self.v[1]}"

    def validate(self, box):
        box.require_vertex(self.u)
        box.require_vertex(self.v)


@dataclass(frozen=True)
class DisjointCrossingsEvent(Event):
    """At least `count` vertex-disjoint open crossings of a rectangle."""

    rect: Rect
    direction: str
    count: int
    increasing = True

    def evaluate(self, ls):
        return count_disjoint_crossings(ls, self.rect, self.direction) >= self.count

    def label(self):
        return f"disjoint-count:{self.direction}:{self.count}:{self.rect.label()}"

    def validate(self, box):
        self.rect.require_inside(box)
        if self.count < 1:
            raise ValueError("crossing count threshold must be >= 1")


@dataclass(frozen=True)
class AllOfEvent(Event):
    """Conjunction of events; increasing iff every part is."""

    parts: tuple[Event, ...]

    def __post_init__(self):
        if not self.parts:
            raise ValueError("empty conjunction")
        object.__setattr__(self, "increasing", all(p.increasing for p in self.parts))

    def evaluate(self, ls):
        return all(p.evaluate(ls) for p in self.parts)

    def label(self):
        return "and(" + "&".join(p.label() for p in self.parts) + ")"

    def validate(self, box):
        for p in self.parts:
            p.validate(box)


def default_ring_radius(n: int) -> int:
    """Radius of the interior ring adjacent to the frame of a side-n box
    centered at the origin of the host box (0 when only the origin remains)."""
    if n < 3:
        raise ValueError(f"box side {n} too small for an origin-to-ring event")
    return max(n // 2 - 1, 0)


def _parse_vertex(token: str) -> Vertex:
    a, b = token.split(",")
    return (int(a), int(b))


def _parse_rect(token: str) -> Rect:
    x0, x1, y0, y1 = (int(t) for t in token.split(","))
    return Rect(x0, x1, y0, y1)


def parse_event(text: str, box: BoxLattice) -> Event:
    """Parse an event label (as used on the CLI) into an Event.

    Grammar by example::

        crossing:vertical               full-box rect
        crossing:horizontal:1,6,1,3     explicit rect x0,x1,y0,y1
        connected:1,1:6,6
        origin-to-ring                  ring adjacent to the frame
        origin-to-ring:5
        dual-connected:0,0:4,4
        disjoint-count:vertical:2       full-box rect, threshold 2
        disjoint-count:vertical:2:1,6,1,3
        site:3,3
        always-true
    """
    parts = text.strip().split(":")
    kind = parts[0]
    full = Rect(0, box.n - 1, 0, box.n - 1)
    try:
        if kind == "always-true":
            event: Event = TrueEvent()
        elif kind == "site":
            event = SiteEvent(_parse_vertex(parts[1]))
        elif kind == "connected":
            event = ConnectedEvent(_parse_vertex(parts[1]), _parse_vertex(parts[2]))
        elif kind == "dual-connected":
            event = DualConnectedEvent(_parse_vertex(parts[1]), _parse_vertex(parts[2]))
        elif kind == "crossing":
            direction = _parse_direction(parts[1])
            rect = _parse_rect(parts[2]) if len(parts) > 2 else full
            event = CrossingEvent(rect, direction)
        elif kind == "disjoint-count":
            direction = _parse_direction(parts[1])
            count = int(parts[2])
            rect = _parse_rect(parts[3]) if len(parts) > 3 else full
            event = DisjointCrossingsEvent(rect, direction, count)
        elif kind == "origin-to-ring" or kind == "origin-to-boundary":
            radius = int(parts[1]) if len(parts) > 1 else default_ring_radius(box.n)
            event = OriginToRingEvent(radius)
        else:
            raise ValueError(f"unknown event kind {kind!r}")
    except (IndexError, ValueError) as exc:
        raise ValueError(f"cannot parse event {text!r}: {exc}") from exc
    event.validate(box)
    return event


def _parse_direction(token: str) -> str:
    if token not in (HORIZONTAL, VERTICAL):
        raise ValueError(f"unknown direction {token!r}")
    return token
