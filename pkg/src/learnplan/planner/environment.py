"""Environment graph: named locations, directed arcs with distance and heading."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

HEADINGS = ("NORTH", "NORTHEAST", "EAST", "SOUTHEAST", "SOUTH", "SOUTHWEST", "WEST", "NORTHWEST")
SHORT_HEADINGS = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")
# seconds per 45 degree turn
ROTATION_STEP_S = 2.6180


def heading_index(heading) -> int:
    if isinstance(heading, int):
        if not 0 <= heading < 8:
            raise ValueError(f"heading index out of range: {heading}")
        return heading
    name = str(heading).upper()
    if name.startswith("H_"):
        name = name[2:]
    if name.isdigit():
        return heading_index(int(name))
    if name in SHORT_HEADINGS:
        return SHORT_HEADINGS.index(name)
    try:
        return HEADINGS.index(name)
    except ValueError:
        raise ValueError(f"unknown heading {heading!r}") from None


def rotation_steps(src, dst) -> int:
    diff = abs(heading_index(src) - heading_index(dst)) % 8
    return min(diff, 8 - diff)


def rotation_time(src, dst) -> float:
    return ROTATION_STEP_S * rotation_steps(src, dst)


def heading_from_delta(dx: float, dy: float) -> int:
    """8-way compass quantization; +y is north, +x is east."""
    if dx == 0 and dy == 0:
        raise ValueError("zero-length displacement has no heading")
    angle = math.degrees(math.atan2(dx, dy)) % 360.0
    return int(round(angle / 45.0)) % 8


def arc_key(a: str, b: str) -> tuple[str, str]:
    """Undirected key used for obstacles (blocking is symmetric)."""
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Location:
    name: str
    x: float = 0.0
    y: float = 0.0
    charger: bool = False


@dataclass(frozen=True)
class Arc:
    source: str
    target: str
    distance: float
    heading: int

    @property
    def key(self) -> tuple[str, str]:
        return arc_key(self.source, self.target)

    @property
    def action(self) -> str:
        return f"{self.source}_to_{self.target}"


@dataclass(frozen=True)
class EnvironmentMap:
    locations: tuple[Location, ...]
    arcs: tuple[Arc, ...]
    blocked: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        names = [loc.name for loc in self.locations]
        if len(set(names)) != len(names):
            raise ValueError("location names must be unique")
        known = set(names)
        seen = set()
        for arc in self.arcs:
            if arc.source not in known or arc.target not in known:
                raise ValueError(f"arc {arc.source}->{arc.target} references an unknown location")
            if arc.source == arc.target:
                raise ValueError(f"self-loop at {arc.source}")
            if not arc.distance > 0:
                raise ValueError(f"arc {arc.source}->{arc.target} needs a positive distance")
            if (arc.source, arc.target) in seen:
                raise ValueError(f"duplicate arc {arc.source}->{arc.target}")
            seen.add((arc.source, arc.target))
        for key in self.blocked:
            if tuple(key) != arc_key(*key):
                raise ValueError(f"blocked arc keys must be normalized: {key}")
        object.__setattr__(self, "_out", {n: tuple(a for a in self.arcs if a.source == n) for n in names})
        object.__setattr__(self, "_arc", {(a.source, a.target): a for a in self.arcs})
        object.__setattr__(self, "_loc", {loc.name: loc for loc in self.locations})

    @property
    def names(self) -> list[str]:
        return [loc.name for loc in self.locations]

    @property
    def chargers(self) -> list[str]:
        return [loc.name for loc in self.locations if loc.charger]

    def location(self, name: str) -> Location:
        return self._loc[name]

    def has_location(self, name: str) -> bool:
        return name in self._loc

    def arc(self, a: str, b: str) -> Arc | None:
        return self._arc.get((a, b))

    def is_blocked(self, a: str, b: str) -> bool:
        return arc_key(a, b) in self.blocked

    def outgoing(self, name: str, include_blocked: bool = False) -> tuple[Arc, ...]:
        arcs = self._out[name]
        if include_blocked:
            return arcs
        return tuple(a for a in arcs if a.key not in self.blocked)

    def with_blocked(self, keys: Iterable) -> "EnvironmentMap":
        extra = frozenset(arc_key(*k) for k in keys)
        return EnvironmentMap(self.locations, self.arcs, self.blocked | extra)

    def without_blocked(self) -> "EnvironmentMap":
        return EnvironmentMap(self.locations, self.arcs)

    def to_json(self) -> dict:
        undirected = {}
        for a in self.arcs:
            undirected.setdefault(a.key, a)
        doc = {
            "locations": [{"name": l.name, "x": l.x, "y": l.y, "charger": l.charger} for l in self.locations],
            "arcs": [{"from": a.source, "to": a.target, "distance_m": a.distance} for a in undirected.values()],
        }
        if self.blocked:
            doc["blocked"] = [list(k) for k in sorted(self.blocked)]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "EnvironmentMap":
        """Arcs in the document are undirected; headings come from coordinates."""
        locations = tuple(
            Location(str(l["name"]), float(l.get("x", 0.0)), float(l.get("y", 0.0)), bool(l.get("charger", False)))
            for l in doc["locations"]
        )
        by_name = {l.name: l for l in locations}
        arcs = []
        for entry in doc["arcs"]:
            a, b = str(entry["from"]), str(entry["to"])
            if a not in by_name or b not in by_name:
                raise ValueError(f"arc {a}-{b} references an unknown location")
            la, lb = by_name[a], by_name[b]
            dist = entry.get("distance_m")
            if dist is None:
                dist = math.hypot(lb.x - la.x, lb.y - la.y)
            h = heading_from_delta(lb.x - la.x, lb.y - la.y)
            arcs.append(Arc(a, b, float(dist), h))
            arcs.append(Arc(b, a, float(dist), (h + 4) % 8))
        blocked = frozenset(arc_key(*k) for k in doc.get("blocked", []))
        return cls(locations, tuple(arcs), blocked)


def load_map(path) -> EnvironmentMap:
    with open(path) as fh:
        return EnvironmentMap.from_json(json.load(fh))


def save_map(env: EnvironmentMap, path) -> None:
    with open(path, "w") as fh:
        json.dump(env.to_json(), fh, indent=1)
        fh.write("\n")


def hop_route(env: EnvironmentMap, start: str, goal: str, respect_blocked: bool = False) -> list[str] | None:
    """Fewest-hop route (ties: shorter distance, then names); None if unreachable."""
    import heapq

    if start == goal:
        return [start]
    heap = [(0, 0.0, (start,))]
    best = {start: (0, 0.0)}
    while heap:
        hops, dist, path = heapq.heappop(heap)
        node = path[-1]
        if node == goal:
            return list(path)
        if best.get(node, (math.inf, math.inf)) < (hops, dist):
            continue
        for arc in env.outgoing(node, include_blocked=not respect_blocked):
            cand = (hops + 1, dist + arc.distance)
            if cand < best.get(arc.target, (math.inf, math.inf)):
                best[arc.target] = cand
                heapq.heappush(heap, (cand[0], cand[1], path + (arc.target,)))
    return None


def connected(env: EnvironmentMap, respect_blocked: bool = True) -> bool:
    names = env.names
    if not names:
        return True
    seen = {names[0]}
    stack = [names[0]]
    while stack:
        node = stack.pop()
        for arc in env.outgoing(node, include_blocked=not respect_blocked):
            if arc.target not in seen:
                seen.add(arc.target)
                stack.append(arc.target)
    return len(seen) == len(names)
