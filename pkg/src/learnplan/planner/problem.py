"""Planning problem, configuration catalog, instruction plans and plan replay."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

from learnplan.planner.environment import HEADINGS, Arc, EnvironmentMap, heading_index, rotation_time

DEFAULT_CHARGE_RATE = 50.0
# slack applied before rounding energy up, so 356.9999999 and 357.0 land in the same bucket
ROUNDING_SLACK = 1e-9


class PlanError(ValueError):
    """A plan cannot be executed against the problem it claims to solve."""


@dataclass(frozen=True)
class CatalogEntry:
    config_id: str
    speed: float
    discharge_rate: float

    def __post_init__(self):
        if not (self.speed > 0 and math.isfinite(self.speed)):
            raise ValueError(f"config {self.config_id}: speed must be positive")
        if not (self.discharge_rate > 0 and math.isfinite(self.discharge_rate)):
            raise ValueError(f"config {self.config_id}: discharge rate must be positive")
        if not self.config_id or not all(ch.isalnum() or ch == "_" for ch in self.config_id):
            raise ValueError(f"config id must be a non-empty identifier: {self.config_id!r}")


@dataclass(frozen=True)
class ConfigCatalog:
    entries: tuple[CatalogEntry, ...]

    def __post_init__(self):
        ids = [e.config_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("config ids must be unique")
        object.__setattr__(self, "_by_id", {e.config_id: e for e in self.entries})

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, config_id):
        return config_id in self._by_id

    def get(self, config_id: str) -> CatalogEntry:
        try:
            return self._by_id[config_id]
        except KeyError:
            raise KeyError(f"unknown config {config_id!r}") from None

    @property
    def ids(self) -> list[str]:
        return [e.config_id for e in self.entries]

    def with_entry(self, entry: CatalogEntry) -> "ConfigCatalog":
        return ConfigCatalog(self.entries + (entry,))

    def to_json(self) -> list:
        return [{"id": e.config_id, "speed": e.speed, "discharge_rate": e.discharge_rate} for e in self.entries]

    @classmethod
    def from_json(cls, doc: list) -> "ConfigCatalog":
        return cls(tuple(CatalogEntry(str(e["id"]), float(e["speed"]), float(e["discharge_rate"])) for e in doc))


@dataclass(frozen=True)
class PlanningProblem:
    map: EnvironmentMap
    catalog: ConfigCatalog
    start: str
    target: str
    initial_config: str
    initial_battery: float
    max_battery: float
    min_battery: float = 0.0
    initial_heading: int = 0
    max_reconfigs: int = 0
    charge_rate: float = DEFAULT_CHARGE_RATE

    def __post_init__(self):
        if len(self.catalog) == 0:
            raise ValueError("configuration catalog is empty")
        for name in (self.start, self.target):
            if not self.map.has_location(name):
                raise ValueError(f"unknown location {name!r}")
        if self.initial_config not in self.catalog:
            raise ValueError(f"initial config {self.initial_config!r} not in catalog")
        if not 0 <= self.min_battery < self.initial_battery <= self.max_battery:
            raise ValueError(
                f"battery levels must satisfy 0 <= min < initial <= max "
                f"(got {self.min_battery}, {self.initial_battery}, {self.max_battery})"
            )
        if self.max_reconfigs < 0:
            raise ValueError("max_reconfigs must be non-negative")
        if not self.charge_rate > 0:
            raise ValueError("charge rate must be positive")
        object.__setattr__(self, "initial_heading", heading_index(self.initial_heading))

    # integer battery levels used by the discretized semantics
    @property
    def battery_cap(self) -> int:
        return int(math.floor(self.max_battery))

    @property
    def battery_floor(self) -> int:
        return int(math.ceil(self.min_battery))

    @property
    def battery_start(self) -> int:
        return int(math.floor(self.initial_battery))


def move_cost(distance: Union[float, Arc], entry: CatalogEntry) -> tuple[float, float]:
    """Travel time and energy for one arc, rotation excluded."""
    d = distance.distance if isinstance(distance, Arc) else float(distance)
    if d < 0:
        raise ValueError("distance must be non-negative")
    t = d / entry.speed
    return t, t * entry.discharge_rate


def energy_units(energy: float) -> int:
    """Whole mWh charged against the discretized battery (rounded up)."""
    return max(0, int(math.ceil(energy - ROUNDING_SLACK)))


@dataclass(frozen=True)
class MoveTo:
    location: str

    def to_json(self):
        return {"op": "move", "to": self.location}


@dataclass(frozen=True)
class SetConfig:
    config_id: str

    def to_json(self):
        return {"op": "config", "id": self.config_id}


@dataclass(frozen=True)
class Charge:
    to_level: float

    def to_json(self):
        return {"op": "charge", "to": self.to_level}


Instruction = Union[MoveTo, SetConfig, Charge]


def instruction_from_json(doc: dict) -> Instruction:
    op = doc.get("op")
    if op == "move":
        return MoveTo(str(doc["to"]))
    if op == "config":
        return SetConfig(str(doc["id"]))
    if op == "charge":
        return Charge(float(doc["to"]))
    raise ValueError(f"unknown instruction {doc!r}")


@dataclass(frozen=True)
class InstructionGraph:
    instructions: tuple[Instruction, ...] = ()
    predicted_time: float = 0.0
    predicted_energy: float = 0.0

    def __len__(self):
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    @property
    def reconfig_count(self) -> int:
        return sum(isinstance(i, SetConfig) for i in self.instructions)

    def to_json(self) -> dict:
        return {
            "instructions": [i.to_json() for i in self.instructions],
            "predicted_time": self.predicted_time,
            "predicted_energy": self.predicted_energy,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "InstructionGraph":
        return cls(
            tuple(instruction_from_json(i) for i in doc["instructions"]),
            float(doc.get("predicted_time", 0.0)),
            float(doc.get("predicted_energy", 0.0)),
        )


@dataclass
class PlanTotals:
    time: float
    energy: float
    battery_trace: list[float] = field(default_factory=list)

    def __iter__(self):
        return iter((self.time, self.energy, self.battery_trace))


def plan_totals(
    plan: Union[InstructionGraph, Sequence[Instruction]],
    problem: PlanningProblem,
    check_floor: bool = True,
) -> PlanTotals:
    """Replay a plan under the discretized semantics the synthesizer uses.

    Energy is the sum of rounded-up move costs; the battery trace holds the
    level after every instruction, starting with the initial level.
    """
    instructions = plan.instructions if isinstance(plan, InstructionGraph) else tuple(plan)
    env = problem.map
    loc, heading, cfg = problem.start, problem.initial_heading, problem.initial_config
    battery = problem.battery_start
    cap, floor = problem.battery_cap, problem.battery_floor
    time = 0.0
    energy = 0
    reconfigs = 0
    trace: list[float] = [battery]
    for step, ins in enumerate(instructions):
        if isinstance(ins, MoveTo):
            arc = env.arc(loc, ins.location)
            if arc is None:
                raise PlanError(f"step {step}: {loc} and {ins.location} are not adjacent")
            if env.is_blocked(loc, ins.location):
                raise PlanError(f"step {step}: arc {loc}-{ins.location} is blocked")
            t, e = move_cost(arc, problem.catalog.get(cfg))
            units = energy_units(e)
            time += t + rotation_time(heading, arc.heading)
            energy += units
            if check_floor and battery - units < floor:
                raise PlanError(f"step {step}: move needs {units} mWh but only {battery - floor} is above the floor")
            battery = max(0, battery - units)
            loc, heading = ins.location, arc.heading
        elif isinstance(ins, SetConfig):
            if ins.config_id not in problem.catalog:
                raise PlanError(f"step {step}: unknown config {ins.config_id!r}")
            reconfigs += 1
            if reconfigs > problem.max_reconfigs:
                raise PlanError(f"step {step}: reconfiguration budget {problem.max_reconfigs} exceeded")
            cfg = ins.config_id
        elif isinstance(ins, Charge):
            if not env.location(loc).charger:
                raise PlanError(f"step {step}: no charger at {loc}")
            level = min(int(math.floor(ins.to_level)), cap)
            if level < battery:
                raise PlanError(f"step {step}: charge target {ins.to_level} below current level {battery}")
            time += (level - battery) / problem.charge_rate
            battery = level
        else:
            raise PlanError(f"step {step}: unknown instruction {ins!r}")
        if check_floor and battery < floor:
            raise PlanError(f"step {step}: battery {battery} below minimum {floor}")
        trace.append(battery)
    return PlanTotals(time, float(energy), trace)


def heading_name(h: int) -> str:
    return HEADINGS[heading_index(h)]
